#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/toy/toy.hpp"

using namespace pianoscribe;

namespace {

toy::ToyConfig small_config()
{
    toy::ToyConfig c;
    c.tracks = 12;
    c.duration = 2.0;
    return c;
}

// Chord index for each onset group, in time order.
std::vector<std::size_t> chord_sequence(const toy::ToyTrack& track, const toy::ToyConfig& config)
{
    std::map<double, std::set<int>> groups;
    for (const auto& n : track.notes) {
        const auto idx = std::ranges::find(config.pitches, n.pitch) - config.pitches.begin();
        groups[n.onset].insert(static_cast<int>(idx));
    }
    std::vector<std::size_t> out;
    const auto& chords = toy::toy_chords();
    for (const auto& [onset, members] : groups) {
        std::size_t found = chords.size();
        for (std::size_t c = 0; c < chords.size(); ++c) {
            if (std::set<int>(chords[c].begin(), chords[c].end()) == members) found = c;
        }
        out.push_back(found);
    }
    return out;
}

double tone_energy(const std::vector<double>& x, double freq, double fs)
{
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        re += x[i] * std::cos(2.0 * std::numbers::pi * freq * i / fs);
        im += x[i] * std::sin(2.0 * std::numbers::pi * freq * i / fs);
    }
    return re * re + im * im;
}

} // namespace

TEST_CASE("toy corpus is deterministic per seed")
{
    const auto a = toy::generate_toy_corpus(small_config());
    const auto b = toy::generate_toy_corpus(small_config());
    REQUIRE(a.size() == 12);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(a[i].notes == b[i].notes);
        CHECK(a[i].audio.samples == b[i].audio.samples);
    }
    auto other = small_config();
    other.seed = 2;
    CHECK(toy::generate_toy_corpus(other)[0].notes != a[0].notes);
    CHECK(a[0].name == "toy_0000");
}

TEST_CASE("toy notes use the pitch set and the chord vocabulary")
{
    const auto config = small_config();
    for (const auto& track : toy::generate_toy_corpus(config)) {
        CHECK(track.audio.samples.size() == static_cast<std::size_t>(config.duration * config.sample_rate));
        REQUIRE_FALSE(track.notes.empty());
        for (const auto& n : track.notes) {
            CHECK(std::ranges::find(config.pitches, n.pitch) != config.pitches.end());
            CHECK(n.onset >= 0.0);
            CHECK(n.offset > n.onset);
            CHECK(n.offset <= config.duration - config.release_gap + 1e-12);
        }
        for (const auto c : chord_sequence(track, config)) CHECK(c < toy::toy_chords().size());
    }
}

TEST_CASE("toy chord chain favours preferred successors")
{
    auto config = small_config();
    config.tracks = 200;
    config.noise_level = 0.0;
    std::size_t pairs = 0;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
    for (const auto& track : toy::generate_toy_corpus(config)) {
        const auto seq = chord_sequence(track, config);
        for (std::size_t i = 1; i < seq.size(); ++i) {
            ++counts[{seq[i - 1], seq[i]}];
            ++pairs;
        }
    }
    // Each chord has two preferred successors taken with probability 0.8,
    // plus a uniform draw otherwise, so the eight most frequent transitions
    // out of each chord should be concentrated on two targets.
    std::size_t concentrated = 0;
    for (std::size_t from = 0; from < 8; ++from) {
        std::vector<std::size_t> row;
        for (std::size_t to = 0; to < 8; ++to) row.push_back(counts[{from, to}]);
        std::ranges::sort(row, std::greater<>());
        std::size_t total = 0;
        for (auto r : row) total += r;
        if (total > 0) concentrated += row[0] + row[1];
    }
    REQUIRE(pairs > 500);
    const double share = static_cast<double>(concentrated) / static_cast<double>(pairs);
    CHECK(share > 0.75);
    CHECK(share < 0.95);
}

TEST_CASE("rendered tone has energy at its fundamental and not between partials")
{
    toy::ToyConfig config;
    config.noise_level = 0.0;
    const std::vector<roll::NoteEvent> notes{{69, 0.1, 0.6}};
    const auto audio = toy::render_notes(notes, 1.0, config, 7);
    const double fs = config.sample_rate;
    CHECK(tone_energy(audio.samples, 440.0, fs) > 100.0 * tone_energy(audio.samples, 660.0, fs));
    CHECK(tone_energy(audio.samples, 880.0, fs) > 100.0 * tone_energy(audio.samples, 660.0, fs));
    // Silent before the onset and after the release.
    for (std::size_t i = 0; i < static_cast<std::size_t>(0.1 * fs); ++i) CHECK(audio.samples[i] == 0.0);
    for (std::size_t i = static_cast<std::size_t>(0.64 * fs); i < audio.samples.size(); ++i) {
        CHECK(audio.samples[i] == 0.0);
    }
}

TEST_CASE("toy configuration is validated")
{
    auto c = small_config();
    c.pitches = {60, 62};
    CHECK_THROWS_AS(toy::generate_toy_corpus(c), ConfigError);
    c = small_config();
    c.min_segment = 0.05;
    CHECK_THROWS_AS(toy::generate_toy_corpus(c), ConfigError);
}
