#include "pianoscribe/toy/toy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pianoscribe/common/errors.hpp"

namespace pianoscribe::toy {

namespace {

double midi_frequency(int pitch)
{
    return 440.0 * std::pow(2.0, (pitch - 69) / 12.0);
}

// Preferred successor chords; the chain picks one of these with probability
// 0.8 and any chord otherwise.
const std::vector<std::vector<int>>& chord_successors()
{
    static const std::vector<std::vector<int>> next{
        {3, 4}, {4, 5}, {5, 0}, {4, 6}, {0, 7}, {3, 1}, {0, 2}, {1, 6},
    };
    return next;
}

} // namespace

const std::vector<std::vector<int>>& toy_chords()
{
    // Indices into the pitch set C4 D4 E4 F4 G4 A4 B4 C5.
    static const std::vector<std::vector<int>> chords{
        {0, 2, 4}, {1, 3, 5}, {2, 4, 6}, {3, 5, 7}, {4, 6}, {0, 5}, {2, 7}, {1, 4, 6},
    };
    return chords;
}

std::vector<ToyTrack> generate_toy_corpus(const ToyConfig& config)
{
    if (config.pitches.size() < 8) throw ConfigError("toy corpus needs 8 pitches");
    if (config.duration <= 0.0 || config.min_segment <= config.release_gap || config.max_segment < config.min_segment) {
        throw ConfigError("toy corpus timing parameters are inconsistent");
    }
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto& chords = toy_chords();
    const auto& successors = chord_successors();
    std::uniform_int_distribution<std::size_t> any_chord(0, chords.size() - 1);

    std::vector<ToyTrack> out;
    out.reserve(config.tracks);
    for (std::size_t n = 0; n < config.tracks; ++n) {
        ToyTrack track;
        char name[32];
        std::snprintf(name, sizeof name, "toy_%04zu", n);
        track.name = name;
        std::size_t chord = any_chord(rng);
        double t = 0.1 * unit(rng);
        while (t < config.duration - config.min_segment) {
            const double length = config.min_segment + (config.max_segment - config.min_segment) * unit(rng);
            const double end = std::min(t + length, config.duration) - config.release_gap;
            for (int idx : chords[chord]) {
                track.notes.push_back({config.pitches[static_cast<std::size_t>(idx)], t, end});
            }
            t += length;
            if (unit(rng) < 0.8) {
                const auto& options = successors[chord];
                chord = static_cast<std::size_t>(options[static_cast<std::size_t>(unit(rng) * options.size())]);
            } else {
                chord = any_chord(rng);
            }
        }
        std::sort(track.notes.begin(), track.notes.end(), [](const auto& a, const auto& b) {
            return a.onset != b.onset ? a.onset < b.onset : a.pitch < b.pitch;
        });
        track.audio = render_notes(track.notes, config.duration, config, rng());
        out.push_back(std::move(track));
    }
    return out;
}

features::Audio render_notes(const std::vector<roll::NoteEvent>& notes, double duration, const ToyConfig& config,
                             std::uint64_t rng_seed)
{
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double fs = config.sample_rate;
    features::Audio audio;
    audio.sample_rate = config.sample_rate;
    audio.samples.assign(static_cast<std::size_t>(std::ceil(duration * fs)), 0.0);

    constexpr double kAttack = 0.005;
    constexpr double kRelease = 0.03;
    for (const auto& note : notes) {
        const double velocity = 0.4 + 0.6 * unit(rng);
        const double f0 = midi_frequency(note.pitch);
        const double decay = config.min_decay + (config.max_decay - config.min_decay) * unit(rng);
        std::vector<double> phase(static_cast<std::size_t>(config.harmonics));
        for (auto& p : phase) p = 2.0 * std::numbers::pi * unit(rng);
        const auto first = static_cast<std::size_t>(note.onset * fs);
        const auto last = std::min(audio.samples.size(), static_cast<std::size_t>((note.offset + kRelease) * fs));
        for (std::size_t i = first; i < last; ++i) {
            const double t = i / fs - note.onset;
            double env = velocity * std::exp(-t / decay) * std::min(1.0, t / kAttack);
            const double after = i / fs - note.offset;
            if (after > 0.0) env *= std::max(0.0, 1.0 - after / kRelease);
            double s = 0.0;
            for (int h = 1; h <= config.harmonics; ++h) {
                const double f = f0 * h;
                if (f >= fs / 2) break;
                // Higher partials decay faster, as on a struck string.
                s += std::exp(-0.3 * (h - 1) * (1.0 + t)) / h *
                     std::sin(2.0 * std::numbers::pi * f * t + phase[static_cast<std::size_t>(h - 1)]);
            }
            audio.samples[i] += 0.1 * env * s;
        }
    }
    for (auto& s : audio.samples) s += config.noise_level * gauss(rng);
    return audio;
}

} // namespace pianoscribe::toy
