#include "inputs.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/common/file_util.hpp"
#include "pianoscribe/features/audio.hpp"
#include "pianoscribe/features/cqt.hpp"
#include "pianoscribe/pianoroll/midi.hpp"

namespace pianoscribe::cli {

std::vector<ManifestRow> read_manifest(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open manifest " + path.string());
    const fs::path base = path.parent_path();
    std::vector<ManifestRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        ManifestRow row;
        std::string field;
        while (fields >> field) {
            fs::path p(field);
            row.push_back(p.is_absolute() ? p : base / p);
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

std::string extension_of(const fs::path& path)
{
    std::string ext = path.extension().string();
    if (!ext.empty()) ext.erase(0, 1);
    std::ranges::transform(ext, ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

features::FeatureSequence load_track_features(const fs::path& path)
{
    const auto ext = extension_of(path);
    if (ext == "psft") return features::load_features(path);
    if (ext == "wav") {
        auto audio = features::load_wav(path);
        if (audio.sample_rate != features::kTargetSampleRate) {
            audio.samples = features::resample_to_16k(audio.samples, audio.sample_rate);
        }
        return features::cqt(audio.samples);
    }
    throw ConfigError("unsupported feature input " + path.string() + " (expected .wav or .psft)");
}

namespace {

std::vector<roll::NoteEvent> notes_from_events_file(const fs::path& path)
{
    const auto ext = extension_of(path);
    if (ext == "mid" || ext == "midi") return roll::midi_to_events(io::read_file_bytes(path)).events;
    if (ext == "csv") return roll::load_events_csv(path);
    throw ConfigError("unsupported label input " + path.string() + " (expected .pspr, .mid or .csv)");
}

double last_offset(std::span<const roll::NoteEvent> notes)
{
    double end = 0.0;
    for (const auto& n : notes) end = std::max(end, n.offset);
    return end;
}

} // namespace

roll::PianoRoll load_truth_roll(const fs::path& path, std::size_t frames, double frame_rate)
{
    if (extension_of(path) == "pspr") return roll::load_roll(path);
    const auto notes = notes_from_events_file(path);
    return roll::events_to_roll(notes, frame_rate, static_cast<double>(frames) / frame_rate);
}

roll::PianoRoll load_roll_any(const fs::path& path, double frame_rate)
{
    if (extension_of(path) == "pspr") return roll::load_roll(path);
    const auto notes = notes_from_events_file(path);
    return roll::events_to_roll(notes, frame_rate, last_offset(notes));
}

std::vector<roll::NoteEvent> load_notes_any(const fs::path& path)
{
    if (extension_of(path) == "pspr") return roll::roll_to_events(roll::load_roll(path));
    return notes_from_events_file(path);
}

std::optional<double> stored_threshold(const nn::ModelContainer& container)
{
    const auto header = nlohmann::json::parse(container.header, nullptr, false);
    if (header.is_discarded() || !header.contains("decision_threshold")) return std::nullopt;
    return header.at("decision_threshold").get<double>();
}

void store_threshold(nn::ModelContainer& container, double threshold)
{
    auto header = nlohmann::json::parse(container.header);
    header["decision_threshold"] = threshold;
    container.header = header.dump();
}

std::optional<PitchStatistics> stored_statistics(const nn::ModelContainer& container)
{
    const auto header = nlohmann::json::parse(container.header, nullptr, false);
    if (header.is_discarded() || !header.contains("pitch_statistics")) return std::nullopt;
    try {
        const auto& s = header.at("pitch_statistics");
        PitchStatistics out;
        out.marginals.p = s.at("marginals").get<std::vector<double>>();
        for (const auto& h : s.at("hmms")) {
            // [prior, P(on | off), P(on | on)]
            decode::PitchHmm hmm;
            hmm.prior = h.at(0).get<double>();
            for (int a = 0; a < 2; ++a) {
                hmm.transition[a][1] = h.at(1 + a).get<double>();
                hmm.transition[a][0] = 1.0 - hmm.transition[a][1];
            }
            out.hmms.push_back(hmm);
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad pitch statistics in model header: ") + e.what());
    }
}

void store_statistics(nn::ModelContainer& container, const PitchStatistics& stats)
{
    auto header = nlohmann::json::parse(container.header);
    nlohmann::json hmms = nlohmann::json::array();
    for (const auto& h : stats.hmms) hmms.push_back({h.prior, h.transition[0][1], h.transition[1][1]});
    header["pitch_statistics"] = {{"marginals", stats.marginals.p}, {"hmms", hmms}};
    container.header = header.dump();
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn)
{
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mutex;
    std::size_t failed_index = n;
    std::exception_ptr failure;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

} // namespace pianoscribe::cli
