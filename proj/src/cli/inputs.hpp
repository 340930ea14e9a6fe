#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "pianoscribe/acoustic/model.hpp"
#include "pianoscribe/decode/postprocess.hpp"
#include "pianoscribe/features/features.hpp"
#include "pianoscribe/pianoroll/pianoroll.hpp"

namespace pianoscribe::cli {

namespace fs = std::filesystem;

/// One manifest line: whitespace separated paths, resolved against the
/// manifest's directory. Blank lines and '#' comments are skipped.
using ManifestRow = std::vector<fs::path>;
std::vector<ManifestRow> read_manifest(const fs::path& path);

/// WAV is transformed on the fly; PSFT is read as is.
features::FeatureSequence load_track_features(const fs::path& path);

/// PSPR, MIDI or a note CSV rendered onto `frames` frames at `frame_rate`.
/// PSPR files are returned unchanged.
roll::PianoRoll load_truth_roll(const fs::path& path, std::size_t frames, double frame_rate);

/// Roll from PSPR, or from MIDI / CSV notes covering the last offset.
roll::PianoRoll load_roll_any(const fs::path& path, double frame_rate);

/// Notes from a note CSV or MIDI file, or derived from a PSPR roll.
std::vector<roll::NoteEvent> load_notes_any(const fs::path& path);

/// Lower-cased extension without the dot.
std::string extension_of(const fs::path& path);

/// Parsed "decision_threshold" from an acoustic model header, if stored.
std::optional<double> stored_threshold(const nn::ModelContainer& container);

/// Pitch statistics stored in an MLM file header by train-mlm.
struct PitchStatistics {
    decode::PitchMarginals marginals;
    std::vector<decode::PitchHmm> hmms;
};
std::optional<PitchStatistics> stored_statistics(const nn::ModelContainer& container);
void store_statistics(nn::ModelContainer& container, const PitchStatistics& stats);
void store_threshold(nn::ModelContainer& container, double threshold);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be
/// written by index so the outcome is independent of scheduling. The first
/// failure (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

} // namespace pianoscribe::cli
