#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pianoscribe/features/audio.hpp"
#include "pianoscribe/pianoroll/pianoroll.hpp"

namespace pianoscribe::toy {

/// Synthetic corpus settings. Rolls follow a first-order chord chain over a
/// small pitch set, so a sequence model has structure to learn; audio is a
/// sum of decaying harmonic partials plus white noise.
struct ToyConfig {
    std::size_t tracks = 200;
    double duration = 3.0;  // seconds
    std::vector<int> pitches{60, 62, 64, 65, 67, 69, 71, 72};
    int sample_rate = features::kTargetSampleRate;
    int harmonics = 6;
    double min_segment = 0.25;  // chord durations, seconds
    double max_segment = 0.6;
    double release_gap = 0.07;  // silence before the next chord
    double noise_level = 0.1;
    double min_decay = 0.2;  // seconds to 1/e
    double max_decay = 0.5;
    std::uint64_t seed = 1;
};

struct ToyTrack {
    std::string name;
    std::vector<roll::NoteEvent> notes;
    features::Audio audio;
};

/// Chord vocabulary over indices into ToyConfig::pitches.
const std::vector<std::vector<int>>& toy_chords();

std::vector<ToyTrack> generate_toy_corpus(const ToyConfig& config);

/// Renders notes as additive harmonic tones; `rng_seed` drives velocities,
/// phases and noise.
features::Audio render_notes(const std::vector<roll::NoteEvent>& notes, double duration, const ToyConfig& config,
                             std::uint64_t rng_seed);

} // namespace pianoscribe::toy
