#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pianoscribe/acoustic/posteriogram.hpp"
#include "pianoscribe/pianoroll/pianoroll.hpp"

namespace pianoscribe::decode {

/// Posteriogram values are clamped into [kProbFloor, 1 - kProbFloor] before
/// any log-domain work.
inline constexpr double kProbFloor = 1e-6;
double clamp_probability(double p);

/// Threshold from the grid 0.00, 0.01, ..., 1.00 maximizing corpus frame
/// F-measure under threshold_decode; the lowest threshold wins ties.
double fit_threshold(std::span<const acoustic::Posteriogram> posteriograms,
                     std::span<const roll::PianoRoll> truth);

/// Cells with probability strictly greater than theta become active.
roll::PianoRoll threshold_decode(const acoustic::Posteriogram& pg, double theta);

/// Two-state (off, on) chain for one pitch. transition[a][b] = P(b | a).
struct PitchHmm {
    double prior = 0.5;  // P(on)
    std::array<std::array<double, 2>, 2> transition{{{0.5, 0.5}, {0.5, 0.5}}};
};

/// Add-one smoothed counts per pitch: prior (on + 1) / (frames + 2) and
/// transition rows (count + 1) / (row total + 2). Transitions are counted
/// within each roll only.
std::vector<PitchHmm> fit_pitch_hmms(std::span<const roll::PianoRoll> rolls);

/// Most probable state path for one pitch. Emissions are scaled likelihoods
/// P(q | x_t) / P(q); the initial state follows the prior. Ties go to off.
std::vector<std::uint8_t> viterbi_path(std::span<const double> probs, const PitchHmm& hmm);

roll::PianoRoll hmm_decode(const acoustic::Posteriogram& pg, std::span<const PitchHmm> hmms);

/// Per-pitch activation frequencies used for the -log P(y') correction.
struct PitchMarginals {
    std::vector<double> p;
};

/// Add-one smoothed per-pitch occupancy, (on + 1) / (frames + 2).
PitchMarginals fit_pitch_marginals(std::span<const roll::PianoRoll> rolls);

} // namespace pianoscribe::decode
