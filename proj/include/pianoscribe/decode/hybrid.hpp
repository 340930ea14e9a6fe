#pragma once

#include <cstddef>

#include "pianoscribe/acoustic/posteriogram.hpp"
#include "pianoscribe/decode/beam.hpp"
#include "pianoscribe/decode/postprocess.hpp"
#include "pianoscribe/decode/prior.hpp"
#include "pianoscribe/pianoroll/pianoroll.hpp"

namespace pianoscribe::decode {

struct HybridConfig {
    std::size_t beam_width = 10;  // w
    std::size_t branch = 4;       // K
    std::size_t chain = 2;        // k
    std::size_t hash_n = 1;       // f_h keeps the last hash_n frames
};

struct DecodeResult {
    roll::PianoRoll roll;
    double score = 0.0;
    /// Prior log-probability evaluations, a machine-independent cost measure.
    std::size_t prior_evaluations = 0;
};

/// Frame term log P_a(y | x_t) - log P(y) for one configuration; the marginal
/// part is skipped when `marginals` is null.
double acoustic_term(const acoustic::Posteriogram& pg, std::size_t t, const PitchSet& y,
                     const PitchMarginals* marginals);

/// Hashed beam search. Every entry proposes the K most probable acoustic
/// configurations of the next frame; each candidate scores
/// l + log P_prior(y | s) + log P_a(y | x_t) - log P(y).
DecodeResult hybrid_decode(const acoustic::Posteriogram& pg, const SequencePrior& prior,
                           const PitchMarginals* marginals, const HybridConfig& config = {});
DecodeResult hybrid_decode(const acoustic::Posteriogram& pg, const mlm::RnnNade& model,
                           const PitchMarginals* marginals, const HybridConfig& config = {});

/// Plain beam search keeping the best `width` candidates per frame.
DecodeResult legacy_beam_decode(const acoustic::Posteriogram& pg, const SequencePrior& prior,
                                const PitchMarginals* marginals, std::size_t width, std::size_t branch = 4);
DecodeResult legacy_beam_decode(const acoustic::Posteriogram& pg, const mlm::RnnNade& model,
                                const PitchMarginals* marginals, std::size_t width, std::size_t branch = 4);

/// Total decoder score of a given roll, computed independently of any search.
double score_sequence(const acoustic::Posteriogram& pg, const SequencePrior& prior,
                      const PitchMarginals* marginals, const roll::PianoRoll& roll);

} // namespace pianoscribe::decode
