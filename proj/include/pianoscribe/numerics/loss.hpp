#pragma once

#include <cmath>

#include "pianoscribe/numerics/tensor.hpp"

namespace pianoscribe::nn {

/// Summed Bernoulli cross-entropy (nats) of sigmoid(logits) against binary
/// targets, computed stably from the logits.
double bernoulli_nll_from_logits(const Matrix& logits, const Matrix& targets);

/// Summed Bernoulli cross-entropy of probabilities, with log arguments floored
/// at 1e-12.
double bernoulli_nll(const Matrix& probs, const Matrix& targets);

Matrix sigmoid(const Matrix& logits);

/// Converts a mean per-frame NLL in nats into bits per pitch.
inline double bits_per_pitch(double nats_per_frame, Index pitches)
{
    return nats_per_frame / (static_cast<double>(pitches) * std::log(2.0));
}

} // namespace pianoscribe::nn
