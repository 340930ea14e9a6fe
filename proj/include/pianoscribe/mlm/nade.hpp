#pragma once

#include "pianoscribe/numerics/tensor.hpp"

namespace pianoscribe::mlm {

/// Autoregressive binary distribution over D visible units in ascending index
/// order:
///   h_i = sigmoid(b_h + W[:, <i] v_<i),  P(v_i = 1 | v_<i) = sigmoid(V_i . h_i + b_v_i).
struct Nade {
    nn::Matrix W;  // H x D
    nn::Matrix V;  // D x H
    nn::Vector b_h;
    nn::Vector b_v;

    Nade() = default;
    Nade(nn::Index visible, nn::Index hidden);

    nn::Index visible() const { return W.cols(); }
    nn::Index hidden() const { return W.rows(); }

    void init(nn::Rng& rng);
};

/// log P(v). Throws DataError for non-binary v and DimensionError on size
/// mismatch.
double nade_log_prob(const Nade& n, const nn::Vector& v);

/// P(v_i = 1 | v_<i) for every i, evaluated along v.
nn::Vector nade_conditionals(const Nade& n, const nn::Vector& v);

/// Ancestral sample in index order.
nn::Vector nade_sample(const Nade& n, nn::Rng& rng);

/// Same as nade_log_prob, with the weights and biases passed separately so
/// callers can supply per-step biases without building a Nade.
double nade_log_prob(const nn::Matrix& W, const nn::Matrix& V, const nn::Vector& b_h, const nn::Vector& b_v,
                     const nn::Vector& v);

/// Gradients of -log P(v). Weight gradients and the bias gradients are added
/// into the output arguments. Returns -log P(v).
struct NadeGradients {
    nn::Matrix& W;
    nn::Matrix& V;
    nn::Vector& b_h;
    nn::Vector& b_v;
};
double nade_nll_gradient(const nn::Matrix& W, const nn::Matrix& V, const nn::Vector& b_h, const nn::Vector& b_v,
                         const nn::Vector& v, NadeGradients grads);

} // namespace pianoscribe::mlm
