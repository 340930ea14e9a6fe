#include "pianoscribe/numerics/loss.hpp"

#include <algorithm>
#include <cmath>

#include "pianoscribe/common/errors.hpp"

namespace pianoscribe::nn {

double bernoulli_nll_from_logits(const Matrix& logits, const Matrix& targets)
{
    if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
        throw DimensionError("logits and targets differ in shape");
    }
    double total = 0.0;
    for (Index c = 0; c < logits.cols(); ++c) {
        for (Index r = 0; r < logits.rows(); ++r) {
            const double z = logits(r, c);
            // softplus(z) - y z, written to avoid overflow for large |z|
            total += std::max(z, 0.0) - z * targets(r, c) + std::log1p(std::exp(-std::abs(z)));
        }
    }
    return total;
}

double bernoulli_nll(const Matrix& probs, const Matrix& targets)
{
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols()) {
        throw DimensionError("probabilities and targets differ in shape");
    }
    constexpr double floor = 1e-12;
    double total = 0.0;
    for (Index c = 0; c < probs.cols(); ++c) {
        for (Index r = 0; r < probs.rows(); ++r) {
            const double p = probs(r, c);
            const double y = targets(r, c);
            total -= y * std::log(std::max(p, floor)) + (1.0 - y) * std::log(std::max(1.0 - p, floor));
        }
    }
    return total;
}

Matrix sigmoid(const Matrix& logits)
{
    return logits.unaryExpr([](double z) { return nn::sigmoid(z); });
}

} // namespace pianoscribe::nn
