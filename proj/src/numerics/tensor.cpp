#include "pianoscribe/numerics/tensor.hpp"

#include <cmath>

#include "pianoscribe/common/errors.hpp"

namespace pianoscribe::nn {

std::string_view to_string(Activation act)
{
    switch (act) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::linear: return "linear";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name)
{
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    if (name == "relu") return Activation::relu;
    if (name == "linear") return Activation::linear;
    throw ConfigError("unknown activation: " + std::string(name));
}

Matrix activate(Activation act, Matrix z)
{
    switch (act) {
    case Activation::sigmoid:
        return z.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::tanh:
        return z.array().tanh().matrix();
    case Activation::relu:
        return z.cwiseMax(0.0);
    case Activation::linear:
        return z;
    }
    return z;
}

Matrix activation_derivative(Activation act, const Matrix& y)
{
    switch (act) {
    case Activation::sigmoid:
        return (y.array() * (1.0 - y.array())).matrix();
    case Activation::tanh:
        return (1.0 - y.array().square()).matrix();
    case Activation::relu:
        return (y.array() > 0.0).cast<double>().matrix();
    case Activation::linear:
        return Matrix::Ones(y.rows(), y.cols());
    }
    return Matrix::Ones(y.rows(), y.cols());
}

void zero_grads(const ParameterList& params)
{
    for (Parameter* p : params) {
        p->zero_grad();
    }
}

Index parameter_count(const ParameterList& params)
{
    Index total = 0;
    for (const Parameter* p : params) {
        total += p->size();
    }
    return total;
}

void fill_uniform(Matrix& m, double limit, Rng& rng)
{
    std::uniform_real_distribution<double> dist(-limit, limit);
    // Fill in row-major order so the draw sequence matches the serialized layout.
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            m(r, c) = dist(rng);
        }
    }
}

double glorot_limit(Index fan_in, Index fan_out)
{
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void require_finite(const Matrix& m, const std::string& where)
{
    if (!m.allFinite()) {
        throw NumericalError("non-finite values produced by " + where);
    }
}

} // namespace pianoscribe::nn
