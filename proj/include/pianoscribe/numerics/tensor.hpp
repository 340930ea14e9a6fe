#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace pianoscribe::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Every stochastic step in the project draws from this engine so that a seed
/// fully determines training and sampling.
using Rng = std::mt19937_64;

enum class Activation { sigmoid, tanh, relu, linear };

std::string_view to_string(Activation act);
Activation activation_from_string(std::string_view name);

inline double sigmoid(double z)
{
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Matrix activate(Activation act, Matrix z);

/// Derivative of the activation expressed through its output y = f(z).
Matrix activation_derivative(Activation act, const Matrix& y);

/// A trainable tensor and its gradient accumulator. Higher-rank tensors are
/// stored flattened into a matrix; the owning layer knows the logical shape.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Index rows, Index cols)
        : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols))
    {
    }

    void zero_grad() { grad.setZero(); }
    Index size() const { return value.size(); }
};

using ParameterList = std::vector<Parameter*>;

void zero_grads(const ParameterList& params);
Index parameter_count(const ParameterList& params);

/// Uniform in [-limit, limit].
void fill_uniform(Matrix& m, double limit, Rng& rng);

/// Symmetric uniform initialization bound sqrt(6 / (fan_in + fan_out)).
double glorot_limit(Index fan_in, Index fan_out);

/// Throws NumericalError naming `where` if `m` holds NaN or infinity.
void require_finite(const Matrix& m, const std::string& where);

} // namespace pianoscribe::nn
