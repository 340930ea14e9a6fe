#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "pianoscribe/numerics/tensor.hpp"

namespace pianoscribe::nn {

enum class OptimizerKind { sgd_momentum, adadelta };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd_momentum;
    /// Initial step size. For ADADELTA it scales the adaptive update and is
    /// normally left at 1.
    double learning_rate = 0.001;
    /// Iterations over which the rate decays linearly to zero; 0 keeps it constant.
    std::int64_t decay_horizon = 1000;
    double momentum = 0.9;
    std::optional<double> clip_norm;
    double rho = 0.95;
    double epsilon = 1e-6;
};

/// Learning rate at `iteration` under the linear schedule.
double scheduled_learning_rate(const OptimizerConfig& config, std::int64_t iteration);

/// Global L2 norm over all gradients.
double gradient_norm(const ParameterList& params);

/// Rescales all gradients by threshold/norm when the global norm exceeds the
/// threshold. Returns the norm before clipping.
double clip_gradients(const ParameterList& params, double threshold);

class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config);

    const OptimizerConfig& config() const { return config_; }
    std::int64_t iteration() const { return iteration_; }
    double current_learning_rate() const { return scheduled_learning_rate(config_, iteration_); }

    /// Applies one update from the accumulated gradients (clipping first when
    /// configured) and advances the schedule.
    void step(const ParameterList& params);

private:
    void ensure_state(const ParameterList& params);

    OptimizerConfig config_;
    std::int64_t iteration_ = 0;
    std::vector<Matrix> velocity_;
    std::vector<Matrix> mean_sq_grad_;
    std::vector<Matrix> mean_sq_update_;
};

} // namespace pianoscribe::nn
