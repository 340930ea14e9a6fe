#include "pianoscribe/numerics/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pianoscribe/common/errors.hpp"

namespace pianoscribe::nn {

std::string_view to_string(OptimizerKind kind)
{
    return kind == OptimizerKind::adadelta ? "adadelta" : "sgd-momentum";
}

OptimizerKind optimizer_from_string(std::string_view name)
{
    if (name == "adadelta") return OptimizerKind::adadelta;
    if (name == "sgd-momentum" || name == "sgd") return OptimizerKind::sgd_momentum;
    throw ConfigError("unknown optimizer: " + std::string(name));
}

double scheduled_learning_rate(const OptimizerConfig& config, std::int64_t iteration)
{
    if (config.decay_horizon <= 0) {
        return config.learning_rate;
    }
    if (iteration >= config.decay_horizon) {
        return 0.0;
    }
    const double remaining = 1.0 - static_cast<double>(iteration) / static_cast<double>(config.decay_horizon);
    return config.learning_rate * remaining;
}

double gradient_norm(const ParameterList& params)
{
    double sq = 0.0;
    for (const Parameter* p : params) {
        sq += p->grad.squaredNorm();
    }
    return std::sqrt(sq);
}

double clip_gradients(const ParameterList& params, double threshold)
{
    if (!(threshold > 0.0)) {
        throw ConfigError("clip threshold must be positive");
    }
    const double norm = gradient_norm(params);
    if (norm > threshold) {
        const double scale = threshold / norm;
        for (Parameter* p : params) {
            p->grad *= scale;
        }
    }
    return norm;
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {}

void Optimizer::ensure_state(const ParameterList& params)
{
    if (velocity_.size() == params.size()) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (velocity_[i].rows() != params[i]->value.rows() || velocity_[i].cols() != params[i]->value.cols()) {
                throw DimensionError("optimizer state does not match parameter " + params[i]->name);
            }
        }
        return;
    }
    if (!velocity_.empty()) {
        throw DimensionError("optimizer used with a different parameter set");
    }
    for (const Parameter* p : params) {
        velocity_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        if (config_.kind == OptimizerKind::adadelta) {
            mean_sq_grad_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            mean_sq_update_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }
}

void Optimizer::step(const ParameterList& params)
{
    ensure_state(params);
    if (config_.clip_norm) {
        clip_gradients(params, *config_.clip_norm);
    }
    const double lr = current_learning_rate();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        if (config_.kind == OptimizerKind::sgd_momentum) {
            velocity_[i] = config_.momentum * velocity_[i] - lr * p.grad;
            p.value += velocity_[i];
        } else {
            const double rho = config_.rho;
            const double eps = config_.epsilon;
            Matrix& eg = mean_sq_grad_[i];
            Matrix& ex = mean_sq_update_[i];
            eg = rho * eg + (1.0 - rho) * p.grad.cwiseAbs2();
            Matrix update = -((ex.array() + eps).sqrt() / (eg.array() + eps).sqrt() * p.grad.array()).matrix();
            ex = rho * ex + (1.0 - rho) * update.cwiseAbs2();
            p.value += lr * update;
        }
    }
    ++iteration_;
}

} // namespace pianoscribe::nn
