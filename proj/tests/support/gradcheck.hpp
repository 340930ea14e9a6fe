#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pianoscribe/numerics/tensor.hpp"

namespace pianoscribe::testing {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst;
};

/// Compares accumulated analytic gradients against central differences.
/// `loss` must return the loss at the current parameter values; `loss_and_grad`
/// must zero and then fill the gradients. Large tensors are sampled with a
/// fixed stride so every parameter still gets probed.
inline GradCheckResult check_gradients(const nn::ParameterList& params,
                                       const std::function<double()>& loss,
                                       const std::function<void()>& loss_and_grad,
                                       double eps = 1e-5, nn::Index max_probes_per_tensor = 60)
{
    loss_and_grad();
    // Snapshot first: `loss` may reuse the gradient buffers.
    std::vector<nn::Matrix> grads;
    for (nn::Parameter* p : params) grads.push_back(p->grad);
    GradCheckResult result;
    for (std::size_t i = 0; i < params.size(); ++i) {
        nn::Parameter* p = params[i];
        const nn::Matrix& analytic = grads[i];
        const nn::Index n = p->value.size();
        const nn::Index stride = std::max<nn::Index>(1, n / max_probes_per_tensor);
        for (nn::Index k = 0; k < n; k += stride) {
            double& v = p->value.data()[k];
            const double saved = v;
            v = saved + eps;
            const double up = loss();
            v = saved - eps;
            const double down = loss();
            v = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic.data()[k];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst = p->name + "[" + std::to_string(k) + "] analytic=" + std::to_string(a) +
                               " numeric=" + std::to_string(numeric);
            }
        }
    }
    return result;
}

} // namespace pianoscribe::testing
