#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "covq/nn/layers.hpp"

namespace covq {
namespace nn {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    int64_t worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;

    bool within(double tol) const { return max_rel_error < tol; }
};

// Compares analytic gradients (already accumulated in each Param's grad by a
// caller-run backward pass) against central finite differences of `loss_fn`.
// loss_fn must recompute the forward loss from the current parameter values;
// it may scribble on gradients or batch-norm caches but must not change what
// the loss function computes. Double precision is assumed: h = 1e-5 drowns
// in float rounding.
template <class T>
GradCheckReport gradient_check(const std::function<double()>& loss_fn,
                               const std::vector<std::pair<std::string, Param<T>*>>& params,
                               double h = 1e-5) {
    GradCheckReport report;
    // Snapshot analytic grads first; probes may overwrite them.
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& [name, p] : params) {
        std::vector<double> g(p->grad.data.begin(), p->grad.data.end());
        analytic.push_back(std::move(g));
    }
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Param<T>* p = params[pi].second;
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            const T saved = p->value[i];
            p->value[i] = static_cast<T>(static_cast<double>(saved) + h);
            const double up = loss_fn();
            p->value[i] = static_cast<T>(static_cast<double>(saved) - h);
            const double down = loss_fn();
            p->value[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[pi][static_cast<size_t>(i)];
            const double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
            const double rel = std::abs(a - numeric) / scale;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = params[pi].first;
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

template <class T>
void require_gradients(const std::function<double()>& loss_fn,
                       const std::vector<std::pair<std::string, Param<T>*>>& params,
                       double tolerance, double h = 1e-5) {
    const GradCheckReport r = gradient_check(loss_fn, params, h);
    if (!r.within(tolerance)) {
        throw ToleranceExceededError(
            "gradient check failed for '" + r.worst_param + "' [" +
            std::to_string(r.worst_index) + "]: analytic " + std::to_string(r.analytic) +
            " vs numeric " + std::to_string(r.numeric) + " (rel err " +
            std::to_string(r.max_rel_error) + ")");
    }
}

}  // namespace nn
}  // namespace covq
