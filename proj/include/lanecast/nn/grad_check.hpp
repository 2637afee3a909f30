#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lanecast/core/rng.hpp"
#include "lanecast/nn/tensor.hpp"

namespace lanecast::nn {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t coords_checked = 0;
    // worst offender, for diagnostics
    std::size_t worst_tensor = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Compares analytic gradients against central differences in double
// precision.  `loss_fn` must be a pure function of the current parameter
// values (freeze any dropout masks by reseeding inside the closure).
//
// The error for a coordinate is |analytic - numeric| / max(|numeric|, 1e-4).
// The floor absorbs finite-difference truncation noise on coordinates whose
// true gradient is tiny; a gradient that is wrong by a factor still shows
// up as an error of order one.
inline GradCheckReport grad_check(const std::function<double()>& loss_fn,
                                  const std::vector<Tensor<double>*>& params,
                                  const std::vector<Tensor<double>>& analytic, Rng& rng,
                                  int coords_per_tensor = 4, double eps = 1e-4) {
    if (params.size() != analytic.size())
        throw ShapeError("grad_check: parameter/gradient count mismatch");
    GradCheckReport report;
    for (std::size_t ti = 0; ti < params.size(); ++ti) {
        Tensor<double>& p = *params[ti];
        const auto n = static_cast<std::uint64_t>(p.numel());
        const int samples = static_cast<int>(std::min<std::uint64_t>(
            n, static_cast<std::uint64_t>(coords_per_tensor)));
        for (int s = 0; s < samples; ++s) {
            const std::size_t idx = static_cast<std::size_t>(rng.below(n));
            const double saved = p.data[idx];
            p.data[idx] = saved + eps;
            const double f_plus = loss_fn();
            p.data[idx] = saved - eps;
            const double f_minus = loss_fn();
            p.data[idx] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * eps);
            const double a = analytic[ti].data[idx];
            const double err = std::abs(a - numeric) / std::max(std::abs(numeric), 1e-4);
            ++report.coords_checked;
            if (err > report.max_rel_err) {
                report.max_rel_err = err;
                report.worst_tensor = ti;
                report.worst_index = idx;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace lanecast::nn
