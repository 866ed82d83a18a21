#pragma once

#include <functional>
#include <span>
#include <vector>

namespace batchmos::nn {

/// A block of values to perturb and the analytic gradient claimed for it.
struct GradientProbe {
    std::span<double> values;
    std::span<const double> analytic;
};

/// Central-difference check of `objective` around the current values of every
/// probe. Returns max |a - n| / max(1, |a| + |n|) over all probed entries.
/// Values are restored before returning. `objective` must not touch gradients.
double grad_check(const std::function<double()>& objective, std::span<const GradientProbe> probes,
                  double h = 1e-5);

}  // namespace batchmos::nn
