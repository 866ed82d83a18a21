#include "batchmos/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "batchmos/errors.hpp"

namespace batchmos::nn {

double grad_check(const std::function<double()>& objective, std::span<const GradientProbe> probes, double h) {
    double worst = 0.0;
    for (const GradientProbe& probe : probes) {
        if (probe.values.size() != probe.analytic.size()) {
            throw DimensionError("grad_check", "probe", probe.analytic.size(), probe.values.size());
        }
        // Snapshot, since the objective may be backed by the same storage.
        const std::vector<double> analytic(probe.analytic.begin(), probe.analytic.end());
        for (std::size_t i = 0; i < probe.values.size(); ++i) {
            const double saved = probe.values[i];
            probe.values[i] = saved + h;
            const double plus = objective();
            probe.values[i] = saved - h;
            const double minus = objective();
            probe.values[i] = saved;
            const double numeric = (plus - minus) / (2.0 * h);
            const double err =
                std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace batchmos::nn
