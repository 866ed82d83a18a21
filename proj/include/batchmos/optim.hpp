#pragma once

#include "batchmos/layers.hpp"

namespace batchmos::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update of weights and bias from their current
/// gradients. Increments `params.step_count`.
void adam_step(LayerParams& params, const AdamConfig& config);

}  // namespace batchmos::nn
