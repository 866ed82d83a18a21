#include "batchmos/optim.hpp"

#include <cmath>

namespace batchmos::nn {

namespace {

void update(Tensor& param, std::vector<double>& mm, std::vector<double>& vv, const AdamConfig& c, double correction1, double correction2) {
    auto w = param.data();
    auto g = param.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
        mm[i] = c.beta1 * mm[i] + (1.0 - c.beta1) * g[i];
        vv[i] = c.beta2 * vv[i] + (1.0 - c.beta2) * g[i] * g[i];
        const double m_hat = mm[i] / correction1;
        const double v_hat = vv[i] / correction2;
        w[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

}  // namespace

void adam_step(LayerParams& params, const AdamConfig& config) {
    ++params.step_count;
    const double t = static_cast<double>(params.step_count);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    update(params.weights, params.adam_m_weights, params.adam_v_weights, config, correction1, correction2);
    update(params.bias, params.adam_m_bias, params.adam_v_bias, config, correction1, correction2);
}

}  // namespace batchmos::nn
