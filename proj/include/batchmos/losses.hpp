#pragma once

#include <vector>

#include "batchmos/tensor.hpp"

namespace batchmos::nn {

/// Lower clamp on the Bhattacharyya coefficient. Disjoint supports give
/// -log(kBhattacharyyaEpsilon) instead of infinity.
inline constexpr double kBhattacharyyaEpsilon = 1e-12;

/// Joint objective: total = mse + alpha * bd.
struct LossBreakdown {
    double mse = 0.0;
    double bd = 0.0;
    double alpha = 0.0;
    double total = 0.0;

    static LossBreakdown make(double mse, double bd, double alpha) noexcept;
    bool identity_holds() const noexcept;
};

/// Mean squared error over all elements.
double mse_loss(const Tensor& pred, const Tensor& target);
/// Accumulates upstream * d(mse)/d(pred) into pred.grad().
void mse_loss_backward(Tensor& pred, const Tensor& target, double upstream = 1.0);

/// -log(max(eps, sum_i sqrt(p_i q_i))) for two rank-1 distributions.
/// Negative entries raise DomainError; normalization is the caller's contract.
double bhattacharyya_distance(const Tensor& p, const Tensor& q);
/// Accumulates upstream * dD/dp and dD/dq. Entries below the epsilon, and
/// the whole gradient when the coefficient is clamped, contribute zero.
void bhattacharyya_backward(Tensor& p, Tensor& q, double upstream = 1.0);

/// Per-row distances of two [n x d] distribution batches.
std::vector<double> bhattacharyya_rows(const Tensor& p, const Tensor& q);
/// Mean over rows of the per-row distances.
double mean_bhattacharyya_distance(const Tensor& p, const Tensor& q);
void mean_bhattacharyya_backward(Tensor& p, Tensor& q, double upstream = 1.0);

}  // namespace batchmos::nn
