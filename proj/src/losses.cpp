#include "batchmos/losses.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "batchmos/errors.hpp"

namespace batchmos::nn {

LossBreakdown LossBreakdown::make(double mse, double bd, double alpha) noexcept {
    return LossBreakdown{mse, bd, alpha, mse + alpha * bd};
}

bool LossBreakdown::identity_holds() const noexcept { return total - (mse + alpha * bd) == 0.0; }

double mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.size() != target.size()) throw DimensionError("mse_loss", "element", target.size(), pred.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pred.size());
}

void mse_loss_backward(Tensor& pred, const Tensor& target, double upstream) {
    if (pred.size() != target.size()) throw DimensionError("mse_loss_backward", "element", target.size(), pred.size());
    const double scale = 2.0 * upstream / static_cast<double>(pred.size());
    auto g = pred.grad();
    for (std::size_t i = 0; i < pred.size(); ++i) g[i] += scale * (pred[i] - target[i]);
}

namespace {

void check_distribution_pair(const char* op, std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw DimensionError(op, "distribution", q.size(), p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) {
            throw DomainError(std::string(op) + ": negative probability at index " + std::to_string(i));
        }
    }
}

double coefficient(std::span<const double> p, std::span<const double> q) {
    double bc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) bc += std::sqrt(p[i] * q[i]);
    return bc;
}

double distance_from_coefficient(double bc) { return -std::log(std::max(kBhattacharyyaEpsilon, bc)); }

void accumulate_row_gradient(std::span<const double> p, std::span<const double> q, std::span<double> gp,
                             std::span<double> gq, double upstream) {
    const double bc = coefficient(p, q);
    if (bc < kBhattacharyyaEpsilon) return;
    const double scale = -0.5 * upstream / bc;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] >= kBhattacharyyaEpsilon) gp[i] += scale * std::sqrt(q[i] / p[i]);
        if (q[i] >= kBhattacharyyaEpsilon) gq[i] += scale * std::sqrt(p[i] / q[i]);
    }
}

std::size_t row_width(const char* op, const Tensor& p, const Tensor& q) {
    if (p.shape() != q.shape()) {
        throw DimensionError(std::string(op) + ": shapes differ, " + shape_string(p.shape()) + " vs " +
                             shape_string(q.shape()));
    }
    return p.dim(p.rank() - 1);
}

}  // namespace

double bhattacharyya_distance(const Tensor& p, const Tensor& q) {
    check_distribution_pair("bhattacharyya_distance", p.data(), q.data());
    return distance_from_coefficient(coefficient(p.data(), q.data()));
}

void bhattacharyya_backward(Tensor& p, Tensor& q, double upstream) {
    check_distribution_pair("bhattacharyya_backward", p.data(), q.data());
    accumulate_row_gradient(p.data(), q.data(), p.grad(), q.grad(), upstream);
}

std::vector<double> bhattacharyya_rows(const Tensor& p, const Tensor& q) {
    const std::size_t d = row_width("bhattacharyya_rows", p, q);
    check_distribution_pair("bhattacharyya_rows", p.data(), q.data());
    const std::size_t rows = p.size() / d;
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        out[r] = distance_from_coefficient(coefficient(p.data().subspan(r * d, d), q.data().subspan(r * d, d)));
    }
    return out;
}

double mean_bhattacharyya_distance(const Tensor& p, const Tensor& q) {
    const auto rows = bhattacharyya_rows(p, q);
    double sum = 0.0;
    for (double v : rows) sum += v;
    return sum / static_cast<double>(rows.size());
}

void mean_bhattacharyya_backward(Tensor& p, Tensor& q, double upstream) {
    const std::size_t d = row_width("mean_bhattacharyya_backward", p, q);
    check_distribution_pair("mean_bhattacharyya_backward", p.data(), q.data());
    const std::size_t rows = p.size() / d;
    const double per_row = upstream / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        accumulate_row_gradient(p.data().subspan(r * d, d), q.data().subspan(r * d, d), p.grad().subspan(r * d, d),
                                q.grad().subspan(r * d, d), per_row);
    }
}

}  // namespace batchmos::nn
