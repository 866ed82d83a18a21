#include "batchmos/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "batchmos/errors.hpp"

namespace batchmos::nn {

std::size_t shape_size(const Shape& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += " x ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace {

void check_extents(const Shape& shape) {
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] == 0) {
            throw DimensionError("tensor: axis " + std::to_string(i) + " of shape " + shape_string(shape) +
                                 " is zero");
        }
    }
}

}  // namespace

Tensor::Tensor() : data_(1, 0.0), grad_(1, 0.0) {}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    check_extents(shape_);
    data_.assign(shape_size(shape_), 0.0);
    grad_.assign(data_.size(), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(values.begin(), values.end()) {
    check_extents(shape_);
    if (data_.size() != shape_size(shape_)) {
        throw DimensionError("tensor", "data", data_.size(), shape_size(shape_));
    }
    grad_.assign(data_.size(), 0.0);
}

Tensor Tensor::copy_of(Shape shape, std::span<const double> values) {
    check_extents(shape);
    if (values.size() != shape_size(shape)) throw DimensionError("tensor", "data", values.size(), shape_size(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.assign(values.begin(), values.end());
    t.grad_.assign(values.size(), 0.0);
    return t;
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
}

void Tensor::zero_grad() noexcept { std::fill(grad_.begin(), grad_.end(), 0.0); }

void Tensor::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

void Tensor::reshape(Shape shape) {
    check_extents(shape);
    if (shape_size(shape) != data_.size()) {
        throw DimensionError("reshape", "size", shape_size(shape), data_.size());
    }
    shape_ = std::move(shape);
}

bool Tensor::all_finite() const noexcept {
    auto finite = [](double v) { return std::isfinite(v); };
    return std::all_of(data_.begin(), data_.end(), finite) && std::all_of(grad_.begin(), grad_.end(), finite);
}

}  // namespace batchmos::nn
