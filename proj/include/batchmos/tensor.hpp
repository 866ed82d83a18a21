#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace batchmos::nn {

using Shape = std::vector<std::size_t>;

/// 64-byte aligned allocation. Vectorized kernels peel a different number of
/// leading elements depending on the buffer address, which changes the
/// summation order; a fixed alignment keeps results bitwise reproducible.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlignment{64};

    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

    template <class U>
    friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
        return true;
    }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles with a gradient buffer of the same length.
///
/// Layer backward passes accumulate into `grad()`; a freshly constructed
/// tensor has an all-zero gradient.
class Tensor {
public:
    /// Scalar zero.
    Tensor();
    /// Zero-filled tensor. Every extent must be positive.
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor copy_of(Shape shape, std::span<const double> values);
    static Tensor vector(std::initializer_list<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> grad() noexcept { return grad_; }
    std::span<const double> grad() const noexcept { return grad_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double> values() const { return {data_.begin(), data_.end()}; }

    void zero_grad() noexcept;
    void fill(double value) noexcept;

    /// Same data and gradient, new shape of equal size.
    void reshape(Shape shape);

    bool all_finite() const noexcept;

private:
    Shape shape_;
    Storage data_;
    Storage grad_;
};

}  // namespace batchmos::nn
