#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "batchmos/layers.hpp"
#include "batchmos/losses.hpp"
#include "batchmos/random.hpp"
#include "batchmos/tensor.hpp"

namespace batchmos::model {

enum class ModelKind : std::uint32_t { FCN = 0, CNN = 1, ConcatFusion = 2, BatchFusion = 3 };

/// "fcn", "cnn", "concat", "batch".
std::string_view kind_name(ModelKind kind) noexcept;
ModelKind parse_kind(std::string_view name);
bool is_fusion(ModelKind kind) noexcept;

inline constexpr std::size_t kConv1Filters = 64;
inline constexpr std::size_t kConv2Filters = 128;
inline constexpr std::size_t kKernel = 3;
inline constexpr std::size_t kPoolWindow = 2;
inline constexpr std::size_t kPoolStride = 2;
/// Smallest embedding length that survives two conv + pool stages.
inline constexpr std::size_t kMinConvInput = 10;
inline constexpr double kDefaultAlpha = 0.3;
inline constexpr double kDefaultDropout = 0.3;

/// Declarative architecture description.
struct ModelSpec {
    ModelKind kind = ModelKind::CNN;
    std::size_t dim_a = 0;
    std::optional<std::size_t> dim_b;  // fusion kinds only
    std::size_t hidden = 128;
    std::optional<double> alpha;  // BatchFusion only
    double dropout_rate = kDefaultDropout;
    std::uint64_t seed = 0;

    /// Spec with the defaults filled in for `kind`.
    static ModelSpec make(ModelKind kind, std::size_t dim_a, std::optional<std::size_t> dim_b = std::nullopt,
                          std::uint64_t seed = 0);

    /// Throws ConfigError when the invariants do not hold.
    void validate() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Length of the flattened conv stack output per filter, e.g. 512 -> 126.
std::size_t conv_stack_length(std::size_t dim);

struct ForwardOutput {
    std::vector<double> predictions;
    std::optional<double> bd_value;  // BatchFusion only: batch mean of per-item distances
};

/// A regression head over one or two pooled embeddings.
///
/// Layer order (also the checkpoint order):
///   FCN          hidden, out
///   CNN          a.conv1, a.conv2, hidden, out
///   Concat/Batch a.conv1, a.conv2, a.proj, b.conv1, b.conv2, b.proj, hidden, out
///
/// `forward` caches the activations that `backward` consumes, so one model
/// instance must not be driven from several threads at once.
class Model {
public:
    explicit Model(ModelSpec spec);

    const ModelSpec& spec() const noexcept { return spec_; }

    /// batch_a [n x dim_a]; batch_b [n x dim_b] iff the model is a fusion kind.
    ForwardOutput forward(const nn::Tensor& batch_a, const nn::Tensor* batch_b, bool training);

    /// mse + alpha * bd. Alpha is zero for every kind but BatchFusion.
    nn::LossBreakdown loss(const ForwardOutput& output, std::span<const double> targets) const;

    /// Accumulates d(total loss)/d(parameters) for the most recent forward call.
    void backward(std::span<const double> targets);

    void zero_grad() noexcept;

    std::vector<nn::LayerParams>& layers() noexcept { return layers_; }
    const std::vector<nn::LayerParams>& layers() const noexcept { return layers_; }
    std::size_t parameter_count() const noexcept;

    /// Ablation switch: with the gate off, BatchFusion passes projections
    /// through unchanged. Not persisted in checkpoints.
    void set_gate_enabled(bool enabled) noexcept { gate_enabled_ = enabled; }

    /// Re-seed the dropout generator.
    void reseed_dropout(std::uint64_t seed) { dropout_rng_ = Rng(seed); }

private:
    struct BranchIndex {
        int conv1 = -1;
        int conv2 = -1;
        int proj = -1;
    };

    struct BranchCache {
        nn::Tensor input;
        nn::Tensor conv1, pool1, conv2, pool2;  // pool2 is reshaped to [n x flat] after pooling
        nn::Tensor proj, gated, soft;
    };

    struct HeadCache {
        nn::Tensor input;
        nn::Tensor hidden, act, dropped, out;
        nn::DropoutMask mask;
    };

    const nn::Tensor& branch_forward(const BranchIndex& idx, const nn::Tensor& batch, std::size_t dim, BranchCache& cache);
    void branch_backward(const BranchIndex& idx, std::size_t dim, BranchCache& cache);
    nn::Tensor& branch_top(BranchCache& cache);
    void check_batch(const nn::Tensor& batch, std::size_t dim, const char* which) const;

    ModelSpec spec_;
    std::vector<nn::LayerParams> layers_;
    BranchIndex branch_a_;
    BranchIndex branch_b_;
    int hidden_ = -1;
    int out_ = -1;
    bool gate_enabled_ = true;
    Rng dropout_rng_;

    BranchCache cache_a_;
    BranchCache cache_b_;
    HeadCache head_;
    std::size_t cached_batch_ = 0;
};

/// Builds and initializes a model from `spec` (Glorot weights from spec.seed).
Model build(const ModelSpec& spec);

}  // namespace batchmos::model
