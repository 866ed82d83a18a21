#include "batchmos/model.hpp"

#include <cmath>
#include <string>

#include "batchmos/errors.hpp"

namespace batchmos::model {

using nn::LayerParams;
using nn::Tensor;

std::string_view kind_name(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::FCN: return "fcn";
        case ModelKind::CNN: return "cnn";
        case ModelKind::ConcatFusion: return "concat";
        case ModelKind::BatchFusion: return "batch";
    }
    return "unknown";
}

ModelKind parse_kind(std::string_view name) {
    if (name == "fcn") return ModelKind::FCN;
    if (name == "cnn") return ModelKind::CNN;
    if (name == "concat") return ModelKind::ConcatFusion;
    if (name == "batch") return ModelKind::BatchFusion;
    throw ConfigError("unknown model kind '" + std::string(name) + "' (expected fcn, cnn, concat or batch)");
}

bool is_fusion(ModelKind kind) noexcept {
    return kind == ModelKind::ConcatFusion || kind == ModelKind::BatchFusion;
}

ModelSpec ModelSpec::make(ModelKind kind, std::size_t dim_a, std::optional<std::size_t> dim_b, std::uint64_t seed) {
    ModelSpec s;
    s.kind = kind;
    s.dim_a = dim_a;
    s.dim_b = dim_b;
    s.seed = seed;
    if (kind == ModelKind::BatchFusion) s.alpha = kDefaultAlpha;
    return s;
}

void ModelSpec::validate() const {
    const std::string kind_str(kind_name(kind));
    if (dim_a == 0) throw ConfigError(kind_str + ": dim_a must be positive");
    if (is_fusion(kind) != dim_b.has_value()) {
        throw ConfigError(kind_str + ": dim_b must be given iff the model is a fusion kind");
    }
    if (dim_b && *dim_b == 0) throw ConfigError(kind_str + ": dim_b must be positive");
    if ((kind == ModelKind::BatchFusion) != alpha.has_value()) {
        throw ConfigError(kind_str + ": alpha must be given iff the model is batch fusion");
    }
    if (alpha && !(*alpha >= 0.0 && *alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (hidden == 0) throw ConfigError("hidden width must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
    if (kind != ModelKind::FCN) {
        if (dim_a < kMinConvInput) {
            throw ConfigError(kind_str + ": dim_a " + std::to_string(dim_a) + " is too small for two conv+pool stages (minimum " +
                              std::to_string(kMinConvInput) + ")");
        }
        if (dim_b && *dim_b < kMinConvInput) {
            throw ConfigError(kind_str + ": dim_b " + std::to_string(*dim_b) + " is too small for two conv+pool stages (minimum " +
                              std::to_string(kMinConvInput) + ")");
        }
    }
}

std::size_t conv_stack_length(std::size_t dim) {
    if (dim < kMinConvInput) throw ConfigError("embedding length " + std::to_string(dim) + " is too small for the conv stack");
    std::size_t len = dim - kKernel + 1;
    len = (len - kPoolWindow) / kPoolStride + 1;
    len = len - kKernel + 1;
    return (len - kPoolWindow) / kPoolStride + 1;
}

namespace {

std::size_t fan_of(const LayerParams& p, bool in) {
    const auto& s = p.weights.shape();
    if (s.size() == 3) return in ? s[1] * s[2] : s[0] * s[2];
    return in ? s[1] : s[0];
}

}  // namespace

Model::Model(ModelSpec spec) : spec_(std::move(spec)), dropout_rng_(mix_seed(spec_.seed, 1)) {
    spec_.validate();
    auto add = [this](LayerParams p) {
        layers_.push_back(std::move(p));
        return static_cast<int>(layers_.size() - 1);
    };
    auto add_branch = [&](std::size_t dim, bool project) {
        BranchIndex idx;
        idx.conv1 = add(LayerParams::conv(kConv1Filters, 1, kKernel));
        idx.conv2 = add(LayerParams::conv(kConv2Filters, kConv1Filters, kKernel));
        if (project) idx.proj = add(LayerParams::dense(spec_.hidden, kConv2Filters * conv_stack_length(dim)));
        return idx;
    };

    std::size_t head_in = 0;
    switch (spec_.kind) {
        case ModelKind::FCN:
            head_in = spec_.dim_a;
            break;
        case ModelKind::CNN:
            branch_a_ = add_branch(spec_.dim_a, false);
            head_in = kConv2Filters * conv_stack_length(spec_.dim_a);
            break;
        case ModelKind::ConcatFusion:
        case ModelKind::BatchFusion:
            branch_a_ = add_branch(spec_.dim_a, true);
            branch_b_ = add_branch(*spec_.dim_b, true);
            head_in = 2 * spec_.hidden;
            break;
    }
    hidden_ = add(LayerParams::dense(spec_.hidden, head_in));
    out_ = add(LayerParams::dense(1, spec_.hidden));

    Rng init(mix_seed(spec_.seed, 0));
    for (LayerParams& p : layers_) p.glorot_init(fan_of(p, true), fan_of(p, false), init);
}

Model build(const ModelSpec& spec) { return Model(spec); }

std::size_t Model::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const LayerParams& p : layers_) n += p.parameter_count();
    return n;
}

void Model::zero_grad() noexcept {
    for (LayerParams& p : layers_) p.zero_grad();
}

void Model::check_batch(const Tensor& batch, std::size_t dim, const char* which) const {
    if (batch.rank() != 2) {
        throw DimensionError(std::string("forward: ") + which + " must be [n x dim], got " + nn::shape_string(batch.shape()));
    }
    if (batch.dim(1) != dim) throw DimensionError(std::string("forward(") + which + ")", "embedding", batch.dim(1), dim);
}

Tensor& Model::branch_top(BranchCache& cache) {
    if (spec_.kind == ModelKind::BatchFusion) return cache.gated;
    if (spec_.kind == ModelKind::ConcatFusion) return cache.proj;
    return cache.pool2;
}

const Tensor& Model::branch_forward(const BranchIndex& idx, const Tensor& batch, std::size_t dim, BranchCache& cache) {
    const std::size_t n = batch.dim(0);
    cache.input = Tensor::copy_of({n, 1, dim}, batch.data());
    cache.conv1 = nn::conv1d(cache.input, layers_[idx.conv1]);
    cache.pool1 = nn::maxpool1d(cache.conv1, kPoolWindow, kPoolStride);
    cache.conv2 = nn::conv1d(cache.pool1, layers_[idx.conv2]);
    cache.pool2 = nn::maxpool1d(cache.conv2, kPoolWindow, kPoolStride);
    cache.pool2.reshape({n, cache.pool2.size() / n});
    if (idx.proj < 0) return cache.pool2;

    cache.proj = nn::dense(cache.pool2, layers_[idx.proj]);
    if (spec_.kind != ModelKind::BatchFusion) return cache.proj;

    cache.gated = gate_enabled_ ? nn::gate(cache.proj) : Tensor::copy_of(cache.proj.shape(), cache.proj.data());
    cache.soft = nn::softmax(cache.gated);
    return cache.gated;
}

void Model::branch_backward(const BranchIndex& idx, std::size_t dim, BranchCache& cache) {
    const std::size_t n = cache.input.dim(0);
    if (spec_.kind == ModelKind::BatchFusion) {
        nn::softmax_backward(cache.gated, cache.soft);
        if (gate_enabled_) {
            nn::gate_backward(cache.proj, cache.gated);
        } else {
            for (std::size_t i = 0; i < cache.proj.size(); ++i) cache.proj.grad()[i] += cache.gated.grad()[i];
        }
    }
    if (idx.proj >= 0) nn::dense_backward(cache.pool2, layers_[idx.proj], cache.proj);
    cache.pool2.reshape({n, kConv2Filters, conv_stack_length(dim)});
    nn::maxpool1d_backward(cache.conv2, cache.pool2, kPoolWindow, kPoolStride);
    nn::conv1d_backward(cache.pool1, layers_[idx.conv2], cache.conv2);
    nn::maxpool1d_backward(cache.conv1, cache.pool1, kPoolWindow, kPoolStride);
    nn::conv1d_backward(cache.input, layers_[idx.conv1], cache.conv1);
}

ForwardOutput Model::forward(const Tensor& batch_a, const Tensor* batch_b, bool training) {
    check_batch(batch_a, spec_.dim_a, "batch_a");
    const std::size_t n = batch_a.dim(0);
    if (is_fusion(spec_.kind)) {
        if (batch_b == nullptr) throw DimensionError("forward: fusion model requires batch_b");
        check_batch(*batch_b, *spec_.dim_b, "batch_b");
        if (batch_b->dim(0) != n) throw DimensionError("forward", "batch", batch_b->dim(0), n);
    } else if (batch_b != nullptr) {
        throw DimensionError("forward: single-embedding model given batch_b");
    }

    ForwardOutput result;
    switch (spec_.kind) {
        case ModelKind::FCN:
            head_.input = Tensor::copy_of(batch_a.shape(), batch_a.data());
            break;
        case ModelKind::CNN: {
            const Tensor& top = branch_forward(branch_a_, batch_a, spec_.dim_a, cache_a_);
            head_.input = Tensor::copy_of(top.shape(), top.data());
            break;
        }
        case ModelKind::ConcatFusion:
        case ModelKind::BatchFusion: {
            branch_forward(branch_a_, batch_a, spec_.dim_a, cache_a_);
            branch_forward(branch_b_, *batch_b, *spec_.dim_b, cache_b_);
            head_.input = nn::concat_last(branch_top(cache_a_), branch_top(cache_b_));
            if (spec_.kind == ModelKind::BatchFusion) {
                result.bd_value = nn::mean_bhattacharyya_distance(cache_a_.soft, cache_b_.soft);
            }
            break;
        }
    }

    head_.hidden = nn::dense(head_.input, layers_[hidden_]);
    head_.act = nn::relu(head_.hidden);
    head_.dropped = nn::dropout(head_.act, spec_.dropout_rate, training, dropout_rng_, head_.mask);
    head_.out = nn::dense(head_.dropped, layers_[out_]);
    result.predictions = head_.out.values();
    cached_batch_ = n;
    return result;
}

nn::LossBreakdown Model::loss(const ForwardOutput& output, std::span<const double> targets) const {
    if (targets.size() != output.predictions.size()) {
        throw DimensionError("loss", "batch", targets.size(), output.predictions.size());
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double d = output.predictions[i] - targets[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(targets.size());
    const double bd = output.bd_value.value_or(0.0);
    return nn::LossBreakdown::make(mse, bd, spec_.alpha.value_or(0.0));
}

void Model::backward(std::span<const double> targets) {
    if (cached_batch_ == 0) throw Error("backward called before forward");
    if (targets.size() != cached_batch_) throw DimensionError("backward", "batch", targets.size(), cached_batch_);

    nn::mse_loss_backward(head_.out, Tensor({cached_batch_, 1}, std::vector<double>(targets.begin(), targets.end())));
    nn::dense_backward(head_.dropped, layers_[out_], head_.out);
    nn::dropout_backward(head_.act, head_.dropped, head_.mask);
    nn::relu_backward(head_.hidden, head_.act);
    nn::dense_backward(head_.input, layers_[hidden_], head_.hidden);

    switch (spec_.kind) {
        case ModelKind::FCN:
            break;
        case ModelKind::CNN: {
            Tensor& top = branch_top(cache_a_);
            std::copy(head_.input.grad().begin(), head_.input.grad().end(), top.grad().begin());
            branch_backward(branch_a_, spec_.dim_a, cache_a_);
            break;
        }
        case ModelKind::ConcatFusion:
        case ModelKind::BatchFusion: {
            nn::concat_last_backward(branch_top(cache_a_), branch_top(cache_b_), head_.input);
            const double alpha = spec_.alpha.value_or(0.0);
            if (spec_.kind == ModelKind::BatchFusion && alpha != 0.0) {
                nn::mean_bhattacharyya_backward(cache_a_.soft, cache_b_.soft, alpha);
            }
            branch_backward(branch_a_, spec_.dim_a, cache_a_);
            branch_backward(branch_b_, *spec_.dim_b, cache_b_);
            break;
        }
    }
    cached_batch_ = 0;
}

}  // namespace batchmos::model
