#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "batchmos/random.hpp"
#include "batchmos/tensor.hpp"

namespace batchmos::nn {

/// Trainable parameters of one layer together with their Adam state.
struct LayerParams {
    Tensor weights;
    Tensor bias;
    // Adam moment estimates, same length as the parameter they track.
    std::vector<double> adam_m_weights;
    std::vector<double> adam_v_weights;
    std::vector<double> adam_m_bias;
    std::vector<double> adam_v_bias;
    std::uint64_t step_count = 0;

    LayerParams() = default;
    LayerParams(Shape weight_shape, std::size_t bias_size);

    /// Weights [out x in], zero-initialized.
    static LayerParams dense(std::size_t d_out, std::size_t d_in);
    /// Weights [c_out x c_in x kernel], zero-initialized.
    static LayerParams conv(std::size_t c_out, std::size_t c_in, std::size_t kernel);

    std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }
    void zero_grad() noexcept;

    /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero bias.
    void glorot_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);
};

// All layers treat leading axes as batch axes. A backward call reads
// `output.grad()` and accumulates into the input and parameter gradients.

/// Valid 1-D convolution, stride 1. input [..., c_in, length] -> [..., c_out, length - kernel + 1].
Tensor conv1d(const Tensor& input, const LayerParams& params);
void conv1d_backward(Tensor& input, LayerParams& params, const Tensor& output);

/// Max over windows of the last axis. Gradient goes to the first maximal element.
Tensor maxpool1d(const Tensor& input, std::size_t window = 2, std::size_t stride = 2);
void maxpool1d_backward(Tensor& input, const Tensor& output, std::size_t window = 2, std::size_t stride = 2);

/// input [..., d_in] -> [..., d_out].
Tensor dense(const Tensor& input, const LayerParams& params);
void dense_backward(Tensor& input, LayerParams& params, const Tensor& output);

Tensor relu(const Tensor& input);
void relu_backward(Tensor& input, const Tensor& output);

/// sigmoid(x) * x, elementwise.
Tensor gate(const Tensor& input);
void gate_backward(Tensor& input, const Tensor& output);

double sigmoid(double x) noexcept;

/// Numerically stable softmax over the last axis.
Tensor softmax(const Tensor& input);
void softmax_backward(Tensor& input, const Tensor& output);

/// Per-element multipliers drawn by a training-mode dropout call.
struct DropoutMask {
    std::vector<double> scale;  // empty means identity
};

/// Inverted dropout. In eval mode, or with rate 0, the mask is the identity
/// and the generator is not advanced.
Tensor dropout(const Tensor& input, double rate, bool training, Rng& rng, DropoutMask& mask);
Tensor apply_dropout_mask(const Tensor& input, const DropoutMask& mask);
void dropout_backward(Tensor& input, const Tensor& output, const DropoutMask& mask);

/// Concatenate two [n x d_a], [n x d_b] tensors along the last axis.
Tensor concat_last(const Tensor& a, const Tensor& b);
void concat_last_backward(Tensor& a, Tensor& b, const Tensor& output);

}  // namespace batchmos::nn
