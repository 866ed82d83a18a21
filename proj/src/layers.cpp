#include "batchmos/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "batchmos/errors.hpp"

namespace batchmos::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

void require_rank(const char* op, const Tensor& t, std::size_t min_rank) {
    if (t.rank() < min_rank) {
        throw DimensionError(std::string(op) + ": expected rank >= " + std::to_string(min_rank) + ", got shape " +
                             shape_string(t.shape()));
    }
}

void require_same_size(const char* op, const Tensor& input, const Tensor& output) {
    if (input.size() != output.size()) throw DimensionError(op, "output", output.size(), input.size());
}

Shape replace_tail(const Shape& shape, std::size_t keep, std::initializer_list<std::size_t> tail) {
    Shape out(shape.begin(), shape.begin() + static_cast<std::ptrdiff_t>(keep));
    out.insert(out.end(), tail);
    return out;
}

// col(ci * kernel + k, i) = x(ci, i + k)
void im2col(const double* x, std::size_t c_in, std::size_t length, std::size_t kernel, RowMat& col) {
    const std::size_t out_len = length - kernel + 1;
    for (std::size_t ci = 0; ci < c_in; ++ci) {
        for (std::size_t k = 0; k < kernel; ++k) {
            const double* src = x + ci * length + k;
            double* dst = col.data() + (ci * kernel + k) * out_len;
            std::copy(src, src + out_len, dst);
        }
    }
}

void col2im_add(const RowMat& col, std::size_t c_in, std::size_t length, std::size_t kernel, double* gx) {
    const std::size_t out_len = length - kernel + 1;
    for (std::size_t ci = 0; ci < c_in; ++ci) {
        for (std::size_t k = 0; k < kernel; ++k) {
            const double* src = col.data() + (ci * kernel + k) * out_len;
            double* dst = gx + ci * length + k;
            for (std::size_t i = 0; i < out_len; ++i) dst[i] += src[i];
        }
    }
}

struct ConvGeometry {
    std::size_t c_out, c_in, kernel, length, out_len, batch;
};

ConvGeometry conv_geometry(const Tensor& input, const LayerParams& params) {
    if (params.weights.rank() != 3) {
        throw DimensionError("conv1d: weights must be [c_out x c_in x kernel], got " +
                             shape_string(params.weights.shape()));
    }
    require_rank("conv1d", input, 2);
    ConvGeometry g{};
    g.c_out = params.weights.dim(0);
    g.c_in = params.weights.dim(1);
    g.kernel = params.weights.dim(2);
    if (params.bias.size() != g.c_out) throw DimensionError("conv1d", "bias", params.bias.size(), g.c_out);
    const std::size_t r = input.rank();
    if (input.dim(r - 2) != g.c_in) throw DimensionError("conv1d", "channel", input.dim(r - 2), g.c_in);
    g.length = input.dim(r - 1);
    if (g.length < g.kernel) {
        throw DimensionError("conv1d: length axis " + std::to_string(g.length) + " shorter than kernel " +
                             std::to_string(g.kernel));
    }
    g.out_len = g.length - g.kernel + 1;
    g.batch = input.size() / (g.c_in * g.length);
    return g;
}

}  // namespace

LayerParams::LayerParams(Shape weight_shape, std::size_t bias_size)
    : weights(weight_shape),
      bias({bias_size}),
      adam_m_weights(weights.size(), 0.0),
      adam_v_weights(weights.size(), 0.0),
      adam_m_bias(bias_size, 0.0),
      adam_v_bias(bias_size, 0.0) {}

LayerParams LayerParams::dense(std::size_t d_out, std::size_t d_in) { return LayerParams({d_out, d_in}, d_out); }

LayerParams LayerParams::conv(std::size_t c_out, std::size_t c_in, std::size_t kernel) {
    return LayerParams({c_out, c_in, kernel}, c_out);
}

void LayerParams::zero_grad() noexcept {
    weights.zero_grad();
    bias.zero_grad();
}

void LayerParams::glorot_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& w : weights.data()) w = rng.uniform(-limit, limit);
    bias.fill(0.0);
}

Tensor conv1d(const Tensor& input, const LayerParams& params) {
    const ConvGeometry g = conv_geometry(input, params);
    Tensor output(replace_tail(input.shape(), input.rank() - 2, {g.c_out, g.out_len}));

    ConstMatMap w(params.weights.data().data(), static_cast<Eigen::Index>(g.c_out),
                  static_cast<Eigen::Index>(g.c_in * g.kernel));
    ConstVecMap b(params.bias.data().data(), static_cast<Eigen::Index>(g.c_out));
    RowMat col(g.c_in * g.kernel, g.out_len);
    for (std::size_t s = 0; s < g.batch; ++s) {
        im2col(input.data().data() + s * g.c_in * g.length, g.c_in, g.length, g.kernel, col);
        MatMap out(output.data().data() + s * g.c_out * g.out_len, static_cast<Eigen::Index>(g.c_out),
                   static_cast<Eigen::Index>(g.out_len));
        out.noalias() = w * col;
        out.colwise() += b;
    }
    return output;
}

void conv1d_backward(Tensor& input, LayerParams& params, const Tensor& output) {
    const ConvGeometry g = conv_geometry(input, params);
    if (output.size() != g.batch * g.c_out * g.out_len) {
        throw DimensionError("conv1d_backward", "output", output.size(), g.batch * g.c_out * g.out_len);
    }
    ConstMatMap w(params.weights.data().data(), static_cast<Eigen::Index>(g.c_out),
                  static_cast<Eigen::Index>(g.c_in * g.kernel));
    MatMap gw(params.weights.grad().data(), static_cast<Eigen::Index>(g.c_out),
              static_cast<Eigen::Index>(g.c_in * g.kernel));
    VecMap gb(params.bias.grad().data(), static_cast<Eigen::Index>(g.c_out));
    RowMat col(g.c_in * g.kernel, g.out_len);
    RowMat gcol(g.c_in * g.kernel, g.out_len);
    for (std::size_t s = 0; s < g.batch; ++s) {
        const double* x = input.data().data() + s * g.c_in * g.length;
        im2col(x, g.c_in, g.length, g.kernel, col);
        ConstMatMap gout(output.grad().data() + s * g.c_out * g.out_len, static_cast<Eigen::Index>(g.c_out),
                         static_cast<Eigen::Index>(g.out_len));
        gw.noalias() += gout * col.transpose();
        gb += gout.rowwise().sum();
        gcol.noalias() = w.transpose() * gout;
        col2im_add(gcol, g.c_in, g.length, g.kernel, input.grad().data() + s * g.c_in * g.length);
    }
}

namespace {

std::size_t pooled_length(const char* op, std::size_t length, std::size_t window, std::size_t stride) {
    if (window == 0 || stride == 0) throw ConfigError(std::string(op) + ": window and stride must be positive");
    if (window > length) {
        throw DimensionError(std::string(op) + ": window " + std::to_string(window) + " exceeds length axis " +
                             std::to_string(length));
    }
    return (length - window) / stride + 1;
}

}  // namespace

Tensor maxpool1d(const Tensor& input, std::size_t window, std::size_t stride) {
    require_rank("maxpool1d", input, 1);
    const std::size_t length = input.dim(input.rank() - 1);
    const std::size_t out_len = pooled_length("maxpool1d", length, window, stride);
    const std::size_t rows = input.size() / length;
    Tensor output(replace_tail(input.shape(), input.rank() - 1, {out_len}));
    const double* x = input.data().data();
    double* y = output.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < out_len; ++i) {
            const double* win = x + r * length + i * stride;
            y[r * out_len + i] = *std::max_element(win, win + window);
        }
    }
    return output;
}

void maxpool1d_backward(Tensor& input, const Tensor& output, std::size_t window, std::size_t stride) {
    require_rank("maxpool1d_backward", input, 1);
    const std::size_t length = input.dim(input.rank() - 1);
    const std::size_t out_len = pooled_length("maxpool1d_backward", length, window, stride);
    const std::size_t rows = input.size() / length;
    if (output.size() != rows * out_len) throw DimensionError("maxpool1d_backward", "output", output.size(), rows * out_len);
    const double* x = input.data().data();
    double* gx = input.grad().data();
    const double* gy = output.grad().data();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < out_len; ++i) {
            const std::size_t start = r * length + i * stride;
            // std::max_element returns the first maximal element.
            const auto arg = static_cast<std::size_t>(std::max_element(x + start, x + start + window) - x);
            gx[arg] += gy[r * out_len + i];
        }
    }
}

Tensor dense(const Tensor& input, const LayerParams& params) {
    if (params.weights.rank() != 2) {
        throw DimensionError("dense: weights must be [d_out x d_in], got " + shape_string(params.weights.shape()));
    }
    require_rank("dense", input, 1);
    const std::size_t d_out = params.weights.dim(0);
    const std::size_t d_in = params.weights.dim(1);
    if (params.bias.size() != d_out) throw DimensionError("dense", "bias", params.bias.size(), d_out);
    if (input.dim(input.rank() - 1) != d_in) throw DimensionError("dense", "feature", input.dim(input.rank() - 1), d_in);
    const std::size_t rows = input.size() / d_in;
    Tensor output(replace_tail(input.shape(), input.rank() - 1, {d_out}));

    ConstMatMap x(input.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d_in));
    ConstMatMap w(params.weights.data().data(), static_cast<Eigen::Index>(d_out), static_cast<Eigen::Index>(d_in));
    ConstVecMap b(params.bias.data().data(), static_cast<Eigen::Index>(d_out));
    MatMap y(output.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d_out));
    y.noalias() = x * w.transpose();
    y.rowwise() += b.transpose();
    return output;
}

void dense_backward(Tensor& input, LayerParams& params, const Tensor& output) {
    const std::size_t d_out = params.weights.dim(0);
    const std::size_t d_in = params.weights.dim(1);
    if (input.dim(input.rank() - 1) != d_in) {
        throw DimensionError("dense_backward", "feature", input.dim(input.rank() - 1), d_in);
    }
    const std::size_t rows = input.size() / d_in;
    if (output.size() != rows * d_out) throw DimensionError("dense_backward", "output", output.size(), rows * d_out);

    ConstMatMap x(input.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d_in));
    ConstMatMap w(params.weights.data().data(), static_cast<Eigen::Index>(d_out), static_cast<Eigen::Index>(d_in));
    ConstMatMap gy(output.grad().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d_out));
    MatMap gw(params.weights.grad().data(), static_cast<Eigen::Index>(d_out), static_cast<Eigen::Index>(d_in));
    VecMap gb(params.bias.grad().data(), static_cast<Eigen::Index>(d_out));
    MatMap gx(input.grad().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d_in));
    gw.noalias() += gy.transpose() * x;
    gb += gy.colwise().sum().transpose();
    gx.noalias() += gy * w;
}

Tensor relu(const Tensor& input) {
    Tensor output(input.shape());
    std::transform(input.data().begin(), input.data().end(), output.data().begin(),
                   [](double v) { return v < 0.0 ? 0.0 : v; });
    return output;
}

void relu_backward(Tensor& input, const Tensor& output) {
    require_same_size("relu_backward", input, output);
    auto x = input.data();
    auto gx = input.grad();
    auto gy = output.grad();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0) gx[i] += gy[i];
    }
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor gate(const Tensor& input) {
    Tensor output(input.shape());
    std::transform(input.data().begin(), input.data().end(), output.data().begin(),
                   [](double v) { return sigmoid(v) * v; });
    return output;
}

void gate_backward(Tensor& input, const Tensor& output) {
    require_same_size("gate_backward", input, output);
    auto x = input.data();
    auto gx = input.grad();
    auto gy = output.grad();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = sigmoid(x[i]);
        gx[i] += gy[i] * s * (1.0 + x[i] * (1.0 - s));
    }
}

Tensor softmax(const Tensor& input) {
    require_rank("softmax", input, 1);
    const std::size_t d = input.dim(input.rank() - 1);
    const std::size_t rows = input.size() / d;
    Tensor output(input.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = input.data().data() + r * d;
        double* y = output.data().data() + r * d;
        const double m = *std::max_element(x, x + d);
        double sum = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            y[i] = std::exp(x[i] - m);
            sum += y[i];
        }
        for (std::size_t i = 0; i < d; ++i) y[i] /= sum;
    }
    return output;
}

void softmax_backward(Tensor& input, const Tensor& output) {
    require_same_size("softmax_backward", input, output);
    const std::size_t d = input.dim(input.rank() - 1);
    const std::size_t rows = input.size() / d;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* y = output.data().data() + r * d;
        const double* gy = output.grad().data() + r * d;
        double* gx = input.grad().data() + r * d;
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += gy[i] * y[i];
        for (std::size_t i = 0; i < d; ++i) gx[i] += y[i] * (gy[i] - dot);
    }
}

Tensor dropout(const Tensor& input, double rate, bool training, Rng& rng, DropoutMask& mask) {
    if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("dropout: rate must lie in [0, 1)");
    mask.scale.clear();
    if (!training || rate == 0.0) return Tensor::copy_of(input.shape(), input.data());
    const double keep_scale = 1.0 / (1.0 - rate);
    mask.scale.resize(input.size());
    for (double& s : mask.scale) s = rng.uniform() < rate ? 0.0 : keep_scale;
    return apply_dropout_mask(input, mask);
}

Tensor apply_dropout_mask(const Tensor& input, const DropoutMask& mask) {
    if (mask.scale.empty()) return Tensor::copy_of(input.shape(), input.data());
    if (mask.scale.size() != input.size()) throw DimensionError("dropout", "mask", mask.scale.size(), input.size());
    Tensor output(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) output[i] = input[i] * mask.scale[i];
    return output;
}

void dropout_backward(Tensor& input, const Tensor& output, const DropoutMask& mask) {
    require_same_size("dropout_backward", input, output);
    auto gx = input.grad();
    auto gy = output.grad();
    if (mask.scale.empty()) {
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
        return;
    }
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * mask.scale[i];
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
    require_rank("concat", a, 1);
    require_rank("concat", b, 1);
    const std::size_t da = a.dim(a.rank() - 1);
    const std::size_t db = b.dim(b.rank() - 1);
    const std::size_t rows = a.size() / da;
    if (b.size() / db != rows) throw DimensionError("concat", "batch", b.size() / db, rows);
    Tensor output(replace_tail(a.shape(), a.rank() - 1, {da + db}));
    for (std::size_t r = 0; r < rows; ++r) {
        double* y = output.data().data() + r * (da + db);
        std::copy_n(a.data().data() + r * da, da, y);
        std::copy_n(b.data().data() + r * db, db, y + da);
    }
    return output;
}

void concat_last_backward(Tensor& a, Tensor& b, const Tensor& output) {
    const std::size_t da = a.dim(a.rank() - 1);
    const std::size_t db = b.dim(b.rank() - 1);
    const std::size_t rows = a.size() / da;
    if (output.size() != rows * (da + db)) throw DimensionError("concat_backward", "output", output.size(), rows * (da + db));
    for (std::size_t r = 0; r < rows; ++r) {
        const double* gy = output.grad().data() + r * (da + db);
        double* ga = a.grad().data() + r * da;
        double* gb = b.grad().data() + r * db;
        for (std::size_t i = 0; i < da; ++i) ga[i] += gy[i];
        for (std::size_t i = 0; i < db; ++i) gb[i] += gy[da + i];
    }
}

}  // namespace batchmos::nn
