#include <gtest/gtest.h>

#include <cmath>

#include "batchmos/checkpoint.hpp"
#include "batchmos/errors.hpp"
#include "batchmos/model.hpp"
#include "support/checks.hpp"

namespace {

using namespace batchmos;
using namespace batchmos::model;
using batchmos::testing::random_tensor;
using nn::Tensor;

std::size_t conv_branch_params(std::size_t proj_out, std::size_t dim) {
    const std::size_t conv1 = 64 * 1 * 3 + 64;
    const std::size_t conv2 = 128 * 64 * 3 + 128;
    const std::size_t proj = proj_out == 0 ? 0 : proj_out * 128 * conv_stack_length(dim) + proj_out;
    return conv1 + conv2 + proj;
}

TEST(ModelSpec, ParameterCounts) {
    EXPECT_EQ(Model(ModelSpec::make(ModelKind::FCN, 768)).parameter_count(), 98'561u);

    EXPECT_EQ(conv_stack_length(512), 126u);
    EXPECT_EQ(128 * conv_stack_length(512), 16'128u);
    const std::size_t cnn = conv_branch_params(0, 512) + (128 * 16'128 + 128) + (128 + 1);
    EXPECT_EQ(Model(ModelSpec::make(ModelKind::CNN, 512)).parameter_count(), cnn);

    const std::size_t fusion = conv_branch_params(128, 512) + conv_branch_params(128, 192) + (128 * 256 + 128) + 129;
    const std::size_t batch = Model(ModelSpec::make(ModelKind::BatchFusion, 512, 192)).parameter_count();
    EXPECT_EQ(batch, fusion);
    EXPECT_EQ(Model(ModelSpec::make(ModelKind::ConcatFusion, 512, 192)).parameter_count(), fusion);
    EXPECT_GE(batch, 2'000'000u);
    EXPECT_LE(batch, 6'000'000u);
}

TEST(ModelSpec, ConvStackLengths) {
    // valid conv (-2), pool (floor /2), twice
    for (std::size_t dim : {10u, 11u, 192u, 512u, 768u, 1024u, 1280u}) {
        const std::size_t want = ((dim - 2) / 2 - 2) / 2;
        EXPECT_EQ(conv_stack_length(dim), want) << dim;
    }
}

TEST(ModelSpec, Validation) {
    EXPECT_THROW(Model(ModelSpec::make(ModelKind::CNN, 9)), ConfigError);
    EXPECT_NO_THROW(Model(ModelSpec::make(ModelKind::CNN, 10)));
    EXPECT_NO_THROW(Model(ModelSpec::make(ModelKind::FCN, 3)));
    EXPECT_THROW(Model(ModelSpec::make(ModelKind::BatchFusion, 512, 9)), ConfigError);
    auto spec = ModelSpec::make(ModelKind::CNN, 64);
    spec.dim_b = 32;
    EXPECT_THROW(spec.validate(), ConfigError);
    auto batch = ModelSpec::make(ModelKind::BatchFusion, 64, 32);
    ASSERT_TRUE(batch.alpha.has_value());
    EXPECT_DOUBLE_EQ(*batch.alpha, 0.3);
    batch.alpha = 1.5;
    EXPECT_THROW(batch.validate(), ConfigError);
    EXPECT_FALSE(ModelSpec::make(ModelKind::ConcatFusion, 64, 32).alpha.has_value());
}

TEST(ModelKindNames, RoundTrip) {
    for (ModelKind k : {ModelKind::FCN, ModelKind::CNN, ModelKind::ConcatFusion, ModelKind::BatchFusion}) {
        EXPECT_EQ(parse_kind(kind_name(k)), k);
    }
    EXPECT_THROW(parse_kind("transformer"), ConfigError);
}

class ShapeAudit : public ::testing::TestWithParam<std::size_t> {};

TEST_P(ShapeAudit, EveryKindProducesOnePredictionPerItem) {
    const std::size_t dim = GetParam();
    Rng rng(dim);
    Tensor a = random_tensor({3, dim}, rng);
    Tensor b = random_tensor({3, 192}, rng);
    for (ModelKind k : {ModelKind::FCN, ModelKind::CNN, ModelKind::ConcatFusion, ModelKind::BatchFusion}) {
        Model m(ModelSpec::make(k, dim, is_fusion(k) ? std::optional<std::size_t>(192) : std::nullopt));
        auto out = m.forward(a, is_fusion(k) ? &b : nullptr, false);
        ASSERT_EQ(out.predictions.size(), 3u) << kind_name(k);
        for (double p : out.predictions) EXPECT_TRUE(std::isfinite(p));
        EXPECT_EQ(out.bd_value.has_value(), k == ModelKind::BatchFusion);
        if (out.bd_value) EXPECT_GE(*out.bd_value, 0.0);
    }
}

INSTANTIATE_TEST_SUITE_P(PtmDims, ShapeAudit, ::testing::Values(192, 512, 768, 1024, 1280));

TEST(Forward, DimensionMismatch) {
    Model m(ModelSpec::make(ModelKind::CNN, 64));
    try {
        m.forward(Tensor({2, 63}), nullptr, false);
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        EXPECT_EQ(e.axis(), "embedding");
    }
    Model f(ModelSpec::make(ModelKind::BatchFusion, 32, 16));
    Tensor a({2, 32});
    EXPECT_THROW(f.forward(a, nullptr, false), DimensionError);
    Tensor b_short({3, 16});
    EXPECT_THROW(f.forward(a, &b_short, false), DimensionError);
}

TEST(Forward, ZeroNetworkPredictsZero) {
    Rng rng(4);
    for (ModelKind k : {ModelKind::FCN, ModelKind::CNN, ModelKind::ConcatFusion, ModelKind::BatchFusion}) {
        Model m(ModelSpec::make(k, 40, is_fusion(k) ? std::optional<std::size_t>(24) : std::nullopt));
        for (auto& p : m.layers()) {
            p.weights.fill(0.0);
            p.bias.fill(0.0);
        }
        Tensor a = random_tensor({5, 40}, rng, 3.0);
        Tensor b = random_tensor({5, 24}, rng, 3.0);
        for (double p : m.forward(a, is_fusion(k) ? &b : nullptr, true).predictions) EXPECT_EQ(p, 0.0) << kind_name(k);
    }
}

TEST(Forward, IdenticalBranchesHaveZeroDistance) {
    Model m(ModelSpec::make(ModelKind::BatchFusion, 48, 48, 17));
    auto& L = m.layers();
    for (int i = 0; i < 3; ++i) L[3 + i] = L[i];
    Rng rng(8);
    Tensor x = random_tensor({6, 48}, rng);
    auto out = m.forward(x, &x, false);
    ASSERT_TRUE(out.bd_value.has_value());
    EXPECT_NEAR(*out.bd_value, 0.0, 1e-9);

    const std::vector<double> perfect = out.predictions;
    EXPECT_EQ(m.loss(out, perfect).total, *out.bd_value * 0.3);
    EXPECT_NEAR(m.loss(out, perfect).total, 0.0, 1e-9);
}

TEST(Forward, EvalModeIsDeterministic) {
    Rng rng(2);
    Model m(ModelSpec::make(ModelKind::BatchFusion, 30, 20, 5));
    Tensor a = random_tensor({4, 30}, rng);
    Tensor b = random_tensor({4, 20}, rng);
    const auto p1 = m.forward(a, &b, false).predictions;
    m.forward(a, &b, true);
    const auto p2 = m.forward(a, &b, false).predictions;
    EXPECT_EQ(p1, p2);
}

TEST(Forward, SameSeedSameInitialization) {
    Model a(ModelSpec::make(ModelKind::CNN, 32, std::nullopt, 77));
    Model b(ModelSpec::make(ModelKind::CNN, 32, std::nullopt, 77));
    Model c(ModelSpec::make(ModelKind::CNN, 32, std::nullopt, 78));
    EXPECT_EQ(a.layers()[0].weights.values(), b.layers()[0].weights.values());
    EXPECT_NE(a.layers()[0].weights.values(), c.layers()[0].weights.values());
}

// Hand-traced oracle: the CNN composed from plain loops.
std::vector<double> conv_ref(const std::vector<double>& x, std::size_t c_in, std::size_t len, const nn::LayerParams& p) {
    const std::size_t c_out = p.weights.dim(0), k = p.weights.dim(2), out_len = len - k + 1;
    std::vector<double> y(c_out * out_len);
    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t i = 0; i < out_len; ++i) {
            double s = p.bias[co];
            for (std::size_t ci = 0; ci < c_in; ++ci) {
                for (std::size_t j = 0; j < k; ++j) s += p.weights[(co * c_in + ci) * k + j] * x[ci * len + i + j];
            }
            y[co * out_len + i] = s;
        }
    }
    return y;
}

std::vector<double> pool_ref(const std::vector<double>& x, std::size_t channels, std::size_t len) {
    const std::size_t out_len = len / 2;
    std::vector<double> y(channels * out_len);
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < out_len; ++i) y[c * out_len + i] = std::max(x[c * len + 2 * i], x[c * len + 2 * i + 1]);
    }
    return y;
}

std::vector<double> dense_ref(const std::vector<double>& x, const nn::LayerParams& p) {
    const std::size_t d_out = p.weights.dim(0), d_in = p.weights.dim(1);
    std::vector<double> y(d_out);
    for (std::size_t o = 0; o < d_out; ++o) {
        double s = p.bias[o];
        for (std::size_t i = 0; i < d_in; ++i) s += p.weights[o * d_in + i] * x[i];
        y[o] = s;
    }
    return y;
}

TEST(Forward, CnnMatchesHandTrace) {
    const std::size_t dim = 23;
    Model m(ModelSpec::make(ModelKind::CNN, dim, std::nullopt, 9));
    Rng rng(13);
    for (auto& p : m.layers()) batchmos::testing::randomize(p, rng, 0.2);
    Tensor x = random_tensor({1, dim}, rng);
    const auto& L = m.layers();

    auto h = conv_ref(x.values(), 1, dim, L[0]);                     // 64 x 21
    h = pool_ref(h, 64, dim - 2);                                      // 64 x 10
    h = conv_ref(h, 64, (dim - 2) / 2, L[1]);                          // 128 x 8
    h = pool_ref(h, 128, (dim - 2) / 2 - 2);                           // 128 x 4
    h = dense_ref(h, L[2]);
    for (double& v : h) v = std::max(v, 0.0);
    const double want = dense_ref(h, L[3])[0];

    const auto out = m.forward(x, nullptr, false);
    ASSERT_EQ(out.predictions.size(), 1u);
    EXPECT_NEAR(out.predictions[0], want, 1e-10);
}

TEST(Backward, EndToEndGradients) {
    for (ModelKind k : {ModelKind::FCN, ModelKind::CNN, ModelKind::ConcatFusion, ModelKind::BatchFusion}) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            EXPECT_LT(batchmos::testing::check_model_gradients(k, seed), 1e-4) << kind_name(k) << " seed " << seed;
        }
    }
}

TEST(Backward, BeforeForwardThrows) {
    Model m(ModelSpec::make(ModelKind::FCN, 8));
    const std::vector<double> t = {1.0};
    EXPECT_THROW(m.backward(t), Error);
}

TEST(Ablation, GateOffAndAlphaZeroEqualsConcat) {
    auto bspec = ModelSpec::make(ModelKind::BatchFusion, 24, 16, 3);
    bspec.alpha = 0.0;
    Model batch(bspec);
    batch.set_gate_enabled(false);
    Model concat(ModelSpec::make(ModelKind::ConcatFusion, 24, 16, 3));
    ASSERT_EQ(batch.layers().size(), concat.layers().size());
    for (std::size_t i = 0; i < batch.layers().size(); ++i) concat.layers()[i] = batch.layers()[i];

    Rng rng(6);
    Tensor a = random_tensor({5, 24}, rng);
    Tensor b = random_tensor({5, 16}, rng);
    std::vector<double> targets = {1.0, 2.0, 3.0, 4.0, 5.0};
    auto ob = batch.forward(a, &b, false);
    auto oc = concat.forward(a, &b, false);
    EXPECT_EQ(ob.predictions, oc.predictions);
    EXPECT_EQ(batch.loss(ob, targets).total, concat.loss(oc, targets).total);

    batch.zero_grad();
    concat.zero_grad();
    batch.backward(targets);
    concat.backward(targets);
    for (std::size_t i = 0; i < batch.layers().size(); ++i) {
        const auto gb = batch.layers()[i].weights.grad();
        const auto gc = concat.layers()[i].weights.grad();
        for (std::size_t j = 0; j < gb.size(); ++j) ASSERT_NEAR(gb[j], gc[j], 1e-12) << "layer " << i;
    }
}

TEST(Ablation, GateChangesPredictions) {
    Model m(ModelSpec::make(ModelKind::BatchFusion, 24, 16, 3));
    Rng rng(6);
    Tensor a = random_tensor({3, 24}, rng);
    Tensor b = random_tensor({3, 16}, rng);
    const auto on = m.forward(a, &b, false).predictions;
    m.set_gate_enabled(false);
    EXPECT_NE(m.forward(a, &b, false).predictions, on);
}

TEST(Loss, AlphaOnlyForBatchFusion) {
    Rng rng(1);
    Tensor a = random_tensor({2, 20}, rng);
    Tensor b = random_tensor({2, 12}, rng);
    const std::vector<double> t = {2.0, 3.0};
    Model c(ModelSpec::make(ModelKind::ConcatFusion, 20, 12));
    const auto lc = c.loss(c.forward(a, &b, false), t);
    EXPECT_EQ(lc.alpha, 0.0);
    EXPECT_EQ(lc.total, lc.mse);
    Model bf(ModelSpec::make(ModelKind::BatchFusion, 20, 12));
    const auto lb = bf.loss(bf.forward(a, &b, false), t);
    EXPECT_EQ(lb.alpha, 0.3);
    EXPECT_TRUE(lb.identity_holds());
    EXPECT_GT(lb.bd, 0.0);
}

TEST(Checkpoint, RoundTripPreservesPredictions) {
    batchmos::testing::TempDir dir("ckpt");
    Rng rng(31);
    for (ModelKind k : {ModelKind::FCN, ModelKind::CNN, ModelKind::ConcatFusion, ModelKind::BatchFusion}) {
        Model m(ModelSpec::make(k, 20, is_fusion(k) ? std::optional<std::size_t>(14) : std::nullopt, rng.next()));
        const auto path = dir / (std::string(kind_name(k)) + ".smck");
        write_checkpoint(m, path);
        Model back = read_checkpoint(path);
        EXPECT_EQ(back.spec(), m.spec());
        Tensor a = random_tensor({3, 20}, rng);
        Tensor b = random_tensor({3, 14}, rng);
        const Tensor* bp = is_fusion(k) ? &b : nullptr;
        EXPECT_EQ(back.forward(a, bp, false).predictions, m.forward(a, bp, false).predictions);
        EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(m));
        const auto header = read_checkpoint_header(path);
        EXPECT_EQ(header.version, kCheckpointVersion);
        EXPECT_EQ(header.layer_count, m.layers().size());
    }
}

TEST(Checkpoint, CorruptInputs) {
    Model m(ModelSpec::make(ModelKind::CNN, 16));
    auto bytes = encode_checkpoint(m);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    try {
        decode_checkpoint(truncated);
        FAIL() << "expected CorruptionError";
    } catch (const CorruptionError& e) {
        EXPECT_GT(e.offset(), 0u);
    }
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(decode_checkpoint(trailing), CorruptionError);
}

}  // namespace
