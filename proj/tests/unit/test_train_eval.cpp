#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "batchmos/data.hpp"
#include "batchmos/errors.hpp"
#include "batchmos/train.hpp"
#include "support/checks.hpp"

namespace {

using namespace batchmos;
using namespace batchmos::train;
using data::Split;
using model::ModelKind;
using model::ModelSpec;

struct Fixture {
    Fixture(std::uint64_t seed, std::uint32_t dim_a, std::uint32_t dim_b, data::SynthCounts counts, double noise)
        : synth(data::synth_generate(seed, dim_a, dim_b, counts, noise)), ds{&synth.a, &synth.b, synth.labels} {}
    Fixture(const Fixture&) = delete;

    data::SynthData synth;
    Dataset ds;
};

TrainConfig quick(int epochs) {
    TrainConfig c;
    c.max_epochs = epochs;
    c.patience = 0;
    c.seed = 11;
    return c;
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.patience = 60;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.lr = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.dropout_rate = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Evaluate, Arithmetic) {
    // A zero network predicts 0 everywhere.
    data::EmbeddingTable t("p", 4);
    t.add("x", {1, 2, 3, 4});
    t.add("y", {4, 3, 2, 1});
    Dataset ds{&t, nullptr, {{"x", 2.0, Split::TestMain}, {"y", 4.0, Split::TestMain}}};
    model::Model m(ModelSpec::make(ModelKind::FCN, 4));
    for (auto& p : m.layers()) {
        p.weights.fill(0.0);
        p.bias.fill(0.0);
    }
    EXPECT_EQ(evaluate(m, Split::TestMain, ds), (Metrics{3.0, 10.0}));

    // Bias-only network predicting exactly the label of a single clip.
    m.layers().back().bias[0] = 2.0;
    Dataset one{&t, nullptr, {{"x", 2.0, Split::Dev}}};
    EXPECT_EQ(evaluate(m, Split::Dev, one), (Metrics{0.0, 0.0}));
    EXPECT_THROW(evaluate(m, Split::TestOther1, one), DataConsistencyError);
}

TEST(Train, PatienceZeroRunsAllEpochs) {
    Fixture f(1, 16, 12, {40, 10, 10, 10}, 0.1);
    const auto r = train::train(ModelSpec::make(ModelKind::FCN, 16), f.ds, quick(7));
    EXPECT_EQ(r.report.stopped_epoch, 7);
    EXPECT_EQ(r.report.epochs.size(), 7u);
    EXPECT_EQ(r.report.dev_mse.size(), 7u);
    EXPECT_EQ(r.report.batch_losses.size(), 7u * 2u);
}

TEST(Train, EarlyStoppingRestoresBestEpoch) {
    Fixture f(2, 16, 12, {60, 20, 20, 20}, 0.3);
    TrainConfig c = quick(40);
    c.patience = 3;
    c.lr = 5e-2;
    const auto r = train::train(ModelSpec::make(ModelKind::FCN, 16), f.ds, c);
    ASSERT_GE(r.report.best_epoch, 1);
    const auto& dev = r.report.dev_mse;
    ASSERT_EQ(static_cast<int>(dev.size()), r.report.stopped_epoch);
    const double best = dev[static_cast<std::size_t>(r.report.best_epoch - 1)];
    for (double d : dev) EXPECT_GE(d, best);
    if (r.report.stopped_epoch < c.max_epochs) EXPECT_EQ(r.report.stopped_epoch - r.report.best_epoch, c.patience);
    // The returned weights are the best epoch's, so dev MSE reproduces it.
    model::Model m = r.model;
    EXPECT_DOUBLE_EQ(evaluate(m, Split::Dev, f.ds).mse, best);
    EXPECT_DOUBLE_EQ(r.report.test_metrics.at("dev").mse, best);
}

TEST(Train, LossIdentityHolds) {
    Fixture f(3, 20, 14, {64, 16, 16, 16}, 0.1);
    const auto r = train::train(ModelSpec::make(ModelKind::BatchFusion, 20, 14), f.ds, quick(3));
    ASSERT_FALSE(r.report.batch_losses.empty());
    for (const auto& l : r.report.batch_losses) {
        EXPECT_EQ(l.alpha, 0.3);
        EXPECT_EQ(l.total, l.mse + 0.3 * l.bd);
        EXPECT_GE(l.bd, 0.0);
    }
    for (const auto& l : r.report.epochs) EXPECT_TRUE(l.identity_holds());
}

TEST(Train, ConfigOverridesSpec) {
    Fixture f(3, 20, 14, {32, 8, 8, 8}, 0.1);
    TrainConfig c = quick(1);
    c.alpha = 0.5;
    c.dropout_rate = 0.1;
    const auto r = train::train(ModelSpec::make(ModelKind::BatchFusion, 20, 14), f.ds, c);
    EXPECT_EQ(r.model.spec().alpha, 0.5);
    EXPECT_EQ(r.model.spec().dropout_rate, 0.1);
    EXPECT_EQ(r.model.spec().seed, c.seed);
}

TEST(Train, DeterministicReports) {
    Fixture f(4, 24, 16, {48, 12, 12, 12}, 0.1);
    for (ModelKind k : {ModelKind::CNN, ModelKind::BatchFusion}) {
        auto spec = ModelSpec::make(k, 24, model::is_fusion(k) ? std::optional<std::size_t>(16) : std::nullopt);
        const auto r1 = train::train(spec, f.ds, quick(3));
        const auto r2 = train::train(spec, f.ds, quick(3));
        EXPECT_EQ(report_json(r1.report), report_json(r2.report));
        TrainConfig other = quick(3);
        other.seed = 12;
        EXPECT_NE(report_json(train::train(spec, f.ds, other).report), report_json(r1.report));
    }
}

TEST(Train, NoiselessCnnFitsPlantedSignal) {
    Fixture f(5, 16, 12, {100, 20, 20, 20}, 0.0);
    TrainConfig c = quick(500);
    c.patience = 50;
    c.dropout_rate = 0.0;
    const auto r = train::train(ModelSpec::make(ModelKind::CNN, 16), f.ds, c);
    model::Model m = r.model;
    EXPECT_LT(evaluate(m, Split::Train, f.ds).mse, 1e-2);
}

TEST(Train, MissingEmbeddingNamesClip) {
    Fixture f(6, 16, 12, {10, 2, 2, 2}, 0.1);
    f.ds.labels.push_back({"ghost_clip", 3.0, Split::Train});
    try {
        train::train(ModelSpec::make(ModelKind::FCN, 16), f.ds, quick(1));
        FAIL();
    } catch (const DataConsistencyError& e) {
        EXPECT_NE(std::string(e.what()).find("ghost_clip"), std::string::npos);
    }
}

TEST(Train, NanInputDiverges) {
    data::EmbeddingTable t("p", 4);
    t.add("x", {1, std::numeric_limits<float>::quiet_NaN(), 3, 4});
    Dataset ds{&t, nullptr, {{"x", 2.0, Split::Train}}};
    try {
        train::train(ModelSpec::make(ModelKind::FCN, 4), ds, quick(2));
        FAIL();
    } catch (const DivergenceError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
    }
}

TEST(Train, DimensionMismatch) {
    Fixture f(6, 16, 12, {10, 2, 2, 2}, 0.1);
    EXPECT_THROW(train::train(ModelSpec::make(ModelKind::FCN, 17), f.ds, quick(1)), DimensionError);
    Dataset no_b{&f.synth.a, nullptr, f.synth.labels};
    EXPECT_THROW(train::train(ModelSpec::make(ModelKind::ConcatFusion, 16, 12), no_b, quick(1)), DataConsistencyError);
}

TEST(Report, JsonRoundTrip) {
    Fixture f(7, 16, 12, {20, 5, 5, 5}, 0.1);
    const auto r = train::train(ModelSpec::make(ModelKind::BatchFusion, 16, 12), f.ds, quick(2));
    const std::string json = report_json(r.report);
    const TrainReport back = parse_report_json(json);
    EXPECT_EQ(report_json(back), json);
    EXPECT_EQ(back.best_epoch, r.report.best_epoch);
    EXPECT_EQ(back.test_metrics.size(), 3u);
}

// ---- grid ----

TEST(Grid, Shapes) {
    EXPECT_EQ(single_model_grid().size(), 26u);
    EXPECT_EQ(fusion_grid().size(), 13u * 12u);
    EXPECT_EQ(GridCell({"XV", std::string("EC"), ModelKind::BatchFusion}).name(), "XV+EC/batch");
    EXPECT_EQ(embedding_stem("XV"), "xvector");
    EXPECT_EQ(embedding_stem("custom"), "custom");
}

TEST(Grid, EmptyListGivesHeaderOnly) {
    const auto rows = run_grid({}, "/nonexistent", quick(1));
    EXPECT_TRUE(rows.empty());
    EXPECT_EQ(format_grid_csv(rows), std::string(kGridCsvHeader) + "\n");
}

void write_synth(const batchmos::testing::TempDir& dir, const data::SynthData& d) {
    data::write_embeddings(d.a, dir / "synth_a.smos");
    data::write_embeddings(d.b, dir / "synth_b.smos");
    data::write_labels(d.labels, dir / "labels.csv");
}

TEST(Grid, OneCellTwoRows) {
    batchmos::testing::TempDir dir("grid1");
    write_synth(dir, data::synth_generate(8, 16, 12, {30, 8, 8, 8}, 0.1));
    const auto rows = run_grid({{"synth_a", std::string("synth_b"), ModelKind::BatchFusion}}, dir.path(), quick(2));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].split, "test-main");
    EXPECT_EQ(rows[1].split, "test-other1");
    for (const auto& r : rows) {
        EXPECT_EQ(r.error, "");
        EXPECT_TRUE(std::isfinite(r.mae));
        EXPECT_EQ(r.cell, "synth_a+synth_b/batch");
    }
}

TEST(Grid, FailuresBecomeRows) {
    batchmos::testing::TempDir dir("gridfail");
    write_synth(dir, data::synth_generate(8, 16, 12, {30, 8, 8, 8}, 0.1));
    const std::vector<GridCell> cells = {
        {"missing_ptm", std::nullopt, ModelKind::CNN},
        {"synth_a", std::nullopt, ModelKind::FCN},
        {"synth_a", std::nullopt, ModelKind::BatchFusion},
    };
    const auto rows = run_grid(cells, dir.path(), quick(1));
    ASSERT_EQ(rows.size(), 6u);
    EXPECT_NE(rows[0].error, "");
    EXPECT_TRUE(std::isnan(rows[0].mae));
    EXPECT_EQ(rows[2].error, "");
    EXPECT_NE(rows[4].error, "");
    const std::string csv = format_grid_csv(rows);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Grid, SingleModelTableOnTinyData) {
    batchmos::testing::TempDir dir("grid26");
    const auto d = data::synth_generate(9, 12, 12, {16, 4, 4, 4}, 0.1);
    for (const auto& cell : single_model_grid()) {
        data::EmbeddingTable t(cell.ptm_a, 12);
        for (const auto& r : d.a.records()) t.add(r.clip_id, r.vector);
        data::write_embeddings(t, dir / (embedding_stem(cell.ptm_a) + ".smos"));
    }
    data::write_labels(d.labels, dir / "labels.csv");
    const auto serial = run_grid(single_model_grid(), dir.path(), quick(1), 1);
    ASSERT_EQ(serial.size(), 13u * 2u * 2u);
    for (const auto& r : serial) EXPECT_EQ(r.error, "") << r.cell;
    const auto parallel = run_grid(single_model_grid(), dir.path(), quick(1), 3);
    EXPECT_EQ(format_grid_csv(parallel), format_grid_csv(serial));
}

}  // namespace
