#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "batchmos/data.hpp"
#include "batchmos/losses.hpp"
#include "batchmos/model.hpp"

namespace batchmos::train {

struct TrainConfig {
    double lr = 1e-3;
    std::size_t batch_size = 32;
    int max_epochs = 50;
    double alpha = 0.3;
    /// Epochs without dev improvement before stopping; 0 disables early stopping.
    int patience = 10;
    std::uint64_t seed = 0;
    double dropout_rate = 0.3;

    void validate() const;
};

struct Metrics {
    double mae = 0.0;
    double mse = 0.0;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct TrainReport {
    /// Mean train loss per epoch; total is recomputed from the means.
    std::vector<nn::LossBreakdown> epochs;
    std::vector<double> dev_mse;
    int stopped_epoch = 0;
    int best_epoch = 0;  // 1-based
    std::map<std::string, Metrics> test_metrics;
    std::uint64_t seed = 0;
    /// Every per-batch loss, in training order. Not part of the JSON document.
    std::vector<nn::LossBreakdown> batch_losses;
};

/// JSON with fields epochs, dev_mse, best_epoch, stopped_epoch, test_metrics, seed.
std::string report_json(const TrainReport& report);
TrainReport parse_report_json(const std::string& text);

/// Embeddings and labels for one experiment. `b` is required for fusion models.
struct Dataset {
    const data::EmbeddingTable* a = nullptr;
    const data::EmbeddingTable* b = nullptr;
    std::vector<data::ClipLabel> labels;
};

struct TrainResult {
    model::Model model;
    TrainReport report;
};

/// Trains `spec` with Adam on the train split, early-stopping on dev MSE.
/// The config's seed, dropout rate and (for BatchFusion) alpha override the
/// corresponding spec fields. The returned model holds the best-epoch weights.
TrainResult train(model::ModelSpec spec, const Dataset& data, const TrainConfig& config);

/// Eval-mode predictions for `clip_ids`.
std::vector<double> predict(model::Model& model, const Dataset& data, std::span<const std::string> clip_ids);

/// MAE and MSE of eval-mode predictions on one split.
Metrics evaluate(model::Model& model, data::Split split, const Dataset& data);

/// One experiment of a results grid.
struct GridCell {
    std::string ptm_a;
    std::optional<std::string> ptm_b;
    model::ModelKind kind = model::ModelKind::CNN;

    /// e.g. "XV/cnn", "XV+EC/batch".
    std::string name() const;
};

struct GridRow {
    std::string cell;
    std::string kind;
    std::string split;
    double mae = 0.0;
    double mse = 0.0;
    int stopped_epoch = 0;
    std::uint64_t seed = 0;
    std::string error;
};

inline constexpr const char* kGridCsvHeader = "cell,kind,split,mae,mse,stopped_epoch,seed,error";

/// Abbreviation (U, W2, ..., MTV0) to embedding file stem; unknown tokens map to themselves.
std::string embedding_stem(const std::string& token);

/// The thirteen single-model rows of the results table, each with FCN and CNN heads.
std::vector<GridCell> single_model_grid();
/// Every unordered pair of the thirteen models, each with concat and BATCH fusion.
std::vector<GridCell> fusion_grid();

/// Trains and evaluates every cell. Embeddings are read from
/// `<data_root>/<stem>.smos` and labels from `<data_root>/labels.csv`.
/// Each cell uses seed ^ fnv1a(cell name). Failures become rows with a
/// non-empty error column. Rows are ordered by cell, then split.
std::vector<GridRow> run_grid(const std::vector<GridCell>& cells, const std::filesystem::path& data_root,
                              const TrainConfig& config, unsigned workers = 1);

std::string format_grid_csv(const std::vector<GridRow>& rows);

}  // namespace batchmos::train
