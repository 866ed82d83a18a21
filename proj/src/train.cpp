#include "batchmos/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <unordered_map>

#include "batchmos/errors.hpp"
#include "batchmos/optim.hpp"

namespace batchmos::train {

using data::Split;
using model::Model;
using model::ModelKind;

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (max_epochs <= 0) throw ConfigError("max_epochs must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (patience < 0) throw ConfigError("patience must be non-negative");
    if (patience > max_epochs) throw ConfigError("patience must not exceed max_epochs");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
}

std::string report_json(const TrainReport& report) {
    nlohmann::ordered_json j;
    j["epochs"] = nlohmann::ordered_json::array();
    for (const nn::LossBreakdown& e : report.epochs) {
        j["epochs"].push_back({{"mse", e.mse}, {"bd", e.bd}, {"alpha", e.alpha}, {"total", e.total}});
    }
    j["dev_mse"] = report.dev_mse;
    j["best_epoch"] = report.best_epoch;
    j["stopped_epoch"] = report.stopped_epoch;
    j["test_metrics"] = nlohmann::ordered_json::object();
    for (const auto& [split, m] : report.test_metrics) j["test_metrics"][split] = {{"mae", m.mae}, {"mse", m.mse}};
    j["seed"] = report.seed;
    return j.dump(2) + "\n";
}

TrainReport parse_report_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    TrainReport r;
    for (const auto& e : j.at("epochs")) {
        r.epochs.push_back(nn::LossBreakdown{e.at("mse").get<double>(), e.at("bd").get<double>(),
                                             e.at("alpha").get<double>(), e.at("total").get<double>()});
    }
    r.dev_mse = j.at("dev_mse").get<std::vector<double>>();
    r.best_epoch = j.at("best_epoch").get<int>();
    r.stopped_epoch = j.at("stopped_epoch").get<int>();
    for (const auto& [split, m] : j.at("test_metrics").items()) {
        r.test_metrics[split] = Metrics{m.at("mae").get<double>(), m.at("mse").get<double>()};
    }
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
}

namespace {

void require_tables(const model::ModelSpec& spec, const Dataset& data) {
    if (data.a == nullptr) throw DataConsistencyError("dataset has no embedding table for branch a");
    if (data.a->dim() != spec.dim_a) throw DimensionError("dataset(a)", "embedding", data.a->dim(), spec.dim_a);
    if (model::is_fusion(spec.kind)) {
        if (data.b == nullptr) throw DataConsistencyError("fusion model needs an embedding table for branch b");
        if (data.b->dim() != *spec.dim_b) throw DimensionError("dataset(b)", "embedding", data.b->dim(), *spec.dim_b);
    }
}

void require_clips(const Dataset& data, const std::vector<data::ClipLabel>& labels, bool fusion) {
    for (const data::ClipLabel& l : labels) {
        if (!data.a->contains(l.clip_id)) {
            throw DataConsistencyError("clip '" + l.clip_id + "' has no embedding in table '" + data.a->ptm_id() + "'");
        }
        if (fusion && !data.b->contains(l.clip_id)) {
            throw DataConsistencyError("clip '" + l.clip_id + "' has no embedding in table '" + data.b->ptm_id() + "'");
        }
    }
}

std::vector<double> forward_eval(Model& model, const Dataset& data, std::span<const std::string> ids) {
    constexpr std::size_t kChunk = 128;
    const bool fusion = model::is_fusion(model.spec().kind);
    std::vector<double> preds;
    preds.reserve(ids.size());
    for (std::size_t start = 0; start < ids.size(); start += kChunk) {
        const auto chunk = ids.subspan(start, std::min(kChunk, ids.size() - start));
        const nn::Tensor a = data::gather(*data.a, chunk);
        std::optional<nn::Tensor> b;
        if (fusion) b = data::gather(*data.b, chunk);
        const auto out = model.forward(a, b ? &*b : nullptr, false);
        preds.insert(preds.end(), out.predictions.begin(), out.predictions.end());
    }
    return preds;
}

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const Model& m) {
    Snapshot s;
    for (const nn::LayerParams& p : m.layers()) {
        s.emplace_back(p.weights.data().begin(), p.weights.data().end());
        s.emplace_back(p.bias.data().begin(), p.bias.data().end());
    }
    return s;
}

void restore(Model& m, const Snapshot& s) {
    std::size_t k = 0;
    for (nn::LayerParams& p : m.layers()) {
        std::copy(s[k].begin(), s[k].end(), p.weights.data().begin());
        std::copy(s[k + 1].begin(), s[k + 1].end(), p.bias.data().begin());
        k += 2;
    }
}

}  // namespace

std::vector<double> predict(Model& model, const Dataset& data, std::span<const std::string> clip_ids) {
    require_tables(model.spec(), data);
    if (clip_ids.empty()) return {};
    return forward_eval(model, data, clip_ids);
}

Metrics evaluate(Model& model, Split split, const Dataset& data) {
    const auto labels = data::labels_in(data.labels, split);
    if (labels.empty()) throw DataConsistencyError("split '" + std::string(data::split_name(split)) + "' is empty");
    std::vector<std::string> ids;
    ids.reserve(labels.size());
    for (const auto& l : labels) ids.push_back(l.clip_id);
    const auto preds = predict(model, data, ids);
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double d = preds[i] - labels[i].mos;
        abs_sum += std::abs(d);
        sq_sum += d * d;
    }
    const auto n = static_cast<double>(labels.size());
    return Metrics{abs_sum / n, sq_sum / n};
}

TrainResult train(model::ModelSpec spec, const Dataset& data, const TrainConfig& config) {
    config.validate();
    spec.seed = config.seed;
    spec.dropout_rate = config.dropout_rate;
    if (spec.kind == ModelKind::BatchFusion) spec.alpha = config.alpha;
    spec.validate();
    require_tables(spec, data);

    const bool fusion = model::is_fusion(spec.kind);
    const auto train_labels = data::labels_in(data.labels, Split::Train);
    const auto dev_labels = data::labels_in(data.labels, Split::Dev);
    if (train_labels.empty()) throw DataConsistencyError("train split is empty");
    require_clips(data, train_labels, fusion);
    require_clips(data, dev_labels, fusion);

    std::vector<std::string> train_ids;
    std::unordered_map<std::string, double> mos_of;
    for (const auto& l : train_labels) {
        train_ids.push_back(l.clip_id);
        mos_of.emplace(l.clip_id, l.mos);
    }

    TrainResult result{Model(spec), TrainReport{}};
    Model& model = result.model;
    TrainReport& report = result.report;
    report.seed = config.seed;
    const nn::AdamConfig adam{config.lr};

    double best_dev = std::numeric_limits<double>::infinity();
    Snapshot best = snapshot(model);
    int since_best = 0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto batches = data::make_batches(train_ids, config.seed, config.batch_size, static_cast<std::uint64_t>(epoch));
        double mse_sum = 0.0, bd_sum = 0.0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& ids = batches[bi];
            const nn::Tensor a = data::gather(*data.a, ids);
            std::optional<nn::Tensor> b;
            if (fusion) b = data::gather(*data.b, ids);
            std::vector<double> targets;
            targets.reserve(ids.size());
            for (const auto& id : ids) targets.push_back(mos_of.at(id));

            const auto out = model.forward(a, b ? &*b : nullptr, true);
            const nn::LossBreakdown loss = model.loss(out, targets);
            if (!std::isfinite(loss.total)) throw DivergenceError(epoch, bi);
            report.batch_losses.push_back(loss);
            mse_sum += loss.mse;
            bd_sum += loss.bd;

            model.zero_grad();
            model.backward(targets);
            for (nn::LayerParams& p : model.layers()) nn::adam_step(p, adam);
        }
        const auto nb = static_cast<double>(batches.size());
        report.epochs.push_back(nn::LossBreakdown::make(mse_sum / nb, bd_sum / nb, model.spec().alpha.value_or(0.0)));

        const double dev = dev_labels.empty() ? report.epochs.back().mse : evaluate(model, Split::Dev, data).mse;
        report.dev_mse.push_back(dev);
        report.stopped_epoch = epoch;
        if (dev < best_dev) {
            best_dev = dev;
            report.best_epoch = epoch;
            best = snapshot(model);
            since_best = 0;
        } else {
            ++since_best;
        }
        if (config.patience > 0 && since_best >= config.patience) break;
    }
    if (report.best_epoch == 0) throw DivergenceError(report.stopped_epoch, 0);
    restore(model, best);

    for (Split s : {Split::Dev, Split::TestMain, Split::TestOther1}) {
        if (data::labels_in(data.labels, s).empty()) continue;
        report.test_metrics[std::string(data::split_name(s))] = evaluate(model, s, data);
    }
    return result;
}

}  // namespace batchmos::train
