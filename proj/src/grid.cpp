#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <thread>
#include <utility>

#include "batchmos/errors.hpp"
#include "batchmos/random.hpp"
#include "batchmos/train.hpp"

namespace batchmos::train {

namespace {

struct PtmEntry {
    const char* abbrev;
    const char* stem;
};

// Row order of the single-model results table.
constexpr PtmEntry kPtms[] = {
    {"U", "unispeech-sat"}, {"W2", "wav2vec2"},    {"W", "wavlm"},          {"X", "xlsr"},
    {"Wh", "whisper"},      {"M", "mms"},          {"XV", "xvector"},       {"EC", "ecapa"},
    {"m2v", "music2vec-v1"}, {"MT95", "mert-v1-95m"}, {"MTP", "mert-v0-public"}, {"MT3M", "mert-v1-330m"},
    {"MTV0", "mert-v0"},
};

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::string GridCell::name() const {
    std::string n = ptm_a;
    if (ptm_b) n += "+" + *ptm_b;
    return n + "/" + std::string(model::kind_name(kind));
}

std::string embedding_stem(const std::string& token) {
    for (const PtmEntry& e : kPtms) {
        if (token == e.abbrev) return e.stem;
    }
    return token;
}

std::vector<GridCell> single_model_grid() {
    std::vector<GridCell> cells;
    for (const PtmEntry& e : kPtms) {
        cells.push_back({e.abbrev, std::nullopt, model::ModelKind::FCN});
        cells.push_back({e.abbrev, std::nullopt, model::ModelKind::CNN});
    }
    return cells;
}

std::vector<GridCell> fusion_grid() {
    std::vector<GridCell> cells;
    constexpr std::size_t n = std::size(kPtms);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            cells.push_back({kPtms[i].abbrev, std::string(kPtms[j].abbrev), model::ModelKind::ConcatFusion});
            cells.push_back({kPtms[i].abbrev, std::string(kPtms[j].abbrev), model::ModelKind::BatchFusion});
        }
    }
    return cells;
}

std::vector<GridRow> run_grid(const std::vector<GridCell>& cells, const std::filesystem::path& data_root,
                              const TrainConfig& config, unsigned workers) {
    if (cells.empty()) return {};

    // Load everything up front; tables are shared read-only between workers.
    std::vector<data::ClipLabel> labels;
    std::string labels_error;
    try {
        labels = data::load_labels(data_root / "labels.csv");
    } catch (const std::exception& e) {
        labels_error = e.what();
    }
    std::map<std::string, std::shared_ptr<const data::EmbeddingTable>> tables;
    std::map<std::string, std::string> table_errors;
    auto load = [&](const std::string& token) {
        if (tables.contains(token) || table_errors.contains(token)) return;
        try {
            tables[token] = std::make_shared<const data::EmbeddingTable>(
                data::read_embeddings(data_root / (embedding_stem(token) + ".smos")));
        } catch (const std::exception& e) {
            table_errors[token] = e.what();
        }
    };
    for (const GridCell& c : cells) {
        load(c.ptm_a);
        if (c.ptm_b) load(*c.ptm_b);
    }

    const std::array<data::Split, 2> test_splits = {data::Split::TestMain, data::Split::TestOther1};
    std::vector<std::vector<GridRow>> per_cell(cells.size());

    auto run_cell = [&](std::size_t idx) {
        const GridCell& cell = cells[idx];
        const std::string name = cell.name();
        const std::uint64_t seed = config.seed ^ fnv1a(name);
        auto fail = [&](const std::string& msg) {
            for (data::Split s : test_splits) {
                per_cell[idx].push_back({name, std::string(model::kind_name(cell.kind)), std::string(data::split_name(s)),
                                         std::nan(""), std::nan(""), 0, seed, msg});
            }
        };
        try {
            if (!labels_error.empty()) return fail(labels_error);
            if (auto it = table_errors.find(cell.ptm_a); it != table_errors.end()) return fail(it->second);
            if (cell.ptm_b) {
                if (auto it = table_errors.find(*cell.ptm_b); it != table_errors.end()) return fail(it->second);
            }
            if (model::is_fusion(cell.kind) != cell.ptm_b.has_value()) {
                return fail("cell kind " + std::string(model::kind_name(cell.kind)) +
                            (cell.ptm_b ? " takes one embedding" : " needs two embeddings"));
            }
            Dataset ds{tables.at(cell.ptm_a).get(), cell.ptm_b ? tables.at(*cell.ptm_b).get() : nullptr, labels};
            auto spec = model::ModelSpec::make(cell.kind, ds.a->dim(),
                                               ds.b ? std::optional<std::size_t>(ds.b->dim()) : std::nullopt);
            TrainConfig cfg = config;
            cfg.seed = seed;
            auto result = train(spec, ds, cfg);
            for (data::Split s : test_splits) {
                const Metrics m = evaluate(result.model, s, ds);
                per_cell[idx].push_back({name, std::string(model::kind_name(cell.kind)), std::string(data::split_name(s)),
                                         m.mae, m.mse, result.report.stopped_epoch, seed, ""});
            }
        } catch (const std::exception& e) {
            per_cell[idx].clear();
            fail(e.what());
        }
    };

    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(cells.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
            });
        }
    }

    std::vector<GridRow> rows;
    for (auto& r : per_cell) rows.insert(rows.end(), r.begin(), r.end());
    return rows;
}

std::string format_grid_csv(const std::vector<GridRow>& rows) {
    std::string out = std::string(kGridCsvHeader) + "\n";
    for (const GridRow& r : rows) {
        out += csv_field(r.cell) + "," + r.kind + "," + r.split + "," + fixed6(r.mae) + "," + fixed6(r.mse) + "," +
               std::to_string(r.stopped_epoch) + "," + std::to_string(r.seed) + "," + csv_field(r.error) + "\n";
    }
    return out;
}

}  // namespace batchmos::train
