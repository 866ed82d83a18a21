#include "batchmos/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <ostream>

#include "batchmos/checkpoint.hpp"
#include "batchmos/data.hpp"
#include "batchmos/errors.hpp"
#include "batchmos/train.hpp"
#include "binary_io.hpp"

namespace batchmos::cli {

namespace fs = std::filesystem;

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::optional<fs::path> data_root() {
    if (const char* env = std::getenv("SMOS_DATA_ROOT"); env != nullptr && *env != '\0') return fs::path(env);
    return std::nullopt;
}

/// Relative inputs that do not exist locally are looked up under SMOS_DATA_ROOT.
fs::path resolve_input(const std::string& p) {
    fs::path path(p);
    if (path.is_relative() && !fs::exists(path)) {
        if (auto root = data_root(); root && fs::exists(*root / path)) return *root / path;
    }
    if (!fs::exists(path)) throw IoError("no such file: " + path.string());
    return path;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    detail::write_file_atomic(path, std::vector<char>(text.begin(), text.end()));
}

struct SynthArgs {
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> dims{512, 192};
    std::vector<std::size_t> counts{1000, 200, 200, 200};
    double noise_sd = 0.1;
    std::string out;
};

struct TrainArgs {
    std::string model;
    std::string emb_a, emb_b, labels;
    std::string out_checkpoint, out_report;
    train::TrainConfig config;
};

struct EvalArgs {
    std::string checkpoint, emb_a, emb_b, labels;
    std::string split = "test-main";
    std::string clip_id;
};

struct GridArgs {
    std::string manifest, out, data_root;
    unsigned workers = 1;
    train::TrainConfig config;
};

void add_train_config(CLI::App* cmd, train::TrainConfig& c) {
    cmd->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--batch-size", c.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--max-epochs", c.max_epochs, "Epoch budget")->capture_default_str();
    cmd->add_option("--patience", c.patience, "Early-stopping patience in epochs (0 disables)")->capture_default_str();
    cmd->add_option("--dropout", c.dropout_rate, "Dropout rate after the hidden dense layer")->capture_default_str();
    cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
}

int do_synth(const SynthArgs& a, std::ostream& out) {
    if (a.dims.size() != 2) throw CLI::ValidationError("--dims", "expects two values: dim_a,dim_b");
    if (a.counts.size() != 4) throw CLI::ValidationError("--counts", "expects four values: train,dev,test-main,test-other1");
    const data::SynthCounts counts{a.counts[0], a.counts[1], a.counts[2], a.counts[3]};
    const auto synth = data::synth_generate(a.seed, a.dims[0], a.dims[1], counts, a.noise_sd);
    const fs::path dir(a.out);
    fs::create_directories(dir);
    data::write_embeddings(synth.a, dir / "synth_a.smos");
    data::write_embeddings(synth.b, dir / "synth_b.smos");
    data::write_labels(synth.labels, dir / "labels.csv");
    out << "wrote " << synth.labels.size() << " clips to " << dir.string() << "\n";
    return kExitOk;
}

struct LoadedData {
    data::EmbeddingTable a;
    std::optional<data::EmbeddingTable> b;
    std::vector<data::ClipLabel> labels;

    train::Dataset view() const { return train::Dataset{&a, b ? &*b : nullptr, labels}; }
};

LoadedData load_data(const std::string& emb_a, const std::string& emb_b, const std::string& labels) {
    LoadedData d;
    d.a = data::read_embeddings(resolve_input(emb_a));
    if (!emb_b.empty()) d.b = data::read_embeddings(resolve_input(emb_b));
    if (!labels.empty()) d.labels = data::load_labels(resolve_input(labels));
    return d;
}

int do_train(const TrainArgs& a, std::ostream& out) {
    const model::ModelKind kind = model::parse_kind(a.model);
    if (model::is_fusion(kind) && a.emb_b.empty()) throw ConfigError("--model " + a.model + " requires --emb-b");
    if (!model::is_fusion(kind) && !a.emb_b.empty()) throw ConfigError("--model " + a.model + " takes a single embedding");
    const LoadedData d = load_data(a.emb_a, a.emb_b, a.labels);
    const auto spec = model::ModelSpec::make(kind, d.a.dim(), d.b ? std::optional<std::size_t>(d.b->dim()) : std::nullopt);
    auto result = train::train(spec, d.view(), a.config);
    if (!a.out_checkpoint.empty()) model::write_checkpoint(result.model, a.out_checkpoint);
    if (!a.out_report.empty()) write_text_atomic(a.out_report, train::report_json(result.report));
    out << "best_epoch " << result.report.best_epoch << "\n";
    out << "stopped_epoch " << result.report.stopped_epoch << "\n";
    for (const auto& [split, m] : result.report.test_metrics) {
        out << split << " mae " << fixed6(m.mae) << " mse " << fixed6(m.mse) << "\n";
    }
    return kExitOk;
}

model::Model load_model_for(const EvalArgs& a, const LoadedData& d) {
    model::Model m = model::read_checkpoint(resolve_input(a.checkpoint));
    const auto& spec = m.spec();
    if (d.a.dim() != spec.dim_a) throw DimensionError("checkpoint vs --emb-a", "embedding", d.a.dim(), spec.dim_a);
    if (model::is_fusion(spec.kind)) {
        if (!d.b) throw ConfigError("checkpoint is a fusion model; --emb-b is required");
        if (d.b->dim() != *spec.dim_b) throw DimensionError("checkpoint vs --emb-b", "embedding", d.b->dim(), *spec.dim_b);
    } else if (d.b) {
        throw ConfigError("checkpoint is a single-embedding model; --emb-b is not accepted");
    }
    return m;
}

int do_evaluate(const EvalArgs& a, std::ostream& out) {
    const auto split = data::parse_split(a.split);
    if (!split) throw CLI::ValidationError("--split", "unknown split '" + a.split + "'");
    const LoadedData d = load_data(a.emb_a, a.emb_b, a.labels);
    model::Model m = load_model_for(a, d);
    const train::Metrics metrics = train::evaluate(m, *split, d.view());
    out << "mae " << fixed6(metrics.mae) << "\n";
    out << "mse " << fixed6(metrics.mse) << "\n";
    return kExitOk;
}

int do_predict(const EvalArgs& a, std::ostream& out) {
    const LoadedData d = load_data(a.emb_a, a.emb_b, "");
    model::Model m = load_model_for(a, d);
    const std::vector<std::string> ids{a.clip_id};
    out << fixed6(train::predict(m, d.view(), ids).at(0)) << "\n";
    return kExitOk;
}

std::vector<train::GridCell> parse_manifest(const std::string& manifest) {
    if (manifest == "builtin:single") return train::single_model_grid();
    if (manifest == "builtin:fusion") return train::fusion_grid();
    std::ifstream in(resolve_input(manifest));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest " + manifest + ": " + e.what());
    }
    if (!j.is_array()) throw FormatError("manifest " + manifest + ": expected a JSON list of cells");
    std::vector<train::GridCell> cells;
    for (const auto& c : j) {
        try {
            train::GridCell cell;
            cell.ptm_a = c.at("a").get<std::string>();
            if (c.contains("b") && !c.at("b").is_null()) cell.ptm_b = c.at("b").get<std::string>();
            cell.kind = model::parse_kind(c.at("kind").get<std::string>());
            cells.push_back(std::move(cell));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("manifest " + manifest + ": bad cell " + c.dump() + ": " + e.what());
        }
    }
    return cells;
}

int do_grid(const GridArgs& a, std::ostream& out) {
    const auto cells = parse_manifest(a.manifest);
    fs::path root;
    if (!a.data_root.empty()) {
        root = a.data_root;
    } else if (auto env = data_root()) {
        root = *env;
    } else {
        throw ConfigError("grid needs --data-root or SMOS_DATA_ROOT");
    }
    const auto rows = train::run_grid(cells, root, a.config, a.workers);
    const std::string csv = train::format_grid_csv(rows);
    if (a.out == "-") {
        out << csv;
    } else {
        write_text_atomic(a.out, csv);
        out << "wrote " << rows.size() << " rows to " << a.out << "\n";
    }
    return kExitOk;
}

int do_inspect(const std::string& file, std::ostream& out) {
    const fs::path path = resolve_input(file);
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    in.read(magic, 4);
    const std::string_view m(magic, static_cast<std::size_t>(in.gcount()));
    if (m == data::kEmbeddingMagic) {
        const auto h = data::read_embedding_header(path);
        out << "format SMOS\n"
            << "version " << h.version << "\n"
            << "ptm_id " << h.ptm_id << "\n"
            << "dim " << h.dim << "\n"
            << "count " << h.count << "\n";
    } else if (m == model::kCheckpointMagic) {
        const auto h = model::read_checkpoint_header(path);
        const auto& s = h.spec;
        out << "format SMCK\n"
            << "version " << h.version << "\n"
            << "kind " << model::kind_name(s.kind) << "\n"
            << "dim_a " << s.dim_a << "\n";
        if (s.dim_b) out << "dim_b " << *s.dim_b << "\n";
        out << "hidden " << s.hidden << "\n";
        if (s.alpha) out << "alpha " << fixed6(*s.alpha) << "\n";
        out << "dropout_rate " << fixed6(s.dropout_rate) << "\n"
            << "seed " << s.seed << "\n"
            << "layers " << h.layer_count << "\n"
            << "parameters " << model::Model(s).parameter_count() << "\n";
    } else {
        throw FormatError(path.string() + ": neither an SMOS embedding file nor an SMCK checkpoint");
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Singing-voice MOS prediction from pre-trained model embeddings", "batchmos"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-signal synthetic dataset");
    synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
    synth_cmd->add_option("--dims", synth.dims, "Embedding dims dim_a,dim_b")->delimiter(',')->expected(2)->capture_default_str();
    synth_cmd->add_option("--counts", synth.counts, "Clips per split train,dev,test-main,test-other1")
        ->delimiter(',')
        ->expected(4)
        ->capture_default_str();
    synth_cmd->add_option("--noise-sd", synth.noise_sd, "Noise standard deviation")->capture_default_str();
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a model and evaluate it on the test splits");
    train_cmd->add_option("--model", tr.model, "Architecture")
        ->required()
        ->check(CLI::IsMember({"fcn", "cnn", "concat", "batch"}));
    train_cmd->add_option("--emb-a", tr.emb_a, "Embedding file for branch a")->required();
    train_cmd->add_option("--emb-b", tr.emb_b, "Embedding file for branch b (fusion models)");
    train_cmd->add_option("--labels", tr.labels, "Label CSV")->required();
    train_cmd->add_option("--alpha", tr.config.alpha, "Weight of the Bhattacharyya loss")->capture_default_str();
    add_train_config(train_cmd, tr.config);
    train_cmd->add_option("--out-checkpoint", tr.out_checkpoint, "Checkpoint output path");
    train_cmd->add_option("--out-report", tr.out_report, "Training report JSON output path");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "Print MAE and MSE of a checkpoint on one split");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--emb-a", ev.emb_a, "Embedding file for branch a")->required();
    eval_cmd->add_option("--emb-b", ev.emb_b, "Embedding file for branch b (fusion models)");
    eval_cmd->add_option("--labels", ev.labels, "Label CSV")->required();
    eval_cmd->add_option("--split", ev.split, "train, dev, test-main or test-other1")->capture_default_str();

    EvalArgs pr;
    auto* predict_cmd = app.add_subcommand("predict", "Print the predicted MOS of one clip");
    predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
    predict_cmd->add_option("--emb-a", pr.emb_a, "Embedding file for branch a")->required();
    predict_cmd->add_option("--emb-b", pr.emb_b, "Embedding file for branch b (fusion models)");
    predict_cmd->add_option("--clip-id", pr.clip_id, "Clip to score")->required();

    GridArgs gr;
    auto* grid_cmd = app.add_subcommand("grid", "Train and evaluate every cell of a manifest");
    grid_cmd->add_option("--manifest", gr.manifest, "JSON list of cells, or builtin:single / builtin:fusion")->required();
    grid_cmd->add_option("--out", gr.out, "Results CSV path, '-' for stdout")->required();
    grid_cmd->add_option("--data-root", gr.data_root, "Directory with <ptm>.smos and labels.csv (default $SMOS_DATA_ROOT)");
    grid_cmd->add_option("--workers", gr.workers, "Cells trained in parallel")->capture_default_str();
    grid_cmd->add_option("--alpha", gr.config.alpha, "Weight of the Bhattacharyya loss")->capture_default_str();
    add_train_config(grid_cmd, gr.config);

    std::string inspect_file;
    auto* inspect_cmd = app.add_subcommand("inspect", "Print the header of an SMOS or SMCK file");
    inspect_cmd->add_option("--file", inspect_file, "File to inspect")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) return do_synth(synth, out);
        if (train_cmd->parsed()) return do_train(tr, out);
        if (eval_cmd->parsed()) return do_evaluate(ev, out);
        if (predict_cmd->parsed()) return do_predict(pr, out);
        if (grid_cmd->parsed()) return do_grid(gr, out);
        if (inspect_cmd->parsed()) return do_inspect(inspect_file, out);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace batchmos::cli
