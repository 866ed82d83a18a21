#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "batchmos/checkpoint.hpp"
#include "batchmos/data.hpp"
#include "batchmos/errors.hpp"
#include "batchmos/layers.hpp"
#include "batchmos/losses.hpp"
#include "batchmos/model.hpp"
#include "batchmos/train.hpp"

namespace py = pybind11;
using namespace batchmos;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

nn::Tensor to_tensor(const Array& a) {
    if (a.ndim() == 0) throw DimensionError("expected an array with at least one axis");
    nn::Shape shape(a.shape(), a.shape() + a.ndim());
    return nn::Tensor::copy_of(std::move(shape), std::span<const double>(a.data(), static_cast<std::size_t>(a.size())));
}

Array to_array(const nn::Tensor& t) {
    Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

data::Split split_arg(const std::string& name) {
    if (auto s = data::parse_split(name)) return *s;
    throw py::value_error("unknown split '" + name + "'");
}

train::Dataset dataset(const data::EmbeddingTable& a, const data::EmbeddingTable* b,
                       const std::vector<data::ClipLabel>& labels) {
    return train::Dataset{&a, b, labels};
}

std::optional<std::size_t> dim_of(const data::EmbeddingTable* t) {
    return t ? std::optional<std::size_t>(t->dim()) : std::nullopt;
}

}  // namespace

PYBIND11_MODULE(_batchmos, m) {
    m.doc() = "MOS regression heads over pooled speech/music embeddings";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<CorruptionError>(m, "CorruptionError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<DataConsistencyError>(m, "DataConsistencyError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    // nn-core primitives

    m.def(
        "gate", [](const Array& x) { return to_array(nn::gate(to_tensor(x))); }, py::arg("x"),
        "sigmoid(x) * x, elementwise");
    m.def(
        "softmax", [](const Array& x) { return to_array(nn::softmax(to_tensor(x))); }, py::arg("x"),
        "Softmax over the last axis");
    m.def(
        "bhattacharyya_distance",
        [](const Array& p, const Array& q) { return nn::bhattacharyya_distance(to_tensor(p), to_tensor(q)); },
        py::arg("p"), py::arg("q"));
    m.attr("BHATTACHARYYA_EPSILON") = nn::kBhattacharyyaEpsilon;

    // data-store

    py::class_<data::EmbeddingTable>(m, "EmbeddingTable")
        .def(py::init<std::string, std::uint32_t>(), py::arg("ptm_id"), py::arg("dim"))
        .def_property_readonly("ptm_id", &data::EmbeddingTable::ptm_id)
        .def_property_readonly("dim", &data::EmbeddingTable::dim)
        .def("__len__", &data::EmbeddingTable::size)
        .def("__contains__", [](const data::EmbeddingTable& t, const std::string& id) { return t.contains(id); })
        .def("add", &data::EmbeddingTable::add, py::arg("clip_id"), py::arg("vector"))
        .def("clip_ids",
             [](const data::EmbeddingTable& t) {
                 std::vector<std::string> ids;
                 for (const auto& r : t.records()) ids.push_back(r.clip_id);
                 return ids;
             })
        .def("vector",
             [](const data::EmbeddingTable& t, const std::string& id) {
                 const auto* v = t.find(id);
                 if (v == nullptr) throw py::key_error(id);
                 return py::array_t<float>(static_cast<py::ssize_t>(v->size()), v->data());
             })
        .def(py::self == py::self);

    m.def("read_embeddings", &data::read_embeddings, py::arg("path"));
    m.def("write_embeddings", &data::write_embeddings, py::arg("table"), py::arg("path"));

    py::class_<data::ClipLabel>(m, "ClipLabel")
        .def(py::init([](std::string id, double mos, const std::string& split) {
                 return data::ClipLabel{std::move(id), mos, split_arg(split)};
             }),
             py::arg("clip_id"), py::arg("mos"), py::arg("split"))
        .def_readwrite("clip_id", &data::ClipLabel::clip_id)
        .def_readwrite("mos", &data::ClipLabel::mos)
        .def_property(
            "split", [](const data::ClipLabel& l) { return std::string(data::split_name(l.split)); },
            [](data::ClipLabel& l, const std::string& s) { l.split = split_arg(s); })
        .def("__repr__", [](const data::ClipLabel& l) {
            return "ClipLabel('" + l.clip_id + "', " + std::to_string(l.mos) + ", '" +
                   std::string(data::split_name(l.split)) + "')";
        });

    m.def("load_labels", &data::load_labels, py::arg("path"));
    m.def("write_labels", [](const std::vector<data::ClipLabel>& l, const std::filesystem::path& p) {
        data::write_labels(l, p);
    }, py::arg("labels"), py::arg("path"));

    m.def(
        "synth",
        [](std::uint64_t seed, std::uint32_t dim_a, std::uint32_t dim_b, std::array<std::size_t, 4> counts,
           double noise_sd) {
            auto d = data::synth_generate(seed, dim_a, dim_b, {counts[0], counts[1], counts[2], counts[3]}, noise_sd);
            return py::make_tuple(std::move(d.a), std::move(d.b), std::move(d.labels));
        },
        py::arg("seed"), py::arg("dim_a"), py::arg("dim_b"), py::arg("counts"), py::arg("noise_sd") = 0.1,
        "Planted-signal dataset: (table_a, table_b, labels)");

    // model-zoo

    py::class_<model::Model>(m, "Model")
        .def(py::init([](const std::string& kind, std::size_t dim_a, std::optional<std::size_t> dim_b,
                         std::uint64_t seed) {
                 return model::Model(model::ModelSpec::make(model::parse_kind(kind), dim_a, dim_b, seed));
             }),
             py::arg("kind"), py::arg("dim_a"), py::arg("dim_b") = py::none(), py::arg("seed") = 0)
        .def_property_readonly("kind", [](const model::Model& mdl) { return std::string(model::kind_name(mdl.spec().kind)); })
        .def_property_readonly("dim_a", [](const model::Model& mdl) { return mdl.spec().dim_a; })
        .def_property_readonly("dim_b", [](const model::Model& mdl) { return mdl.spec().dim_b; })
        .def_property_readonly("alpha", [](const model::Model& mdl) { return mdl.spec().alpha; })
        .def("parameter_count", &model::Model::parameter_count)
        .def(
            "forward",
            [](model::Model& mdl, const Array& a, std::optional<Array> b) {
                const nn::Tensor ta = to_tensor(a);
                std::optional<nn::Tensor> tb;
                if (b) tb = to_tensor(*b);
                auto out = mdl.forward(ta, tb ? &*tb : nullptr, false);
                return py::make_tuple(out.predictions, out.bd_value);
            },
            py::arg("a"), py::arg("b") = py::none(), "Eval-mode forward: (predictions, bd_value or None)")
        .def("save", [](const model::Model& mdl, const std::filesystem::path& p) { model::write_checkpoint(mdl, p); },
             py::arg("path"))
        .def_static("load", &model::read_checkpoint, py::arg("path"));

    // train-eval

    m.def(
        "train",
        [](const std::string& kind, const data::EmbeddingTable& a, const data::EmbeddingTable* b,
           const std::vector<data::ClipLabel>& labels, double lr, std::size_t batch_size, int max_epochs, double alpha,
           int patience, std::uint64_t seed, double dropout) {
            train::TrainConfig cfg{lr, batch_size, max_epochs, alpha, patience, seed, dropout};
            const auto spec = model::ModelSpec::make(model::parse_kind(kind), a.dim(), dim_of(b));
            auto result = [&] {
                py::gil_scoped_release release;
                return train::train(spec, dataset(a, b, labels), cfg);
            }();
            return py::make_tuple(std::move(result.model), train::report_json(result.report));
        },
        py::arg("kind"), py::arg("emb_a"), py::arg("emb_b") = nullptr, py::arg("labels"), py::arg("lr") = 1e-3,
        py::arg("batch_size") = 32, py::arg("max_epochs") = 50, py::arg("alpha") = 0.3, py::arg("patience") = 10,
        py::arg("seed") = 0, py::arg("dropout") = 0.3, "Train a model; returns (model, report_json)");

    m.def(
        "evaluate",
        [](model::Model& mdl, const data::EmbeddingTable& a, const data::EmbeddingTable* b,
           const std::vector<data::ClipLabel>& labels, const std::string& split) {
            const auto metrics = train::evaluate(mdl, split_arg(split), dataset(a, b, labels));
            return py::make_tuple(metrics.mae, metrics.mse);
        },
        py::arg("model"), py::arg("emb_a"), py::arg("emb_b") = nullptr, py::arg("labels"),
        py::arg("split") = "test-main", "(mae, mse) on one split");

    m.def(
        "predict",
        [](model::Model& mdl, const data::EmbeddingTable& a, const data::EmbeddingTable* b,
           const std::vector<std::string>& clip_ids) { return train::predict(mdl, dataset(a, b, {}), clip_ids); },
        py::arg("model"), py::arg("emb_a"), py::arg("emb_b") = nullptr, py::arg("clip_ids"));
}
