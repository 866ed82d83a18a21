#include "batchmos/checkpoint.hpp"

#include "batchmos/errors.hpp"
#include "binary_io.hpp"

namespace batchmos::model {

namespace {

void encode_spec(detail::ByteWriter& w, const ModelSpec& s) {
    w.u32(static_cast<std::uint32_t>(s.kind));
    w.u32(static_cast<std::uint32_t>(s.dim_a));
    w.u8(s.dim_b.has_value() ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(s.dim_b.value_or(0)));
    w.u32(static_cast<std::uint32_t>(s.hidden));
    w.u8(s.alpha.has_value() ? 1 : 0);
    w.f64(s.alpha.value_or(0.0));
    w.f64(s.dropout_rate);
    w.u64(s.seed);
}

CheckpointHeader decode_header(detail::ByteReader& r) {
    if (r.remaining() < kCheckpointMagic.size()) throw FormatError("not an SMCK checkpoint (too short for magic)");
    if (r.raw(kCheckpointMagic.size(), "magic") != kCheckpointMagic) throw FormatError("not an SMCK checkpoint (bad magic)");
    CheckpointHeader h;
    h.version = r.u32("version");
    if (h.version != kCheckpointVersion) throw FormatError("unsupported SMCK version " + std::to_string(h.version));

    const std::size_t spec_offset = r.offset();
    const std::uint32_t kind = r.u32("kind");
    if (kind > static_cast<std::uint32_t>(ModelKind::BatchFusion)) {
        throw CorruptionError("unknown model kind " + std::to_string(kind), spec_offset);
    }
    ModelSpec& s = h.spec;
    s.kind = static_cast<ModelKind>(kind);
    s.dim_a = r.u32("dim_a");
    const bool has_b = r.u8("has_dim_b") != 0;
    const std::uint32_t dim_b = r.u32("dim_b");
    if (has_b) s.dim_b = dim_b;
    s.hidden = r.u32("hidden");
    const bool has_alpha = r.u8("has_alpha") != 0;
    const double alpha = r.f64("alpha");
    if (has_alpha) s.alpha = alpha;
    s.dropout_rate = r.f64("dropout_rate");
    s.seed = r.u64("seed");
    try {
        s.validate();
    } catch (const ConfigError& e) {
        throw CorruptionError(std::string("invalid model spec: ") + e.what(), spec_offset);
    }
    h.layer_count = r.u32("layer_count");
    return h;
}

}  // namespace

std::vector<char> encode_checkpoint(const Model& model) {
    detail::ByteWriter w;
    w.raw(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    encode_spec(w, model.spec());
    w.u32(static_cast<std::uint32_t>(model.layers().size()));
    for (const nn::LayerParams& p : model.layers()) {
        for (double v : p.weights.data()) w.f64(v);
        for (double v : p.bias.data()) w.f64(v);
    }
    return w.bytes();
}

Model decode_checkpoint(std::vector<char> bytes) {
    detail::ByteReader r(std::move(bytes));
    const CheckpointHeader h = decode_header(r);
    Model model(h.spec);
    if (h.layer_count != model.layers().size()) {
        throw CorruptionError("layer count " + std::to_string(h.layer_count) + " does not match the " +
                                  std::string(kind_name(h.spec.kind)) + " architecture",
                              r.offset() - 4);
    }
    for (nn::LayerParams& p : model.layers()) {
        r.need((p.weights.size() + p.bias.size()) * 8, "layer parameters");
        for (double& v : p.weights.data()) v = r.f64("weights");
        for (double& v : p.bias.data()) v = r.f64("bias");
    }
    if (r.remaining() != 0) throw CorruptionError("unexpected trailing bytes", r.offset());
    return model;
}

void write_checkpoint(const Model& model, const std::filesystem::path& path) {
    detail::write_file_atomic(path, encode_checkpoint(model));
}

Model read_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(detail::read_file(path));
    } catch (const CorruptionError& e) {
        throw CorruptionError(path.string() + ": " + e.what(), e.offset());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
    detail::ByteReader r(detail::read_file(path));
    return decode_header(r);
}

}  // namespace batchmos::model
