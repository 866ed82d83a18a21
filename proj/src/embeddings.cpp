#include <cmath>

#include "batchmos/data.hpp"
#include "batchmos/errors.hpp"
#include "binary_io.hpp"

namespace batchmos::data {

EmbeddingTable::EmbeddingTable(std::string ptm_id, std::uint32_t dim) : ptm_id_(std::move(ptm_id)), dim_(dim) {
    if (dim_ == 0) throw DimensionError("embedding table '" + ptm_id_ + "': dim must be positive");
}

void EmbeddingTable::add(std::string clip_id, std::vector<float> vector) {
    if (vector.size() != dim_) throw DimensionError("embedding table '" + ptm_id_ + "'", "vector", vector.size(), dim_);
    if (index_.contains(clip_id)) {
        throw DataConsistencyError("embedding table '" + ptm_id_ + "': duplicate clip id '" + clip_id + "'");
    }
    index_.emplace(clip_id, records_.size());
    records_.push_back({std::move(clip_id), std::move(vector)});
}

bool EmbeddingTable::contains(std::string_view clip_id) const { return find(clip_id) != nullptr; }

const std::vector<float>* EmbeddingTable::find(std::string_view clip_id) const {
    const auto it = index_.find(std::string(clip_id));
    return it == index_.end() ? nullptr : &records_[it->second].vector;
}

std::vector<char> encode_embeddings(const EmbeddingTable& table) {
    if (table.size() > UINT32_MAX) throw Error("embedding table has too many records");
    detail::ByteWriter w;
    w.raw(kEmbeddingMagic);
    w.u32(kEmbeddingVersion);
    w.short_string(table.ptm_id(), "ptm_id");
    w.u32(table.dim());
    w.u32(static_cast<std::uint32_t>(table.size()));
    for (const EmbeddingRecord& r : table.records()) {
        w.short_string(r.clip_id, "clip_id");
        for (float v : r.vector) w.f32(v);
    }
    return w.bytes();
}

namespace {

EmbeddingHeader decode_header(detail::ByteReader& r) {
    if (r.remaining() < kEmbeddingMagic.size()) throw FormatError("not an SMOS embedding file (too short for magic)");
    if (r.raw(kEmbeddingMagic.size(), "magic") != kEmbeddingMagic) throw FormatError("not an SMOS embedding file (bad magic)");
    EmbeddingHeader h;
    h.version = r.u32("version");
    if (h.version != kEmbeddingVersion) {
        throw FormatError("unsupported SMOS version " + std::to_string(h.version));
    }
    h.ptm_id = r.short_string("ptm_id");
    const std::size_t dim_offset = r.offset();
    h.dim = r.u32("dim");
    if (h.dim == 0) throw CorruptionError("header dim is zero", dim_offset);
    h.count = r.u32("count");
    return h;
}

}  // namespace

EmbeddingTable decode_embeddings(std::vector<char> bytes) {
    detail::ByteReader r(std::move(bytes));
    const EmbeddingHeader h = decode_header(r);
    EmbeddingTable table(h.ptm_id, h.dim);
    for (std::uint32_t i = 0; i < h.count; ++i) {
        const std::size_t record_offset = r.offset();
        std::string clip_id = r.short_string("clip_id");
        r.need(static_cast<std::size_t>(h.dim) * 4, "record vector");
        std::vector<float> v(h.dim);
        for (float& x : v) x = r.f32("record vector");
        if (table.contains(clip_id)) throw CorruptionError("duplicate clip id '" + clip_id + "'", record_offset);
        table.add(std::move(clip_id), std::move(v));
    }
    if (r.remaining() != 0) {
        throw CorruptionError(std::to_string(r.remaining()) + " bytes past the last record (record length differs from header dim " +
                                  std::to_string(h.dim) + ")",
                              r.offset());
    }
    return table;
}

void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
    detail::write_file_atomic(path, encode_embeddings(table));
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
    try {
        return decode_embeddings(detail::read_file(path));
    } catch (const CorruptionError& e) {
        throw CorruptionError(path.string() + ": " + e.what(), e.offset());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

EmbeddingHeader read_embedding_header(const std::filesystem::path& path) {
    detail::ByteReader r(detail::read_file(path));
    return decode_header(r);
}

nn::Tensor gather(const EmbeddingTable& table, std::span<const std::string> clip_ids) {
    if (clip_ids.empty()) throw DataConsistencyError("gather: no clips requested");
    const std::size_t dim = table.dim();
    nn::Tensor out({clip_ids.size(), dim});
    auto values = out.data();
    for (std::size_t i = 0; i < clip_ids.size(); ++i) {
        const std::vector<float>* v = table.find(clip_ids[i]);
        if (v == nullptr) {
            throw DataConsistencyError("clip '" + clip_ids[i] + "' has no embedding in table '" + table.ptm_id() + "'");
        }
        for (std::size_t j = 0; j < dim; ++j) values[i * dim + j] = static_cast<double>((*v)[j]);
    }
    return out;
}

}  // namespace batchmos::data
