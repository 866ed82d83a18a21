#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "batchmos/tensor.hpp"

namespace batchmos::data {

inline constexpr std::string_view kEmbeddingMagic = "SMOS";
inline constexpr std::uint32_t kEmbeddingVersion = 1;

struct EmbeddingRecord {
    std::string clip_id;
    std::vector<float> vector;

    friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// Pooled PTM embeddings for a set of clips, in manifest order.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::string ptm_id, std::uint32_t dim);

    const std::string& ptm_id() const noexcept { return ptm_id_; }
    std::uint32_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return records_.size(); }
    const std::vector<EmbeddingRecord>& records() const noexcept { return records_; }

    /// Appends a record. Throws on a wrong length or a duplicate clip id.
    void add(std::string clip_id, std::vector<float> vector);

    bool contains(std::string_view clip_id) const;
    /// nullptr when absent.
    const std::vector<float>* find(std::string_view clip_id) const;

    friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
        return a.ptm_id_ == b.ptm_id_ && a.dim_ == b.dim_ && a.records_ == b.records_;
    }

private:
    std::string ptm_id_;
    std::uint32_t dim_ = 0;
    std::vector<EmbeddingRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

std::vector<char> encode_embeddings(const EmbeddingTable& table);
EmbeddingTable decode_embeddings(std::vector<char> bytes);
void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable read_embeddings(const std::filesystem::path& path);

struct EmbeddingHeader {
    std::uint32_t version = 0;
    std::string ptm_id;
    std::uint32_t dim = 0;
    std::uint32_t count = 0;
};

/// Header fields only; records are not validated.
EmbeddingHeader read_embedding_header(const std::filesystem::path& path);

enum class Split { Train, Dev, TestMain, TestOther1 };

inline constexpr std::array<Split, 4> kAllSplits = {Split::Train, Split::Dev, Split::TestMain, Split::TestOther1};

/// "train", "dev", "test-main", "test-other1".
std::string_view split_name(Split split) noexcept;
std::optional<Split> parse_split(std::string_view token) noexcept;

struct ClipLabel {
    std::string clip_id;
    double mos = 0.0;
    Split split = Split::Train;

    friend bool operator==(const ClipLabel&, const ClipLabel&) = default;
};

/// Parses a `clip_id,mos,split` CSV. Row numbers in errors are 1-based and
/// count the header as row 1.
std::vector<ClipLabel> parse_labels(std::string_view text);
std::vector<ClipLabel> load_labels(const std::filesystem::path& path);
std::string format_labels(std::span<const ClipLabel> labels);
void write_labels(std::span<const ClipLabel> labels, const std::filesystem::path& path);

std::vector<ClipLabel> labels_in(std::span<const ClipLabel> labels, Split split);

/// Deterministic shuffled batches of `clip_ids` for one epoch. The last batch
/// may be short.
std::vector<std::vector<std::string>> make_batches(std::span<const std::string> clip_ids, std::uint64_t seed,
                                                   std::size_t batch_size, std::uint64_t epoch);

/// Stack the vectors of `clip_ids` into an [n x dim] tensor, promoting to double.
nn::Tensor gather(const EmbeddingTable& table, std::span<const std::string> clip_ids);

struct SynthCounts {
    std::size_t train = 0;
    std::size_t dev = 0;
    std::size_t test_main = 0;
    std::size_t test_other1 = 0;
};

struct SynthData {
    EmbeddingTable a;
    EmbeddingTable b;
    std::vector<ClipLabel> labels;
};

/// Planted-signal dataset: each clip draws a latent quality q ~ U[1, 5];
/// vector = w * q + noise_sd * N(0, I) for a fixed random direction w per
/// table, and mos = clamp(q + noise_sd * N(0, 1), 1, 5).
SynthData synth_generate(std::uint64_t seed, std::uint32_t dim_a, std::uint32_t dim_b, const SynthCounts& counts,
                         double noise_sd);

}  // namespace batchmos::data
