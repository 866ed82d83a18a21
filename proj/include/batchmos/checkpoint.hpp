#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "batchmos/model.hpp"

namespace batchmos::model {

inline constexpr std::string_view kCheckpointMagic = "SMCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout, all little-endian:
//   "SMCK" | version u32
//   kind u32 | dim_a u32 | has_dim_b u8 | dim_b u32 | hidden u32
//   has_alpha u8 | alpha f64 | dropout_rate f64 | seed u64
//   layer_count u32
//   per layer, in Model::layers() order: weights f64[], bias f64[]
// Layer shapes are implied by the spec.

std::vector<char> encode_checkpoint(const Model& model);
Model decode_checkpoint(std::vector<char> bytes);
void write_checkpoint(const Model& model, const std::filesystem::path& path);
Model read_checkpoint(const std::filesystem::path& path);

struct CheckpointHeader {
    std::uint32_t version = 0;
    ModelSpec spec;
    std::uint32_t layer_count = 0;
};

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

}  // namespace batchmos::model
