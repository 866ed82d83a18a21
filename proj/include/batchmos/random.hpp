#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace batchmos {

/// Seeded generator with platform-independent derived distributions.
///
/// The standard library distributions are implementation-defined, so uniform
/// and gaussian draws are computed here directly from the 64-bit engine output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double gaussian();

    /// Unbiased integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// splitmix64 finalizer; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text) noexcept;

}  // namespace batchmos
