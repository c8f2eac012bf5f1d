#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace srcloc {

/// Seedable random stream used by every stochastic component.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniform and normal variates are generated here rather than with
/// the <random> distributions, which are implementation-defined, so a given
/// seed produces the same numbers with every standard library.
///
/// Streams are split by name: `Rng::stream(seed, "noise", k)` hashes the
/// global seed, a tag and an index into an independent engine seed. Per-item
/// streams make results independent of execution order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng stream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);
    static std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();

    /// Standard normal by the Box-Muller transform (pairs are cached).
    double normal();

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

} // namespace srcloc
