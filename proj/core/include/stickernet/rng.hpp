#pragma once

#include <cstdint>
#include <random>

namespace stickernet {

/// splitmix64 finalizer; used to derive independent seeds from (seed, index) pairs.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0);

/// FNV-1a over a byte string.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t basis = 1469598103934665603ULL);

/// Seeded generator with distribution code that does not depend on the
/// standard library's (implementation-defined) distribution algorithms, so
/// datasets are byte-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

}  // namespace stickernet
