#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "abrnet/common.hpp"

namespace abrnet {

/// Deterministic random source. Wraps std::mt19937_64 but maps raw draws to
/// doubles by hand: std::uniform_real_distribution and friends are
/// implementation-defined, which would break the bitwise reproducibility
/// contracts. All randomness in the project flows through this class.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (no state between calls).
    double normal() {
        double u1 = 1.0 - uniform(); // (0, 1], keeps log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Uniform index in [0, n). Multiply-shift mapping, bias is negligible for
    /// the batch/index sizes used here.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Derives an independent stream seed from a master seed and a purpose tag
    /// (splitmix64 finalizer over the tag hash).
    static std::uint64_t derive(std::uint64_t seed, std::string_view tag) {
        std::uint64_t z = seed ^ fnv1a(tag.data(), tag.size());
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace abrnet
