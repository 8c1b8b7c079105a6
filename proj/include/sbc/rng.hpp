#pragma once

#include <cmath>
#include <cstdint>

namespace sbc {

// Counter-based random numbers: every draw is a pure function of its
// coordinates, so ensembles are identical no matter how samples are
// scheduled across workers.

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t counter_key(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = mix64(seed ^ 0x8f5c1e39a2b47d63ULL);
    h = mix64(h ^ (a * 0xd6e8feb86659fd93ULL));
    h = mix64(h ^ (b * 0xa3ec647659359acdULL));
    h = mix64(h ^ (c * 0xc2b2ae3d27d4eb4fULL));
    return h;
}

/// Uniform in (0,1], 53-bit mantissa.
inline double uniform_from_key(std::uint64_t key) {
    return static_cast<double>((key >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal derived from a single key (Box-Muller, cosine branch).
inline double normal_from_key(std::uint64_t key) {
    const double u1 = uniform_from_key(key);
    const double u2 = uniform_from_key(mix64(key ^ 0x6a09e667f3bcc909ULL));
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
}

/// Gaussian increment for (sample, step, mode) with variance tau.
inline double gaussian_increment(std::uint64_t seed, std::uint64_t sample,
                                 std::uint64_t step, std::uint64_t mode,
                                 double tau) {
    return normal_from_key(counter_key(seed, sample, step, mode)) * std::sqrt(tau);
}

/// Small sequential generator for test probes and harness draws.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_ ^ 0x243f6a8885a308d3ULL);
    }
    double next_uniform() { return uniform_from_key(next_u64()); } // (0,1]
    double next_normal() { return normal_from_key(next_u64()); }
    /// Uniform in [lo, hi].
    double next_range(double lo, double hi) {
        return lo + (hi - lo) * next_uniform();
    }

private:
    std::uint64_t state_;
};

} // namespace sbc
