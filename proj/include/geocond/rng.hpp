#pragma once

#include <cmath>
#include <cstdint>

namespace geocond {

/// Deterministic counter-based generator (SplitMix64: Weyl increment +
/// finalizer). The integer and uniform streams are bit-identical across
/// platforms; normal draws go through Box-Muller and inherit libm's
/// log/cos, which is stable per toolchain.
class Rng {
   public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller, second draw of each pair cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    /// Independent child stream, e.g. one per frame so that worker count
    /// never changes results.
    Rng child(std::uint64_t stream_id) const {
        Rng c(state_ ^ (0xD1B54A32D192ED03ULL * (stream_id + 1)));
        c.next_u64();
        return c;
    }

   private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace geocond
