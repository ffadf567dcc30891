#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace delicate {

// PCG32 (XSH-RR variant). One root seed per run; consumers fork named
// sub-streams so that toggling one consumer (e.g. dropout) does not shift
// the draws seen by another (e.g. masking).
class Rng {
public:
    // Stream ids used across the project. Fixed so runs are reproducible
    // from (seed) alone.
    enum Stream : std::uint64_t {
        kInit = 1,
        kMask = 2,
        kDropout = 3,
        kShuffle = 4,
        kData = 5,
        kCorpus = 6,
    };

    Rng() : Rng(0, 0) {}

    Rng(std::uint64_t seed, std::uint64_t stream) {
        inc_ = (stream << 1u) | 1u;
        state_ = 0u;
        next_u32();
        state_ += seed + kMixConstant;
        next_u32();
    }

    Rng fork(std::uint64_t stream) const {
        Rng r;
        r.state_ = state_ ^ (kMixConstant * (stream + 1));
        r.inc_ = (stream << 1u) | 1u;
        r.next_u32();
        return r;
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32u) | next_u32();
    }

    // Unbiased integer in [0, bound).
    std::uint32_t below(std::uint32_t bound) {
        std::uint32_t threshold = (-bound) % bound;
        for (;;) {
            std::uint32_t r = next_u32();
            if (r >= threshold) return r % bound;
        }
    }

    // 53-bit uniform double in [0, 1).
    double uniform() {
        std::uint64_t a = next_u32() >> 5u;   // 27 bits
        std::uint64_t b = next_u32() >> 6u;   // 26 bits
        return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) / 9007199254740992.0;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller with cached spare.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // avoid log(0)
        double u2 = uniform();
        double mag = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586476925286766559;
        spare_ = mag * std::sin(two_pi * u2);
        has_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

    // Gaussian with mean 0, std `stddev`, resampled until |x| <= 2*stddev.
    double truncated_gaussian(double stddev) {
        for (;;) {
            double x = gaussian() * stddev;
            if (std::fabs(x) <= 2.0 * stddev) return x;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() <= 1) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::uint32_t j = below(static_cast<std::uint32_t>(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    static constexpr std::uint64_t kMixConstant = 0x9E3779B97F4A7C15ULL;

    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 1;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace delicate
