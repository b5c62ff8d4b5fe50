#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace biphoton {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// (key, counter) -> 128 random bits is a pure function, so independent
// substreams are just distinct counter prefixes: no state to hand around,
// and parallel frame generation is reproducible for any worker count.
namespace philox {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

using Block = std::array<std::uint32_t, 4>;

inline Block encrypt(Block ctr, std::uint32_t k0, std::uint32_t k1) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
        ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ k0, std::uint32_t(p1),
               std::uint32_t(p0 >> 32) ^ ctr[3] ^ k1, std::uint32_t(p0)};
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return ctr;
}

} // namespace philox

/// SplitMix64 finalizer; used to derive well-separated seeds for the
/// dark/near/far passes from one user seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// A reproducible random substream: (seed, stream index) fully determine the
/// sequence. Value semantics; one consumer at a time.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream)
        : key_lo_(std::uint32_t(seed)), key_hi_(std::uint32_t(seed >> 32)),
          stream_lo_(std::uint32_t(stream)), stream_hi_(std::uint32_t(stream >> 32)) {}

    std::uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buffer_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform double in (0, 1]; never returns 0 so log() is always safe.
    double uniform01() {
        return double((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n); n > 0. Lemire multiply-shift (no rejection;
    /// bias < 2^-64 per draw).
    std::uint64_t uniform_below(std::uint64_t n) {
        return std::uint64_t((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller; second value of each pair is cached.
    double normal() {
        if (have_cached_normal_) {
            have_cached_normal_ = false;
            return cached_normal_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        cached_normal_ = r * std::sin(t);
        have_cached_normal_ = true;
        return r * std::cos(t);
    }

    /// Poisson draw. Knuth's product method below the crossover, Hormann's
    /// PTRS transformed rejection above it.
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 30.0) {
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double p = 1.0;
            do {
                ++k;
                p *= uniform01();
            } while (p > limit);
            return k - 1;
        }
        return poisson_ptrs(mean);
    }

private:
    void refill() {
        buffer_ = philox::encrypt({counter_lo_, counter_hi_, stream_lo_, stream_hi_},
                                  key_lo_, key_hi_);
        pos_ = 0;
        if (++counter_lo_ == 0) ++counter_hi_;
    }

    // ln(k!) without std::lgamma (glibc's lgamma writes the global signgam,
    // which races across worker threads). Stirling series above the table.
    static double log_factorial(double k) {
        static constexpr double table[10] = {
            0.0, 0.0, 0.6931471805599453, 1.791759469228055, 3.1780538303479458,
            4.787491742782046, 6.579251212010101, 8.525161361065415,
            10.60460290274525, 12.801827480081469};
        if (k < 10.0) return table[int(k)];
        const double inv = 1.0 / (k + 1.0);
        const double inv2 = inv * inv;
        return (k + 0.5) * std::log(k + 1.0) - (k + 1.0) +
               0.9189385332046727 + // ln(2*pi)/2
               inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0));
    }

    std::uint64_t poisson_ptrs(double mean) {
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform01() - 0.5;
            const double v = uniform01();
            const double us = 0.5 - std::abs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return std::uint64_t(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
                kf * loglam - mean - log_factorial(kf)) {
                return std::uint64_t(kf);
            }
        }
    }

    std::uint32_t key_lo_, key_hi_;
    std::uint32_t stream_lo_, stream_hi_;
    std::uint32_t counter_lo_ = 0, counter_hi_ = 0;
    philox::Block buffer_{};
    int pos_ = 4;
    double cached_normal_ = 0.0;
    bool have_cached_normal_ = false;
};

/// Same (seed, index) always yields the same sequence; distinct indices give
/// statistically independent streams.
inline RandomStream derive_stream(std::uint64_t seed, std::uint64_t index) {
    return RandomStream(seed, index);
}

} // namespace biphoton
