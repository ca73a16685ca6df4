// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace deepbroadcast {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Deterministic random stream keyed by (seed, user, purpose).
///
/// Identical keys reproduce identical draws on any platform; distinct keys
/// give statistically independent streams. Streams are cheap value types,
/// one per (user, purpose) so concurrent consumers never share state.
/// Core generator is xoshiro256++ seeded through splitmix64.
class RngStream {
public:
    enum Purpose : std::uint64_t {
        kInit = 1,     // parameter initialization
        kGain = 2,     // fading channel gains
        kNoise = 3,    // channel noise
        kShuffle = 4,  // dataset epoch shuffles
        kSnrDraw = 5,  // per-batch SNR sampling
        kLatent = 6,   // reparameterization draws
        kEval = 7,     // evaluation noise seeds
        kGeneric = 8,
    };

    RngStream() : RngStream(0, 0, kGeneric) {}

    RngStream(std::uint64_t seed, std::uint64_t user, std::uint64_t purpose)
        : seed_(seed), user_(user), purpose_(purpose) {
        std::uint64_t sm = seed;
        sm ^= 0x6a09e667f3bcc908ULL + detail::splitmix64(sm);
        sm ^= (user + 0x3c6ef372fe94f82bULL) * 0xff51afd7ed558ccdULL;
        sm ^= detail::splitmix64(sm);
        sm ^= (purpose + 0xa54ff53a5f1d36f1ULL) * 0xc4ceb9fe1a85ec53ULL;
        for (auto& w : state_) w = detail::splitmix64(sm);
        has_spare_ = false;
        spare_ = 0.0;
    }

    /// Derived stream, independent of the parent and of other salts.
    /// Used for per-epoch re-keying so a resumed run replays the same draws.
    [[nodiscard]] RngStream fork(std::uint64_t salt) const {
        RngStream child(seed_ ^ (0x9e3779b97f4a7c15ULL * (salt + 1)), user_, purpose_);
        return child;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Unbiased uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        // Lemire multiply-shift rejection
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (second value cached).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0,1] so log() is finite
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Circularly-symmetric complex normal CN(0, 1): each component N(0, 1/2).
    std::complex<double> complex_gaussian_unit() {
        constexpr double kHalfStd = 0.70710678118654752440;  // sqrt(1/2)
        const double re = gaussian() * kHalfStd;
        const double im = gaussian() * kHalfStd;
        return {re, im};
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t user() const { return user_; }
    std::uint64_t purpose() const { return purpose_; }

private:
    std::uint64_t state_[4]{};
    std::uint64_t seed_ = 0, user_ = 0, purpose_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace deepbroadcast
