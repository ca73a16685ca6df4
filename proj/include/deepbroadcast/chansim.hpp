// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "deepbroadcast/error.hpp"
#include "deepbroadcast/rng.hpp"
#include "deepbroadcast/tensor.hpp"

namespace deepbroadcast::chansim {

enum class ChannelKind { awgn, rayleigh, rician };
enum class FadingMode { per_symbol, per_block };

inline const char* to_string(ChannelKind k) {
    switch (k) {
        case ChannelKind::awgn: return "awgn";
        case ChannelKind::rayleigh: return "rayleigh";
        case ChannelKind::rician: return "rician";
    }
    return "?";
}

inline ChannelKind channel_kind_from_string(const std::string& s) {
    if (s == "awgn") return ChannelKind::awgn;
    if (s == "rayleigh") return ChannelKind::rayleigh;
    if (s == "rician") return ChannelKind::rician;
    throw config_error("unknown channel kind: " + s);
}

/// Static description of one user's physical channel.
struct ChannelSpec {
    ChannelKind kind = ChannelKind::awgn;
    double rician_a = 0.0;  // line-of-sight coefficient, dimensionless
    double snr_db = 10.0;   // +inf disables noise
    FadingMode fading_mode = FadingMode::per_symbol;
    bool equalize = true;  // perfect-CSI division at the receiver

    bool is_fading() const { return kind != ChannelKind::awgn; }

    void validate() const {
        if (kind == ChannelKind::rician && !(rician_a > 0.0))
            throw config_error("rician channel requires rician_a > 0, got " +
                               std::to_string(rician_a));
        if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
            throw config_error("snr_db must be finite or +inf");
    }
};

/// One sampled channel draw: complex gains (one per complex symbol, or a
/// single entry in per_block mode; identically one for AWGN) plus the noise
/// variance carried by each real signal component.
template <class T>
struct ChannelRealization {
    std::vector<std::complex<T>> gains;
    T noise_variance = 0;
};

template <class T>
struct ReceivedSignal {
    std::vector<T> values;
    ChannelRealization<T> realization;
};

/// Unit-power scaling: s / sqrt(mean(s_j^2)). The mean square is accumulated
/// in double so the result holds unit power to ~1e-7 even in float.
template <class T>
void power_normalize_inplace(std::span<T> s) {
    if (s.empty()) throw degenerate_signal_error("power_normalize: empty signal");
    double ms = 0.0;
    for (const T x : s) ms += static_cast<double>(x) * static_cast<double>(x);
    ms /= static_cast<double>(s.size());
    if (ms == 0.0) throw degenerate_signal_error("power_normalize: all-zero signal");
    const T inv = static_cast<T>(1.0 / std::sqrt(ms));
    for (T& x : s) x *= inv;
}

template <class T>
std::vector<T> power_normalize(std::span<const T> s) {
    std::vector<T> out(s.begin(), s.end());
    power_normalize_inplace(std::span<T>(out));
    return out;
}

/// Noise power budget for a signal of power `signal_power` at the given SNR.
/// For complex channels each real component carries half of the budget
/// computed at the complex-symbol power.
inline double snr_db_to_noise_variance(double snr_db, double signal_power = 1.0) {
    if (!(signal_power > 0.0)) throw config_error("snr_db_to_noise_variance: signal_power <= 0");
    if (snr_db == std::numeric_limits<double>::infinity()) return 0.0;
    return signal_power * std::pow(10.0, -snr_db / 10.0);
}

/// (mu, sigma) of the Rician gain distribution CN(mu, sigma^2 I); sigma is
/// the total complex standard deviation so that E|h|^2 = mu^2 + sigma^2 = 1.
inline std::pair<double, double> rician_params(double a) {
    if (!(a > 0.0)) throw config_error("rician coefficient must be positive");
    return {std::sqrt(a / (a + 1.0)), std::sqrt(1.0 / (a + 1.0))};
}

/// Noise variance per real signal component at unit per-component signal
/// power. Same value for real (AWGN) and complex (fading) channels, which
/// keeps the empirical SNR at the configured value in both cases.
inline double noise_variance_per_component(double snr_db) {
    return snr_db_to_noise_variance(snr_db, 2.0) / 2.0;
}

/// Draw channel gains for `n_symbols` complex symbols.
template <class T>
ChannelRealization<T> sample_gain(const ChannelSpec& spec, std::int64_t n_symbols,
                                  RngStream& rng) {
    spec.validate();
    if (n_symbols < 1) throw config_error("sample_gain: n_symbols must be >= 1");
    ChannelRealization<T> out;
    out.noise_variance = static_cast<T>(noise_variance_per_component(spec.snr_db));
    const std::int64_t n_draws =
        (spec.kind == ChannelKind::awgn) ? 1
        : (spec.fading_mode == FadingMode::per_block) ? 1
                                                      : n_symbols;
    out.gains.reserve(static_cast<std::size_t>(n_draws));
    switch (spec.kind) {
        case ChannelKind::awgn:
            out.gains.emplace_back(T(1), T(0));
            break;
        case ChannelKind::rayleigh:
            for (std::int64_t i = 0; i < n_draws; ++i) {
                const auto g = rng.complex_gaussian_unit();
                out.gains.emplace_back(static_cast<T>(g.real()), static_cast<T>(g.imag()));
            }
            break;
        case ChannelKind::rician: {
            const auto [mu, sigma] = rician_params(spec.rician_a);
            for (std::int64_t i = 0; i < n_draws; ++i) {
                const auto g = rng.complex_gaussian_unit();
                out.gains.emplace_back(static_cast<T>(mu + sigma * g.real()),
                                       static_cast<T>(sigma * g.imag()));
            }
            break;
        }
    }
    return out;
}

/// Push one real symbol vector through the channel: zh = h*z + n over complex
/// symbols (consecutive real pairs form one complex symbol), optionally
/// followed by perfect-CSI equalization. The equalized path is computed as
/// z + n/h, which restores z exactly when noise is disabled.
template <class T>
ReceivedSignal<T> transmit(std::span<const T> z, const ChannelSpec& spec, RngStream& rng) {
    spec.validate();
    const std::int64_t L = static_cast<std::int64_t>(z.size());
    if (L < 1) throw degenerate_signal_error("transmit: empty signal");

    ReceivedSignal<T> out;
    out.values.assign(z.begin(), z.end());

    if (spec.kind == ChannelKind::awgn) {
        out.realization.gains.emplace_back(T(1), T(0));
        const double v = noise_variance_per_component(spec.snr_db);
        out.realization.noise_variance = static_cast<T>(v);
        if (v > 0.0) {
            const double sd = std::sqrt(v);
            for (auto& x : out.values) x += static_cast<T>(sd * rng.gaussian());
        }
        return out;
    }

    if (L % 2 != 0)
        throw shape_error("transmit: fading channels need an even symbol count, got " +
                          std::to_string(L));
    const std::int64_t n_sym = L / 2;
    out.realization = sample_gain<T>(spec, n_sym, rng);
    const double v = out.realization.noise_variance;
    const double sd = v > 0.0 ? std::sqrt(v) : 0.0;
    const bool block = spec.fading_mode == FadingMode::per_block;

    for (std::int64_t sidx = 0; sidx < n_sym; ++sidx) {
        const std::complex<T> h = block ? out.realization.gains[0]
                                        : out.realization.gains[static_cast<std::size_t>(sidx)];
        const std::complex<T> zc(out.values[2 * sidx], out.values[2 * sidx + 1]);
        std::complex<T> n(0, 0);
        if (sd > 0.0)
            n = {static_cast<T>(sd * rng.gaussian()), static_cast<T>(sd * rng.gaussian())};
        std::complex<T> zh;
        if (spec.equalize) {
            zh = zc + n / h;
        } else {
            zh = h * zc + n;
        }
        out.values[2 * sidx] = zh.real();
        out.values[2 * sidx + 1] = zh.imag();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batched form used by training and evaluation: one realization per row of a
// (B, L) signal matrix. apply() is separated from sampling so that a fixed
// realization can be replayed against several signals (and so gradients can
// be taken through the channel with h, n held fixed).
// ---------------------------------------------------------------------------

template <class T>
struct BatchRealization {
    ChannelSpec spec;
    std::int64_t batch = 0, length = 0;
    std::vector<std::complex<T>> gains;  // (B * gains_per_row), empty for noiseless AWGN
    std::vector<T> noise;                // (B * L) or empty when noise disabled
    T noise_variance = 0;
    std::int64_t gains_per_row = 0;  // 0 for AWGN

    /// zh = apply(z); shapes must match the sampled realization.
    Tensor<T> apply(const Tensor<T>& z) const {
        if (z.rows() != batch || z.last() != length)
            throw shape_error("channel realization shape mismatch: signal " + z.shape_str());
        Tensor<T> out = z;
        apply_inplace(out.data());
        return out;
    }

    void apply_inplace(T* z) const {
        const std::int64_t B = batch, L = length;
        if (spec.kind == ChannelKind::awgn) {
            if (!noise.empty())
                parallel_for(B, [&](std::int64_t b) {
                    const T* n = noise.data() + b * L;
                    T* row = z + b * L;
                    for (std::int64_t j = 0; j < L; ++j) row[j] += n[j];
                });
            return;
        }
        const std::int64_t n_sym = L / 2;
        parallel_for(B, [&](std::int64_t b) {
            T* row = z + b * L;
            const T* nrow = noise.empty() ? nullptr : noise.data() + b * L;
            for (std::int64_t s = 0; s < n_sym; ++s) {
                const std::complex<T> h = gain(b, s);
                const std::complex<T> zc(row[2 * s], row[2 * s + 1]);
                std::complex<T> n(0, 0);
                if (nrow) n = {nrow[2 * s], nrow[2 * s + 1]};
                const std::complex<T> zh = spec.equalize ? (zc + n / h) : (h * zc + n);
                row[2 * s] = zh.real();
                row[2 * s + 1] = zh.imag();
            }
        });
    }

    /// Pull a loss gradient back through apply(): identity for AWGN and for
    /// the equalized path; conj(h) rotation otherwise.
    void backprop_inplace(T* grad) const {
        if (spec.kind == ChannelKind::awgn || spec.equalize) return;
        const std::int64_t n_sym = length / 2;
        parallel_for(batch, [&](std::int64_t b) {
            T* row = grad + b * length;
            for (std::int64_t s = 0; s < n_sym; ++s) {
                const std::complex<T> h = gain(b, s);
                const T gr = row[2 * s], gi = row[2 * s + 1];
                row[2 * s] = h.real() * gr + h.imag() * gi;
                row[2 * s + 1] = -h.imag() * gr + h.real() * gi;
            }
        });
    }

    std::complex<T> gain(std::int64_t b, std::int64_t sym) const {
        if (gains_per_row == 0) return {T(1), T(0)};
        const std::int64_t i =
            b * gains_per_row + (gains_per_row == 1 ? 0 : sym);
        return gains[static_cast<std::size_t>(i)];
    }
};

template <class T>
BatchRealization<T> sample_batch(const ChannelSpec& spec, std::int64_t batch, std::int64_t length,
                                 RngStream& rng) {
    spec.validate();
    if (spec.is_fading() && length % 2 != 0)
        throw shape_error("fading channels need an even symbol count, got " +
                          std::to_string(length));
    BatchRealization<T> out;
    out.spec = spec;
    out.batch = batch;
    out.length = length;
    out.noise_variance = static_cast<T>(noise_variance_per_component(spec.snr_db));
    if (spec.is_fading()) {
        out.gains_per_row = spec.fading_mode == FadingMode::per_block ? 1 : length / 2;
        out.gains.resize(static_cast<std::size_t>(batch * out.gains_per_row));
        const auto [mu, sigma] = spec.kind == ChannelKind::rician
                                     ? rician_params(spec.rician_a)
                                     : std::pair<double, double>{0.0, 1.0};
        for (auto& g : out.gains) {
            const auto u = rng.complex_gaussian_unit();
            g = {static_cast<T>(mu + sigma * u.real()), static_cast<T>(sigma * u.imag())};
        }
    }
    if (out.noise_variance > 0) {
        const double sd = std::sqrt(static_cast<double>(out.noise_variance));
        out.noise.resize(static_cast<std::size_t>(batch * length));
        for (auto& n : out.noise) n = static_cast<T>(sd * rng.gaussian());
    }
    return out;
}

}  // namespace deepbroadcast::chansim
