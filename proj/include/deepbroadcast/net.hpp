// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "deepbroadcast/nn.hpp"

namespace deepbroadcast::nn {

enum class Variant {
    deepbroadcast,      // full system: TCEs with stochastic latents + CFE
    deepbroadcast_e2e,  // PFG and sampling replaced by one affine map, no KL
    mtoc,               // shared extractor + stacked affine compression, no CSI
    mtoc_wlca,          // per-user sub-encoders with LCA stacks, no GCF
    mtoc_wgcf,          // per-user sub-encoders with GCF, no LCA
    unicast,            // independent one-to-one pairs, split symbol budget
    deeprc,             // shared encoder + serial affine stack (recovery baseline)
};

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::deepbroadcast: return "deepbroadcast";
        case Variant::deepbroadcast_e2e: return "deepbroadcast_e2e";
        case Variant::mtoc: return "mtoc";
        case Variant::mtoc_wlca: return "mtoc_wlca";
        case Variant::mtoc_wgcf: return "mtoc_wgcf";
        case Variant::unicast: return "unicast";
        case Variant::deeprc: return "deeprc";
    }
    return "?";
}

inline Variant variant_from_string(const std::string& s) {
    for (Variant v : {Variant::deepbroadcast, Variant::deepbroadcast_e2e, Variant::mtoc,
                      Variant::mtoc_wlca, Variant::mtoc_wgcf, Variant::unicast, Variant::deeprc})
        if (s == to_string(v)) return v;
    throw config_error("unknown model variant: " + s);
}

struct TaskHead {
    enum class Kind { classify, recover } kind = Kind::classify;
    int n_label = 2;
};

/// Architecture hyperparameters. The refined latent length is pinned to a
/// quarter of the extracted feature volume; the symbol halving between those
/// two stages is a strided convolution followed by the probability heads.
struct ModelConfig {
    int n_users = 2;
    std::int64_t c1 = 32, h1 = 8, w1 = 8;  // extracted feature dims
    std::int64_t c_tx = 16;                // broadcast symbols
    std::int64_t gcf_query_hidden = 64;
    std::int64_t fusion_hidden = 256;
    std::int64_t rx_width = 512;        // receiver channel-decoder width
    std::int64_t rx_exec_hidden = 256;  // executor hidden width
    std::vector<TaskHead> heads;

    std::int64_t feature_volume() const { return c1 * h1 * w1; }
    std::int64_t c2() const { return feature_volume() / 4; }
    std::int64_t c3() const { return c2(); }
    std::int64_t image_h() const { return 4 * h1; }
    std::int64_t image_w() const { return 4 * w1; }

    void validate() const {
        if (n_users < 1) throw config_error("model: n_users must be >= 1");
        if (c1 < 1 || h1 < 1 || w1 < 1) throw config_error("model: feature dims must be positive");
        if (feature_volume() % 4 != 0)
            throw config_error("model: c1*h1*w1 must be divisible by 4 (c2 = c1*h1*w1/4)");
        if (h1 % 2 != 0) throw config_error("model: h1 must be even (symbol-halving stride)");
        if (c_tx < 2 || c_tx % 2 != 0) throw config_error("model: c_tx must be even and >= 2");
        if (static_cast<int>(heads.size()) != n_users)
            throw config_error("model: need one task head per user");
        for (const auto& h : heads) {
            if (h.kind == TaskHead::Kind::classify && h.n_label < 2)
                throw config_error("model: classification heads need n_label >= 2");
            if (h.kind == TaskHead::Kind::recover && c1 % 2 != 0)
                throw config_error("model: recovery head requires even c1");
        }
    }
};

/// z^r = mu + sigma (.) lambda; the pathwise sampling map. `lambda` enters as
/// a constant, so gradients flow to mu with unit coefficient and to sigma
/// with coefficient lambda.
template <class T>
Var<T> reparameterize(Var<T> mu, Var<T> sigma, const Tensor<T>& lambda) {
    require_same_shape(mu->value, lambda, "reparameterize");
    return add(mu, mul(sigma, constant(lambda)));
}

/// Local channel-aware attention: per-position channel attention driven by
/// one user's SNR, with a residual connection. Zeroing the merge parameters
/// makes the block an exact identity.
template <class T>
struct LcaBlock {
    Dense<T> score;  // 1x1 conv on features
    Dense<T> gate;   // 1x1 conv on features
    Dense<T> csi;    // 1x1 conv on the replicated SNR plane
    Dense<T> merge;  // 1x1 conv ahead of the residual add

    static LcaBlock create(ParameterStore<T>& store, const std::string& name, std::int64_t c1,
                           RngStream& rng) {
        LcaBlock b;
        b.score = Dense<T>::create(store, name + ".score", c1, c1, rng);
        b.gate = Dense<T>::create(store, name + ".gate", c1, c1, rng);
        b.csi = Dense<T>::create(store, name + ".csi", 1, c1, rng, init::kLinearGain,
                                 /*fixed_std=*/0.02);
        b.merge = Dense<T>::create(store, name + ".merge", c1, c1, rng);
        return b;
    }

    Var<T> operator()(Var<T> f, Var<T> snr_plane) const {
        auto z_score = score(f);
        auto z_gate = gate(f);
        auto z_csi = csi(snr_plane);
        auto attention = softmax_last(mul(z_csi, z_score));
        return add(merge(mul(attention, z_gate)), f);
    }
};

/// Conditioning value fed to the channel-aware blocks. Clamped so the
/// noise-free +inf sentinel (and any runaway dB value) stays finite; the
/// channel simulation itself always uses the exact SNR.
inline double clamp_csi(double snr_db) {
    if (snr_db > 40.0) return 40.0;
    if (snr_db < -40.0) return -40.0;
    return snr_db;
}

/// Replicated-SNR plane (B, h, w, 1) feeding the LCA csi embedding.
template <class T>
Var<T> snr_plane(std::int64_t batch, std::int64_t h, std::int64_t w, double snr_db) {
    return constant(Tensor<T>::full({batch, h, w, 1}, static_cast<T>(clamp_csi(snr_db))));
}

template <class T>
struct LatentStats {
    Var<T> mu, sigma;
};

/// Task-channel-aware sub-encoder: three LCAs, a strided convolution that
/// halves the symbol count, then either the probability heads (mu, sigma) or
/// a single affine map in the end-to-end ablation.
template <class T>
struct TceBlock {
    std::vector<LcaBlock<T>> lcas;
    Conv2d<T> halve;
    Dense<T> mu_fc, sigma_fc;  // probability feature generation
    Dense<T> latent_fc;        // e2e replacement
    bool variational = true;
    std::int64_t c1 = 0, h1 = 0, w1 = 0;

    static TceBlock create(ParameterStore<T>& store, const std::string& name,
                           const ModelConfig& cfg, bool variational, RngStream& rng) {
        TceBlock t;
        t.variational = variational;
        t.c1 = cfg.c1;
        t.h1 = cfg.h1;
        t.w1 = cfg.w1;
        for (int j = 0; j < 3; ++j)
            t.lcas.push_back(
                LcaBlock<T>::create(store, name + ".lca" + std::to_string(j), cfg.c1, rng));
        t.halve = Conv2d<T>::create(store, name + ".halve", cfg.c1, cfg.c1,
                                    ConvGeom{3, 3, 2, 1, 1, 1}, rng);
        const std::int64_t half = cfg.feature_volume() / 2;
        if (variational) {
            t.mu_fc = Dense<T>::create(store, name + ".mu", half, cfg.c2(), rng);
            t.sigma_fc = Dense<T>::create(store, name + ".sigma", half, cfg.c2(), rng);
        } else {
            t.latent_fc = Dense<T>::create(store, name + ".latent", half, cfg.c2(), rng);
        }
        return t;
    }

    Var<T> compress(Var<T> f, double snr_db) const {
        const std::int64_t B = f->value.dim(0);
        auto plane = snr_plane<T>(B, h1, w1, snr_db);
        Var<T> g = f;
        for (const auto& lca : lcas) g = lca(g, plane);
        g = relu(halve(g));
        return reshape(g, {B, g->value.numel() / B});
    }

    LatentStats<T> forward(Var<T> f, double snr_db) const {
        auto flat = compress(f, snr_db);
        if (!variational) throw config_error("tce: variant has no probability heads");
        return {mu_fc(flat), softplus_floor(sigma_fc(flat), T(1e-6))};
    }

    Var<T> forward_deterministic(Var<T> f, double snr_db) const {
        auto flat = compress(f, snr_db);
        if (variational) throw config_error("tce: variational branch expects forward()");
        return latent_fc(flat);
    }
};

/// Global channel-aware fine-tuning: gated key/value modulation of one
/// user's latent driven by the full SNR vector, with a residual add.
template <class T>
struct GcfBlock {
    LayerNorm<T> norm;
    Dense<T> key, value;
    Dense<T> query1, query2, query3;
    Dense<T> out;

    static GcfBlock create(ParameterStore<T>& store, const std::string& name,
                           const ModelConfig& cfg, RngStream& rng) {
        GcfBlock g;
        const std::int64_t c = cfg.c2();
        g.norm = LayerNorm<T>::create(store, name + ".norm", c);
        g.key = Dense<T>::create(store, name + ".key", c, cfg.c3(), rng);
        g.value = Dense<T>::create(store, name + ".value", c, cfg.c3(), rng);
        g.query1 = Dense<T>::create(store, name + ".query1", cfg.n_users, cfg.gcf_query_hidden,
                                    rng, init::kReluGain, /*fixed_std=*/0.02);
        g.query2 = Dense<T>::create(store, name + ".query2", cfg.gcf_query_hidden,
                                    cfg.gcf_query_hidden, rng, init::kReluGain);
        g.query3 =
            Dense<T>::create(store, name + ".query3", cfg.gcf_query_hidden, cfg.c3(), rng);
        g.out = Dense<T>::create(store, name + ".out", c, c, rng);
        return g;
    }

    Var<T> operator()(Var<T> zr, Var<T> snr_rows) const {
        auto ln = norm(zr);
        auto m_key = sigmoid(key(ln));
        auto m_value = value(ln);
        auto m_query = sigmoid(query3(relu(query2(relu(query1(snr_rows))))));
        return out(add(zr, mul(mul(m_value, m_key), m_query)));
    }
};

/// Fusion tail of the CFE: two affine maps down to c_tx symbols, then unit
/// power normalization.
template <class T>
struct FusionBlock {
    Dense<T> fc1, fc2;

    static FusionBlock create(ParameterStore<T>& store, const std::string& name,
                              std::int64_t in, std::int64_t hidden, std::int64_t out,
                              RngStream& rng) {
        FusionBlock f;
        f.fc1 = Dense<T>::create(store, name + ".fc1", in, hidden, rng, init::kReluGain);
        f.fc2 = Dense<T>::create(store, name + ".fc2", hidden, out, rng);
        return f;
    }

    Var<T> operator()(Var<T> zcat) const { return power_norm_rows(fc2(relu(fc1(zcat)))); }
};

/// Shared semantic extractor: two stride-2 and two stride-1 conv blocks,
/// (B, 4*h1, 4*w1, 3) -> (B, h1, w1, c1).
template <class T>
struct Extractor {
    std::vector<Conv2d<T>> blocks;

    static Extractor create(ParameterStore<T>& store, const std::string& name,
                            const ModelConfig& cfg, RngStream& rng) {
        Extractor e;
        const ConvGeom down{3, 3, 2, 2, 1, 1};
        const ConvGeom same{3, 3, 1, 1, 1, 1};
        e.blocks.push_back(Conv2d<T>::create(store, name + ".block0", 3, cfg.c1, down, rng));
        e.blocks.push_back(Conv2d<T>::create(store, name + ".block1", cfg.c1, cfg.c1, down, rng));
        e.blocks.push_back(Conv2d<T>::create(store, name + ".block2", cfg.c1, cfg.c1, same, rng));
        e.blocks.push_back(Conv2d<T>::create(store, name + ".block3", cfg.c1, cfg.c1, same, rng));
        return e;
    }

    Var<T> operator()(Var<T> x) const {
        Var<T> h = x;
        for (const auto& b : blocks) h = relu(b(h));
        return h;
    }
};

/// Per-user receiver: channel decoder + semantic executor (classification)
/// or affine expansion + transposed convolutions (recovery).
template <class T>
struct Receiver {
    TaskHead head;
    std::int64_t c1 = 0, h1 = 0, w1 = 0;
    Dense<T> dec1, dec2, exec1, exec2;         // classification path
    Dense<T> expand;                           // recovery path
    ConvTranspose2d<T> up1, up2, render;

    static Receiver create(ParameterStore<T>& store, const std::string& name,
                           const ModelConfig& cfg, TaskHead head, std::int64_t rx_in,
                           RngStream& rng) {
        Receiver r;
        r.head = head;
        r.c1 = cfg.c1;
        r.h1 = cfg.h1;
        r.w1 = cfg.w1;
        if (head.kind == TaskHead::Kind::classify) {
            r.dec1 = Dense<T>::create(store, name + ".dec1", rx_in, cfg.rx_width, rng,
                                      init::kReluGain);
            r.dec2 = Dense<T>::create(store, name + ".dec2", cfg.rx_width, cfg.rx_width, rng,
                                      init::kReluGain);
            r.exec1 = Dense<T>::create(store, name + ".exec1", cfg.rx_width, cfg.rx_exec_hidden,
                                       rng, init::kReluGain);
            r.exec2 =
                Dense<T>::create(store, name + ".exec2", cfg.rx_exec_hidden, head.n_label, rng);
        } else {
            const ConvGeom up{4, 4, 2, 2, 1, 1};
            const ConvGeom same{3, 3, 1, 1, 1, 1};
            r.expand = Dense<T>::create(store, name + ".expand", rx_in, cfg.feature_volume(), rng,
                                        init::kReluGain);
            r.up1 = ConvTranspose2d<T>::create(store, name + ".up1", cfg.c1, cfg.c1, up, rng);
            r.up2 = ConvTranspose2d<T>::create(store, name + ".up2", cfg.c1, cfg.c1 / 2, up, rng);
            r.render =
                ConvTranspose2d<T>::create(store, name + ".render", cfg.c1 / 2, 3, same, rng);
        }
        return r;
    }

    Var<T> operator()(Var<T> zh) const {
        if (head.kind == TaskHead::Kind::classify)
            return exec2(relu(exec1(relu(dec2(relu(dec1(zh)))))));
        const std::int64_t B = zh->value.rows();
        auto x = relu(expand(zh));
        x = reshape(x, {B, h1, w1, c1});
        x = relu(up1(x));
        x = relu(up2(x));
        return sigmoid(render(x));
    }
};

/// The transmitter/receiver pair for one experiment variant. Broadcast
/// variants share one unit-power signal across users; unicast builds N
/// independent encoder/decoder pairs with a split symbol budget.
template <class T>
class Model {
public:
    struct Encoded {
        std::vector<Var<T>> tx;         // per-user transmitted signal
        Var<T> broadcast;               // shared signal (null for unicast)
        std::vector<LatentStats<T>> stats;  // per-user (mu, sigma); empty unless variational
        std::vector<Var<T>> latents;        // per-user z^r (diagnostics)
    };

    // parameters are shared handles; copying a model would alias them
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    Model(Variant variant, ModelConfig cfg, std::uint64_t seed)
        : variant_(variant), cfg_(std::move(cfg)) {
        cfg_.validate();
        RngStream rng(seed, 0, RngStream::kInit);
        const std::int64_t flat = cfg_.feature_volume();
        const std::int64_t half = flat / 2;
        const std::int64_t c2 = cfg_.c2();
        const bool variational = variant_ == Variant::deepbroadcast;

        switch (variant_) {
            case Variant::deepbroadcast:
            case Variant::deepbroadcast_e2e:
                extractor_ = Extractor<T>::create(params_, "extractor", cfg_, rng);
                for (int i = 0; i < cfg_.n_users; ++i)
                    tces_.push_back(TceBlock<T>::create(params_, "tce" + std::to_string(i), cfg_,
                                                        variational, rng));
                for (int i = 0; i < cfg_.n_users; ++i)
                    gcfs_.push_back(
                        GcfBlock<T>::create(params_, "gcf" + std::to_string(i), cfg_, rng));
                fusion_ = FusionBlock<T>::create(params_, "fusion", cfg_.n_users * c2,
                                                 cfg_.fusion_hidden, cfg_.c_tx, rng);
                break;
            case Variant::mtoc_wlca:
                extractor_ = Extractor<T>::create(params_, "extractor", cfg_, rng);
                for (int i = 0; i < cfg_.n_users; ++i)
                    tces_.push_back(TceBlock<T>::create(params_, "tce" + std::to_string(i), cfg_,
                                                        /*variational=*/false, rng));
                fusion_ = FusionBlock<T>::create(params_, "fusion", cfg_.n_users * c2,
                                                 cfg_.fusion_hidden, cfg_.c_tx, rng);
                break;
            case Variant::mtoc_wgcf:
                extractor_ = Extractor<T>::create(params_, "extractor", cfg_, rng);
                for (int i = 0; i < cfg_.n_users; ++i)
                    branch_fcs_.push_back(Dense<T>::create(
                        params_, "enc" + std::to_string(i) + ".compress", flat, c2, rng));
                for (int i = 0; i < cfg_.n_users; ++i)
                    gcfs_.push_back(
                        GcfBlock<T>::create(params_, "gcf" + std::to_string(i), cfg_, rng));
                fusion_ = FusionBlock<T>::create(params_, "fusion", cfg_.n_users * c2,
                                                 cfg_.fusion_hidden, cfg_.c_tx, rng);
                break;
            case Variant::mtoc:
            case Variant::deeprc:
                extractor_ = Extractor<T>::create(params_, "extractor", cfg_, rng);
                stack_.push_back(
                    Dense<T>::create(params_, "compress.fc0", flat, half, rng, init::kReluGain));
                stack_.push_back(
                    Dense<T>::create(params_, "compress.fc1", half, c2, rng, init::kReluGain));
                stack_.push_back(Dense<T>::create(params_, "compress.fc2", c2, cfg_.c_tx, rng));
                break;
            case Variant::unicast:
                for (int i = 0; i < cfg_.n_users; ++i) {
                    const std::string name = "enc" + std::to_string(i);
                    unicast_extractors_.push_back(
                        Extractor<T>::create(params_, name + ".extractor", cfg_, rng));
                    unicast_fc1_.push_back(Dense<T>::create(params_, name + ".fc0", flat, c2, rng,
                                                            init::kReluGain));
                    unicast_fc2_.push_back(
                        Dense<T>::create(params_, name + ".fc1", c2, tx_symbols(i), rng));
                }
                break;
        }
        for (int i = 0; i < cfg_.n_users; ++i)
            receivers_.push_back(Receiver<T>::create(params_, "rx" + std::to_string(i), cfg_,
                                                     cfg_.heads[static_cast<std::size_t>(i)],
                                                     tx_symbols(i), rng));
    }

    Variant variant() const { return variant_; }
    const ModelConfig& config() const { return cfg_; }
    ParameterStore<T>& params() { return params_; }
    const ParameterStore<T>& params() const { return params_; }

    bool variational() const { return variant_ == Variant::deepbroadcast; }

    /// Symbols transmitted to `user`: the shared budget for broadcast
    /// variants, ceil(c_tx / N) for unicast.
    std::int64_t tx_symbols(int user) const {
        if (user < 0 || user >= cfg_.n_users) throw config_error("unknown user index");
        if (variant_ != Variant::unicast) return cfg_.c_tx;
        return (cfg_.c_tx + cfg_.n_users - 1) / cfg_.n_users;
    }

    /// Shared semantic features from a (B, 4*h1, 4*w1, 3) image batch.
    Var<T> extract_semantics(const Tensor<T>& images) const {
        check_images(images);
        if (variant_ == Variant::unicast)
            throw config_error("unicast variant has no shared extractor");
        return extractor_(constant(images));
    }

    /// Full transmitter pass. `lambdas` supplies the reparameterization draws
    /// for the variational variant (one (B, c2) tensor per user); when null,
    /// latents collapse to their means (deterministic inference).
    Encoded encode(const Tensor<T>& images, const std::vector<double>& snr_db,
                   const std::vector<Tensor<T>>* lambdas = nullptr) const {
        check_images(images);
        if (static_cast<int>(snr_db.size()) != cfg_.n_users)
            throw shape_error("encode: need one SNR per user");
        const std::int64_t B = images.dim(0);
        Encoded enc;

        if (variant_ == Variant::unicast) {
            for (int i = 0; i < cfg_.n_users; ++i) {
                auto f = unicast_extractors_[static_cast<std::size_t>(i)](constant(images));
                auto flat = reshape(f, {B, f->value.numel() / B});
                auto h = relu(unicast_fc1_[static_cast<std::size_t>(i)](flat));
                enc.tx.push_back(
                    power_norm_rows(unicast_fc2_[static_cast<std::size_t>(i)](h)));
            }
            return enc;
        }

        auto f = extractor_(constant(images));

        if (variant_ == Variant::mtoc || variant_ == Variant::deeprc) {
            auto h = reshape(f, {B, f->value.numel() / B});
            h = relu(stack_[0](h));
            h = relu(stack_[1](h));
            enc.broadcast = power_norm_rows(stack_[2](h));
            enc.tx.assign(static_cast<std::size_t>(cfg_.n_users), enc.broadcast);
            return enc;
        }

        std::vector<Var<T>> refined;
        for (int i = 0; i < cfg_.n_users; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            switch (variant_) {
                case Variant::deepbroadcast: {
                    auto stats = tces_[ui].forward(f, snr_db[ui]);
                    Var<T> zr;
                    if (lambdas) {
                        zr = reparameterize(stats.mu, stats.sigma, (*lambdas)[ui]);
                    } else {
                        zr = stats.mu;
                    }
                    enc.stats.push_back(stats);
                    refined.push_back(zr);
                    break;
                }
                case Variant::deepbroadcast_e2e:
                case Variant::mtoc_wlca:
                    refined.push_back(tces_[ui].forward_deterministic(f, snr_db[ui]));
                    break;
                case Variant::mtoc_wgcf: {
                    auto flat = reshape(f, {B, f->value.numel() / B});
                    refined.push_back(branch_fcs_[ui](flat));
                    break;
                }
                default: break;
            }
        }
        enc.latents = refined;
        enc.broadcast = fuse(refined, snr_db);
        enc.tx.assign(static_cast<std::size_t>(cfg_.n_users), enc.broadcast);
        return enc;
    }

    /// CFE tail: per-user GCF (where the variant has one), concatenation,
    /// two-FC fusion, unit power.
    Var<T> fuse(const std::vector<Var<T>>& refined, const std::vector<double>& snr_db) const {
        if (static_cast<int>(refined.size()) != cfg_.n_users)
            throw shape_error("fuse: need one refined feature per user");
        const std::int64_t B = refined[0]->value.rows();
        std::vector<Var<T>> tuned;
        if (!gcfs_.empty()) {
            Tensor<T> snr_rows({B, cfg_.n_users});
            for (std::int64_t b = 0; b < B; ++b)
                for (int i = 0; i < cfg_.n_users; ++i)
                    snr_rows.v[static_cast<std::size_t>(b * cfg_.n_users + i)] =
                        static_cast<T>(clamp_csi(snr_db[static_cast<std::size_t>(i)]));
            auto snr_const = constant(snr_rows);
            for (int i = 0; i < cfg_.n_users; ++i)
                tuned.push_back(gcfs_[static_cast<std::size_t>(i)](
                    refined[static_cast<std::size_t>(i)], snr_const));
        } else {
            tuned = refined;
        }
        return fusion_(concat_last(tuned));
    }

    /// Receiver inference for one user from its received symbol vector.
    Var<T> decode(int user, Var<T> received) const {
        if (user < 0 || user >= cfg_.n_users) throw config_error("unknown user index");
        if (received->value.last() != tx_symbols(user))
            throw shape_error("decode: expected " + std::to_string(tx_symbols(user)) +
                              " symbols, got " + std::to_string(received->value.last()));
        return receivers_[static_cast<std::size_t>(user)](received);
    }

    const TceBlock<T>& tce(int user) const { return tces_.at(static_cast<std::size_t>(user)); }
    const GcfBlock<T>& gcf(int user) const { return gcfs_.at(static_cast<std::size_t>(user)); }

private:
    void check_images(const Tensor<T>& images) const {
        if (images.rank() != 4 || images.dim(1) != cfg_.image_h() ||
            images.dim(2) != cfg_.image_w() || images.dim(3) != 3)
            throw shape_error("expected image batch (B," + std::to_string(cfg_.image_h()) + "," +
                              std::to_string(cfg_.image_w()) + ",3), got " + images.shape_str());
    }

    Variant variant_;
    ModelConfig cfg_;
    ParameterStore<T> params_;

    Extractor<T> extractor_;
    std::vector<TceBlock<T>> tces_;
    std::vector<Dense<T>> branch_fcs_;  // mtoc_wgcf per-user compressors
    std::vector<GcfBlock<T>> gcfs_;
    FusionBlock<T> fusion_;
    std::vector<Dense<T>> stack_;  // mtoc / deeprc serial compression
    std::vector<Extractor<T>> unicast_extractors_;
    std::vector<Dense<T>> unicast_fc1_, unicast_fc2_;
    std::vector<Receiver<T>> receivers_;
};

template <class T>
std::unique_ptr<Model<T>> build_variant(Variant v, const ModelConfig& cfg, std::uint64_t seed) {
    return std::make_unique<Model<T>>(v, cfg, seed);
}

}  // namespace deepbroadcast::nn
