// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "deepbroadcast/data.hpp"
#include "deepbroadcast/net.hpp"
#include "deepbroadcast/nn.hpp"
#include "deepbroadcast/objective.hpp"
#include "deepbroadcast/rng.hpp"

namespace testutil {

using namespace deepbroadcast;

/// Central-difference gradient oracle, independent of the reverse-mode path
/// it checks. `build_loss` must rebuild the graph from the stores' current
/// parameter values and return the scalar loss node.
struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::int64_t checked = 0;
};

inline double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / scale;
}

inline GradCheckReport grad_check(nn::ParameterStore<double>& params,
                                  const std::function<nn::Var<double>()>& build_loss,
                                  double eps = 1e-5,
                                  const std::string& name_filter = std::string()) {
    // analytic pass
    params.zero_grads();
    auto loss = build_loss();
    nn::backward(loss);

    std::vector<Tensor<double>> analytic;
    analytic.reserve(params.items().size());
    for (auto& [name, p] : params.items())
        analytic.push_back(p->grad.numel() ? p->grad : Tensor<double>::zeros(p->value.shape));

    GradCheckReport rep;
    for (std::size_t pi = 0; pi < params.items().size(); ++pi) {
        const auto& name = params.items()[pi].first;
        if (!name_filter.empty() && name.find(name_filter) == std::string::npos) continue;
        auto& p = params.items()[pi].second;
        for (std::int64_t i = 0; i < p->value.numel(); ++i) {
            const double saved = p->value.v[static_cast<std::size_t>(i)];
            p->value.v[static_cast<std::size_t>(i)] = saved + eps;
            const double lp = build_loss()->value.v[0];
            p->value.v[static_cast<std::size_t>(i)] = saved - eps;
            const double lm = build_loss()->value.v[0];
            p->value.v[static_cast<std::size_t>(i)] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double err = rel_err(analytic[pi].v[static_cast<std::size_t>(i)], numeric);
            ++rep.checked;
            if (err > rep.max_rel_err) {
                rep.max_rel_err = err;
                rep.worst_param = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return rep;
}

/// Small random image batch in [0, 1], (B, H, W, 3).
template <class T>
Tensor<T> random_images(std::int64_t b, std::int64_t h, std::int64_t w, RngStream& rng) {
    Tensor<T> t({b, h, w, 3});
    for (auto& x : t.v) x = static_cast<T>(rng.uniform());
    return t;
}

/// Tiny model configuration used by the gradient suites.
inline nn::ModelConfig tiny_config(int n_users, std::vector<nn::TaskHead> heads) {
    nn::ModelConfig cfg;
    cfg.n_users = n_users;
    cfg.c1 = 2;
    cfg.h1 = 2;
    cfg.w1 = 2;
    cfg.c_tx = 2;
    cfg.gcf_query_hidden = 4;
    cfg.fusion_hidden = 8;  // wide enough that a tiny batch cannot kill every ReLU unit
    cfg.rx_width = 4;
    cfg.rx_exec_hidden = 4;
    cfg.heads = std::move(heads);
    return cfg;
}

/// Fixed tiny forward rig: a model plus frozen inputs, draws, and channel
/// realizations, rebuilding the composite loss graph on demand so central
/// differences see a pure function of the parameters.
struct TinyLossRig {
    std::unique_ptr<nn::Model<double>> model;
    Tensor<double> images;
    std::vector<double> snr_db;
    std::vector<Tensor<double>> lambdas;
    std::vector<std::shared_ptr<const chansim::BatchRealization<double>>> channels;
    std::vector<std::vector<int>> labels;  // classification users
    nn::LossWeights weights;

    nn::Var<double> build() const {
        const bool stochastic = model->variational();
        auto enc = model->encode(images, snr_db, stochastic ? &lambdas : nullptr);
        std::vector<nn::Var<double>> task_losses;
        std::vector<nn::Var<double>> kls;
        for (int u = 0; u < model->config().n_users; ++u) {
            auto zh = nn::apply_channel(enc.tx[static_cast<std::size_t>(u)],
                                        channels[static_cast<std::size_t>(u)]);
            auto out = model->decode(u, zh);
            if (model->config().heads[static_cast<std::size_t>(u)].kind ==
                nn::TaskHead::Kind::recover) {
                task_losses.push_back(nn::l1_loss(out, images));
            } else {
                task_losses.push_back(
                    nn::cross_entropy(out, labels[static_cast<std::size_t>(u)]));
            }
            if (stochastic)
                kls.push_back(nn::gaussian_kl(enc.stats[static_cast<std::size_t>(u)].mu,
                                              enc.stats[static_cast<std::size_t>(u)].sigma));
        }
        return nn::broadcast_ib_loss(task_losses, kls, weights);
    }
};

/// Two classification users through rician (unequalized) and noisy AWGN
/// channels, stochastic latents, full composite objective.
inline TinyLossRig tiny_variational_rig(std::uint64_t seed) {
    TinyLossRig rig;
    auto cfg = tiny_config(2, {{nn::TaskHead::Kind::classify, 2},
                               {nn::TaskHead::Kind::classify, 10}});
    rig.model = std::make_unique<nn::Model<double>>(nn::Variant::deepbroadcast, cfg, seed);
    RngStream img_rng(seed, 0, RngStream::kGeneric);
    rig.images = random_images<double>(1, cfg.image_h(), cfg.image_w(), img_rng);
    rig.snr_db = {4.0, 11.0};
    for (int u = 0; u < 2; ++u) {
        Tensor<double> lam({1, cfg.c2()});
        for (auto& x : lam.v) x = img_rng.gaussian();
        rig.lambdas.push_back(lam);
    }
    chansim::ChannelSpec rician;
    rician.kind = chansim::ChannelKind::rician;
    rician.rician_a = 2.0;
    rician.snr_db = rig.snr_db[0];
    rician.equalize = false;
    chansim::ChannelSpec awgn;
    awgn.kind = chansim::ChannelKind::awgn;
    awgn.snr_db = rig.snr_db[1];
    RngStream ch_rng(seed, 1, RngStream::kNoise);
    rig.channels.push_back(std::make_shared<chansim::BatchRealization<double>>(
        chansim::sample_batch<double>(rician, 1, cfg.c_tx, ch_rng)));
    rig.channels.push_back(std::make_shared<chansim::BatchRealization<double>>(
        chansim::sample_batch<double>(awgn, 1, cfg.c_tx, ch_rng)));
    rig.labels = {{1}, {7}};
    rig.weights.task_w = {0.5, 0.5};
    rig.weights.beta = 2e-2;
    rig.weights.gamma = {0.5, 0.5};
    return rig;
}

/// Recovery + classification users, deterministic latents (no KL), covering
/// the transposed-convolution head and the L1 objective.
inline TinyLossRig tiny_recovery_rig(std::uint64_t seed) {
    TinyLossRig rig;
    auto cfg = tiny_config(2, {{nn::TaskHead::Kind::recover, 0},
                               {nn::TaskHead::Kind::classify, 10}});
    rig.model = std::make_unique<nn::Model<double>>(nn::Variant::deepbroadcast_e2e, cfg, seed);
    RngStream img_rng(seed, 3, RngStream::kGeneric);
    rig.images = random_images<double>(1, cfg.image_h(), cfg.image_w(), img_rng);
    rig.snr_db = {9.0, 2.0};
    chansim::ChannelSpec awgn;
    awgn.kind = chansim::ChannelKind::awgn;
    awgn.snr_db = rig.snr_db[0];
    chansim::ChannelSpec rayleigh;
    rayleigh.kind = chansim::ChannelKind::rayleigh;
    rayleigh.snr_db = rig.snr_db[1];
    rayleigh.equalize = true;
    RngStream ch_rng(seed, 4, RngStream::kNoise);
    rig.channels.push_back(std::make_shared<chansim::BatchRealization<double>>(
        chansim::sample_batch<double>(awgn, 1, cfg.c_tx, ch_rng)));
    rig.channels.push_back(std::make_shared<chansim::BatchRealization<double>>(
        chansim::sample_batch<double>(rayleigh, 1, cfg.c_tx, ch_rng)));
    rig.labels = {{}, {3}};
    rig.weights.task_w = {1.0, 1e-3};
    rig.weights.beta = 0.0;
    rig.weights.gamma = {0.5, 0.5};
    return rig;
}

/// Random in-memory dataset with the CIFAR-10 record shape, for pipeline
/// tests that must run without the real corpus. Labels are derived from the
/// top-left pixel so the task is learnable, not pure memorization.
inline data::Dataset synthetic_dataset(std::int64_t n_train, std::int64_t n_test,
                                       std::uint64_t seed) {
    data::Dataset ds;
    RngStream rng(seed, 0, RngStream::kGeneric);
    ds.train_images.resize(static_cast<std::size_t>(n_train * data::Dataset::kImageBytes));
    ds.test_images.resize(static_cast<std::size_t>(n_test * data::Dataset::kImageBytes));
    for (auto& b : ds.train_images) b = static_cast<std::uint8_t>(rng.uniform_int(256));
    for (auto& b : ds.test_images) b = static_cast<std::uint8_t>(rng.uniform_int(256));
    const auto label_of = [](const std::vector<std::uint8_t>& imgs, std::int64_t i) {
        return static_cast<int>(imgs[static_cast<std::size_t>(i * data::Dataset::kImageBytes)]) *
               10 / 256;
    };
    for (std::int64_t i = 0; i < n_train; ++i)
        ds.train_labels.push_back(label_of(ds.train_images, i));
    for (std::int64_t i = 0; i < n_test; ++i)
        ds.test_labels.push_back(label_of(ds.test_images, i));
    return ds;
}

}  // namespace testutil
