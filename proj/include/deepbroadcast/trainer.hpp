// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "deepbroadcast/checkpoint.hpp"
#include "deepbroadcast/config.hpp"
#include "deepbroadcast/data.hpp"
#include "deepbroadcast/net.hpp"

namespace deepbroadcast::train {

/// One line of the metrics log. `train_metric` is per-task: classification
/// accuracy in [0,1], or mean L1 distance for recovery tasks.
struct EpochRecord {
    std::int64_t epoch = 0;
    double loss = 0;
    std::vector<double> task_losses;
    std::vector<double> kls;
    std::vector<double> train_metric;
    double wall_seconds = 0;

    std::string to_json() const;
    static EpochRecord from_json(const std::string& line);

    /// Equality over the deterministic fields (wall time excluded).
    bool same_numbers(const EpochRecord& o) const;
};

struct RunResult {
    std::string run_dir;
    std::string checkpoint_path;
    std::vector<EpochRecord> epochs;
};

/// Adam over a parameter store, slots aligned with store order.
template <class T>
class Adam {
public:
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void attach(const nn::ParameterStore<T>& store) {
        m_.clear();
        v_.clear();
        for (const auto& [name, p] : store.items()) {
            m_.push_back(Tensor<T>::zeros(p->value.shape));
            v_.push_back(Tensor<T>::zeros(p->value.shape));
        }
    }

    void step(nn::ParameterStore<T>& store, double lr) {
        ++step_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
        const double alpha = lr * std::sqrt(bc2) / bc1;
        for (std::size_t i = 0; i < store.items().size(); ++i) {
            auto& p = store.items()[i].second;
            if (p->grad.numel() == 0) continue;
            T* w = p->value.data();
            const T* g = p->grad.data();
            T* m = m_[i].data();
            T* v = v_[i].data();
            const std::int64_t n = p->value.numel();
            for (std::int64_t j = 0; j < n; ++j) {
                m[j] = static_cast<T>(beta1 * m[j] + (1.0 - beta1) * g[j]);
                v[j] = static_cast<T>(beta2 * v[j] + (1.0 - beta2) * g[j] * g[j]);
                w[j] -= static_cast<T>(alpha * m[j] /
                                       (std::sqrt(static_cast<double>(v[j])) + eps));
            }
        }
    }

    std::int64_t step_count() const { return step_; }
    void set_step_count(std::int64_t s) { step_ = s; }
    std::vector<Tensor<T>>& slots_m() { return m_; }
    std::vector<Tensor<T>>& slots_v() { return v_; }

private:
    std::int64_t step_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

/// Scale gradients so their global L2 norm does not exceed `max_norm`;
/// returns the pre-clip norm. `max_norm` <= 0 disables clipping.
template <class T>
double clip_gradients(nn::ParameterStore<T>& store, double max_norm) {
    double sq = 0;
    for (const auto& [name, p] : store.items())
        if (p->grad.numel())
            for (const T g : p->grad.v) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm && norm > 0) {
        const T s = static_cast<T>(max_norm / norm);
        for (auto& [name, p] : store.items())
            if (p->grad.numel())
                for (T& g : p->grad.v) g *= s;
    }
    return norm;
}

/// Uniform draw from the training SNR list (or the continuous span of the
/// list when `continuous` is set); one independent stream per user.
double sample_snr(const std::vector<double>& snr_list, bool continuous, RngStream& rng);

/// Full training run per the experiment config. Writes resolved.cfg,
/// metrics.jsonl and checkpoint.dbc into the run directory (a fresh
/// hash+timestamp directory under cfg.out_dir unless overridden).
RunResult train(const config::ExperimentConfig& cfg, const data::Dataset& ds,
                const std::string& run_dir_override = "");

/// Continue a checkpointed run to `total_epochs` (default: the epoch budget
/// stored in the checkpoint's config). Metrics append to the original run
/// directory. The stored config is authoritative.
RunResult resume(const std::string& checkpoint_path, const data::Dataset& ds,
                 std::int64_t total_epochs = -1);

/// Keys on which two configs differ (train.epochs and output paths ignored);
/// used to refuse incompatible resumes with a readable diff.
std::vector<std::string> config_diff(const config::ExperimentConfig& a,
                                     const config::ExperimentConfig& b);

}  // namespace deepbroadcast::train
