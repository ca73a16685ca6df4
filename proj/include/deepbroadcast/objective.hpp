// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "deepbroadcast/autograd.hpp"

namespace deepbroadcast::nn {

/// Coefficients of the composite training objective
///   total = sum_i ( w_i * L_i + beta * gamma_i * KL_i ).
/// gamma defaults to the uniform 1/N split and must sum to one.
struct LossWeights {
    std::vector<double> task_w;  // one per user, nonnegative
    double beta = 0.0;           // rate multiplier
    std::vector<double> gamma;   // per-user KL split, sums to 1

    static LossWeights uniform(int n_users, double beta = 0.0) {
        LossWeights w;
        w.task_w.assign(static_cast<std::size_t>(n_users), 1.0);
        w.beta = beta;
        w.gamma.assign(static_cast<std::size_t>(n_users), 1.0 / n_users);
        return w;
    }

    void validate(int n_users) const {
        if (static_cast<int>(task_w.size()) != n_users)
            throw config_error("loss weights: need one task weight per user");
        for (double w : task_w)
            if (w < 0.0) throw config_error("loss weights: task weights must be nonnegative");
        if (beta < 0.0) throw config_error("loss weights: beta must be nonnegative");
        if (static_cast<int>(gamma.size()) != n_users)
            throw config_error("loss weights: need one gamma per user");
        double sum = 0.0;
        for (double g : gamma) {
            if (g < 0.0) throw config_error("loss weights: gamma must be nonnegative");
            sum += g;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw config_error("loss weights: gamma must sum to 1, got " + std::to_string(sum));
    }
};

/// Per-term view of one composite loss evaluation. total recomposes exactly
/// from the parts with the declared coefficients.
struct LossBreakdown {
    std::vector<double> task_losses;
    std::vector<double> kls;
    double total = 0.0;

    double recompose(const LossWeights& w) const {
        double t = 0.0;
        for (std::size_t i = 0; i < task_losses.size(); ++i) {
            t += w.task_w[i] * task_losses[i];
            if (!kls.empty()) t += w.beta * w.gamma[i] * kls[i];
        }
        return t;
    }
};

/// Composite objective: weighted task losses plus beta * gamma-weighted KL
/// rate terms. Deterministic variants pass an empty `kls`.
template <class T>
Var<T> broadcast_ib_loss(const std::vector<Var<T>>& task_losses, const std::vector<Var<T>>& kls,
                         const LossWeights& weights, LossBreakdown* breakdown = nullptr) {
    const int n = static_cast<int>(task_losses.size());
    weights.validate(n);
    if (!kls.empty() && kls.size() != task_losses.size())
        throw shape_error("broadcast_ib_loss: need one KL per user (or none)");

    std::vector<Var<T>> terms = task_losses;
    std::vector<double> coeffs = weights.task_w;
    for (std::size_t i = 0; i < kls.size(); ++i) {
        terms.push_back(kls[i]);
        coeffs.push_back(weights.beta * weights.gamma[i]);
    }
    auto total = weighted_sum(terms, coeffs);
    if (breakdown) {
        breakdown->task_losses.clear();
        breakdown->kls.clear();
        for (const auto& l : task_losses)
            breakdown->task_losses.push_back(static_cast<double>(l->value.v[0]));
        for (const auto& k : kls) breakdown->kls.push_back(static_cast<double>(k->value.v[0]));
        breakdown->total = static_cast<double>(total->value.v[0]);
    }
    return total;
}

/// Recovery-plus-classification objective: L1 + 1e-3 * CE. The small factor
/// keeps the (harder, noise-sensitive) reconstruction term dominant.
template <class T>
Var<T> case1_loss(Var<T> l1, Var<T> ce) {
    return weighted_sum<T>({l1, ce}, {1.0, 1e-3});
}

/// kl_to_standard_normal on plain (mu, sigma) stats; alias of the autograd op
/// for call sites that carry LatentStats.
template <class T>
Var<T> kl_to_standard_normal(Var<T> mu, Var<T> sigma) {
    return gaussian_kl(mu, sigma);
}

}  // namespace deepbroadcast::nn
