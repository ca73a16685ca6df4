// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "deepbroadcast/chansim.hpp"
#include "deepbroadcast/data.hpp"
#include "deepbroadcast/net.hpp"
#include "deepbroadcast/objective.hpp"

namespace deepbroadcast::config {

struct UserSpec {
    data::TaskSpec task;
    chansim::ChannelSpec channel;
};

struct TrainConfig {
    std::int64_t epochs = 120;
    std::int64_t batch = 128;
    double lr = 1e-3;
    double lr_decay = 1.0;  // multiplicative per epoch
    std::uint64_t seed = 1;
    std::vector<double> snr_list = {-5, -3, -1, 1, 3, 5, 7, 9, 11, 13, 15, 17, 19};
    double clip_norm = 5.0;  // 0 disables clipping
    bool stochastic = true;  // reparameterized latents during training
    bool continuous_snr = false;
    std::int64_t save_every = 10;

    void validate() const;
};

/// Full declarative description of one experiment run. Presets expand to
/// plain configs; the resolved form serializes to a key-value file that
/// parses back to an identical config.
struct ExperimentConfig {
    std::string preset = "custom";
    std::string variant = "deepbroadcast";
    nn::ModelConfig model;
    std::vector<UserSpec> users;
    nn::LossWeights loss;
    TrainConfig train;
    std::vector<double> eval_grid = {-5, -3, -1, 1, 3, 5, 7, 9, 11, 13, 15, 17, 19};
    int eval_repeats = 5;
    std::vector<std::string> compare_variants;  // ablation runs for case presets
    std::string data_dir = "data/cifar-10-batches-bin";
    std::string out_dir = "runs";

    int n_users() const { return static_cast<int>(users.size()); }

    /// Derive model heads from the user tasks and validate every block.
    void finalize();
};

/// case1..case5 presets matching the benchmark experiments; "custom" yields
/// the defaults above with two classification users.
ExperimentConfig expand_preset(const std::string& name);

std::string serialize(const ExperimentConfig& cfg);
ExperimentConfig parse(const std::string& text);
ExperimentConfig load_file(const std::string& path);

/// Apply one `key=value` override; throws config_error naming the key when
/// it is not part of the schema.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Stable short hash of the resolved config, used in run directory names.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace deepbroadcast::config
