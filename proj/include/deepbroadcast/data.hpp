// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepbroadcast/error.hpp"
#include "deepbroadcast/rng.hpp"
#include "deepbroadcast/tensor.hpp"

namespace deepbroadcast::data {

// CIFAR-10 class indices
inline constexpr int kAirplane = 0, kAutomobile = 1, kBird = 2, kCat = 3, kDeer = 4, kDog = 5,
                     kFrog = 6, kHorse = 7, kShip = 8, kTruck = 9;

/// One downstream task: a classification target derived from the 10-class
/// labels, or full image recovery.
struct TaskSpec {
    enum class Kind { classify, recover };

    std::string task_id = "task";
    Kind kind = Kind::classify;
    int n_label = 2;
    /// Binary tasks: the positive-class membership set over labels 0..9.
    /// Ignored for |n_label| == 10 (identity map) and for recovery.
    std::vector<int> positive;

    void validate() const;
    /// Total map over 0..9; throws on labels outside that range.
    int map_label(int label10) const;
};

/// Default binary membership sets. The animal set covers the six animal
/// classes; the small-ground-entity set covers the small street-level
/// classes. Both are config-overridable.
std::vector<int> default_animal_classes();        // bird,cat,deer,dog,frog,horse
std::vector<int> default_small_ground_classes();  // automobile,cat,dog,truck

/// CIFAR-10 held fully in memory, pixels as raw bytes (N, 32, 32, 3)
/// channels-last. Float conversion happens per batch.
struct Dataset {
    static constexpr std::int64_t kHeight = 32, kWidth = 32, kChannels = 3;
    static constexpr std::int64_t kImageBytes = kHeight * kWidth * kChannels;

    std::vector<std::uint8_t> train_images;
    std::vector<int> train_labels;
    std::vector<std::uint8_t> test_images;
    std::vector<int> test_labels;

    std::int64_t n_train() const { return static_cast<std::int64_t>(train_labels.size()); }
    std::int64_t n_test() const { return static_cast<std::int64_t>(test_labels.size()); }

    /// Pixels scaled to [0, 1] as a (B, 32, 32, 3) tensor.
    Tensor<float> gather_images(std::span<const std::int64_t> indices, bool from_test) const;
    std::vector<int> gather_labels(std::span<const std::int64_t> indices, bool from_test) const;
};

inline float normalize_pixel(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }
inline std::uint8_t denormalize_pixel(float x) {
    const float c = x < 0.f ? 0.f : (x > 1.f ? 1.f : x);
    return static_cast<std::uint8_t>(c * 255.0f + 0.5f);
}

/// Load the standard binary distribution (data_batch_1..5.bin, test_batch.bin)
/// from `dir`. Never downloads; failures name the offending file.
Dataset load_cifar10(const std::string& dir);

std::vector<int> map_task_labels(const std::vector<int>& labels10, const TaskSpec& spec);

/// Mini-batch iterator: seeded shuffle each epoch, final partial batch
/// included, labels mapped per task.
class BatchStream {
public:
    struct Batch {
        Tensor<float> images;                       // (B, 32, 32, 3) in [0,1]
        std::vector<std::vector<int>> task_labels;  // one vector per task
        std::vector<int> labels10;
    };

    BatchStream(const Dataset& ds, std::vector<TaskSpec> tasks, std::int64_t batch_size,
                RngStream rng);

    /// Number of batches per epoch: ceil(n_train / batch_size).
    std::int64_t batches_per_epoch() const;

    bool next(Batch& out);
    void restart(RngStream rng);  // new epoch with fresh shuffle stream

private:
    const Dataset* ds_;
    std::vector<TaskSpec> tasks_;
    std::int64_t batch_size_;
    std::vector<std::int64_t> order_;
    std::int64_t cursor_ = 0;
};

}  // namespace deepbroadcast::data
