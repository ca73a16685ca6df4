// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#include "deepbroadcast/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace deepbroadcast::data {

void TaskSpec::validate() const {
    if (task_id.empty()) throw config_error("task: empty task_id");
    if (kind == Kind::recover) return;
    if (n_label != 2 && n_label != 10)
        throw config_error("task " + task_id + ": n_label must be 2 or 10, got " +
                           std::to_string(n_label));
    if (n_label == 2) {
        if (positive.empty() || positive.size() >= 10)
            throw config_error("task " + task_id + ": binary tasks need a proper class subset");
        for (int c : positive)
            if (c < 0 || c > 9)
                throw config_error("task " + task_id + ": class index out of range");
    }
}

int TaskSpec::map_label(int label10) const {
    if (label10 < 0 || label10 > 9)
        throw data_error("label " + std::to_string(label10) + " outside 0-9");
    if (kind == Kind::recover || n_label == 10) return label10;
    return std::find(positive.begin(), positive.end(), label10) != positive.end() ? 1 : 0;
}

std::vector<int> default_animal_classes() { return {kBird, kCat, kDeer, kDog, kFrog, kHorse}; }

std::vector<int> default_small_ground_classes() { return {kAutomobile, kCat, kDog, kTruck}; }

namespace {

void load_batch_file(const std::string& path, std::int64_t expected_records,
                     std::vector<std::uint8_t>& images, std::vector<int>& labels) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) throw data_error("missing CIFAR-10 batch file: " + path);
    const std::int64_t record = 1 + Dataset::kImageBytes;
    const auto size = static_cast<std::int64_t>(fs::file_size(path));
    if (size != expected_records * record)
        throw data_error("truncated or corrupt CIFAR-10 batch file: " + path + " (" +
                         std::to_string(size) + " bytes, expected " +
                         std::to_string(expected_records * record) + ")");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open CIFAR-10 batch file: " + path);

    std::vector<std::uint8_t> raw(static_cast<std::size_t>(record));
    for (std::int64_t r = 0; r < expected_records; ++r) {
        in.read(reinterpret_cast<char*>(raw.data()), record);
        if (!in) throw data_error("read failure in CIFAR-10 batch file: " + path);
        const int label = raw[0];
        if (label > 9) throw data_error("corrupt label in CIFAR-10 batch file: " + path);
        labels.push_back(label);
        // planar RGB -> interleaved channels-last
        const std::uint8_t* planes = raw.data() + 1;
        const std::size_t base = images.size();
        images.resize(base + Dataset::kImageBytes);
        constexpr std::int64_t hw = Dataset::kHeight * Dataset::kWidth;
        for (std::int64_t p = 0; p < hw; ++p)
            for (std::int64_t c = 0; c < 3; ++c)
                images[base + static_cast<std::size_t>(p * 3 + c)] = planes[c * hw + p];
    }
}

}  // namespace

Dataset load_cifar10(const std::string& dir) {
    Dataset ds;
    ds.train_images.reserve(50000u * Dataset::kImageBytes);
    ds.train_labels.reserve(50000);
    for (int i = 1; i <= 5; ++i)
        load_batch_file(dir + "/data_batch_" + std::to_string(i) + ".bin", 10000,
                        ds.train_images, ds.train_labels);
    load_batch_file(dir + "/test_batch.bin", 10000, ds.test_images, ds.test_labels);
    return ds;
}

Tensor<float> Dataset::gather_images(std::span<const std::int64_t> indices,
                                     bool from_test) const {
    const auto& src = from_test ? test_images : train_images;
    const std::int64_t n = from_test ? n_test() : n_train();
    Tensor<float> out({static_cast<std::int64_t>(indices.size()), kHeight, kWidth, kChannels});
    float* dst = out.data();
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const std::int64_t idx = indices[b];
        if (idx < 0 || idx >= n) throw data_error("image index out of range");
        const std::uint8_t* img = src.data() + idx * kImageBytes;
        for (std::int64_t j = 0; j < kImageBytes; ++j)
            dst[static_cast<std::int64_t>(b) * kImageBytes + j] = normalize_pixel(img[j]);
    }
    return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::int64_t> indices,
                                        bool from_test) const {
    const auto& src = from_test ? test_labels : train_labels;
    std::vector<int> out;
    out.reserve(indices.size());
    for (const std::int64_t idx : indices) out.push_back(src.at(static_cast<std::size_t>(idx)));
    return out;
}

std::vector<int> map_task_labels(const std::vector<int>& labels10, const TaskSpec& spec) {
    std::vector<int> out;
    out.reserve(labels10.size());
    for (const int y : labels10) out.push_back(spec.map_label(y));
    return out;
}

BatchStream::BatchStream(const Dataset& ds, std::vector<TaskSpec> tasks, std::int64_t batch_size,
                         RngStream rng)
    : ds_(&ds), tasks_(std::move(tasks)), batch_size_(batch_size) {
    if (batch_size_ < 1) throw config_error("batch size must be >= 1");
    restart(rng);
}

std::int64_t BatchStream::batches_per_epoch() const {
    return (ds_->n_train() + batch_size_ - 1) / batch_size_;
}

void BatchStream::restart(RngStream rng) {
    order_.resize(static_cast<std::size_t>(ds_->n_train()));
    for (std::int64_t i = 0; i < ds_->n_train(); ++i) order_[static_cast<std::size_t>(i)] = i;
    // Fisher-Yates with the provided stream
    for (std::int64_t i = ds_->n_train() - 1; i > 0; --i) {
        const auto j = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
        std::swap(order_[static_cast<std::size_t>(i)], order_[static_cast<std::size_t>(j)]);
    }
    cursor_ = 0;
}

bool BatchStream::next(Batch& out) {
    if (cursor_ >= ds_->n_train()) return false;
    const std::int64_t end = std::min(cursor_ + batch_size_, ds_->n_train());
    std::span<const std::int64_t> idx(order_.data() + cursor_,
                                      static_cast<std::size_t>(end - cursor_));
    out.images = ds_->gather_images(idx, /*from_test=*/false);
    out.labels10 = ds_->gather_labels(idx, /*from_test=*/false);
    out.task_labels.clear();
    for (const auto& t : tasks_) out.task_labels.push_back(map_task_labels(out.labels10, t));
    cursor_ = end;
    return true;
}

}  // namespace deepbroadcast::data
