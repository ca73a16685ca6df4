// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "deepbroadcast/net.hpp"
#include "deepbroadcast/tensor.hpp"

namespace deepbroadcast::ckpt {

/// Versioned checkpoint container: a JSON header (variant, epoch, optimizer
/// step, resolved config text, array directory) followed by raw little-endian
/// float32 payloads and a trailing CRC-32. Parameter arrays use their store
/// names; optimizer slots are stored as "adam.m.<name>" / "adam.v.<name>".
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::string variant;
    std::int64_t epoch = 0;
    std::int64_t adam_step = 0;
    std::string config_text;   // resolved experiment config
    std::string metrics_json;  // last epoch record, "" when absent
    std::vector<std::pair<std::string, Tensor<float>>> arrays;

    const Tensor<float>* find(const std::string& name) const {
        for (const auto& [n, t] : arrays)
            if (n == name) return &t;
        return nullptr;
    }
};

void save(const Checkpoint& c, const std::string& path);

/// Load and verify (magic, version, CRC); throws checkpoint_error on any
/// integrity problem.
Checkpoint load(const std::string& path);

/// Copy parameter arrays into a model's store; every parameter must be
/// present with a matching shape (bitwise restore).
template <class ModelT>
void restore_parameters(ModelT& model, const Checkpoint& c) {
    if (c.variant != nn::to_string(model.variant()))
        throw checkpoint_error("checkpoint holds variant '" + c.variant + "', model is '" +
                               nn::to_string(model.variant()) + "'");
    for (auto& [name, p] : model.params().items()) {
        const Tensor<float>* src = c.find(name);
        if (!src) throw checkpoint_error("checkpoint missing parameter: " + name);
        if (src->shape != p->value.shape)
            throw checkpoint_error("checkpoint shape mismatch for " + name + ": " +
                                   src->shape_str() + " vs " + p->value.shape_str());
        p->value.v = src->v;
    }
}

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace deepbroadcast::ckpt
