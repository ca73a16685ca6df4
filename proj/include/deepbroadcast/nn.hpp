// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "deepbroadcast/autograd.hpp"
#include "deepbroadcast/rng.hpp"

namespace deepbroadcast::nn {

/// Ordered registry of named trainable arrays. Order is the construction
/// order, which fixes initialization draws and checkpoint layout.
template <class T>
class ParameterStore {
public:
    Var<T> add(const std::string& name, Var<T> p) {
        if (index_.count(name)) throw config_error("duplicate parameter name: " + name);
        index_[name] = items_.size();
        items_.emplace_back(name, p);
        return p;
    }

    const std::vector<std::pair<std::string, Var<T>>>& items() const { return items_; }

    Var<T> find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw config_error("unknown parameter: " + name);
        return items_[it->second].second;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t size() const { return items_.size(); }

    std::int64_t total_elements() const {
        std::int64_t n = 0;
        for (const auto& [name, p] : items_) n += p->value.numel();
        return n;
    }

    void zero_grads() {
        for (auto& [name, p] : items_)
            if (p->grad.numel() != 0) p->grad.fill(T(0));
    }

private:
    std::vector<std::pair<std::string, Var<T>>> items_;
    std::map<std::string, std::size_t> index_;
};

namespace init {

/// Gaussian fan-in initialization; `gain` is sqrt(2) ahead of ReLU and 1
/// otherwise. An explicit absolute std can be forced via `fixed_std` for
/// inputs on unusual scales (raw dB values).
template <class T>
Tensor<T> gaussian(std::vector<std::int64_t> shape, std::int64_t fan_in, double gain,
                   RngStream& rng, double fixed_std = 0.0) {
    Tensor<T> t(std::move(shape));
    const double std = fixed_std > 0.0 ? fixed_std : gain / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : t.v) x = static_cast<T>(std * rng.gaussian());
    return t;
}

constexpr double kReluGain = 1.4142135623730951;
constexpr double kLinearGain = 1.0;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) bias draw; a nonzero bias keeps
/// layer outputs nondegenerate even when every incoming unit is inactive.
template <class T>
Tensor<T> uniform_bias(std::int64_t n, std::int64_t fan_in, RngStream& rng) {
    Tensor<T> t({n});
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : t.v) x = static_cast<T>(bound * (2.0 * rng.uniform() - 1.0));
    return t;
}

}  // namespace init

/// Fully connected layer y = x W^T + b. Also serves as a 1x1 convolution on
/// channels-last feature maps.
template <class T>
struct Dense {
    Var<T> W, b;
    std::int64_t in = 0, out = 0;

    static Dense create(ParameterStore<T>& store, const std::string& name, std::int64_t in,
                        std::int64_t out, RngStream& rng, double gain = init::kLinearGain,
                        double fixed_std = 0.0) {
        Dense d;
        d.in = in;
        d.out = out;
        d.W = store.add(name + ".weight",
                        parameter(init::gaussian<T>({out, in}, in, gain, rng, fixed_std)));
        d.b = store.add(name + ".bias", parameter(init::uniform_bias<T>(out, in, rng)));
        return d;
    }

    Var<T> operator()(Var<T> x) const { return dense(x, W, b); }
};

/// 2-D convolution layer over (B, H, W, C) maps.
template <class T>
struct Conv2d {
    Var<T> W, b;
    ConvGeom geo;
    std::int64_t cin = 0, cout = 0;

    static Conv2d create(ParameterStore<T>& store, const std::string& name, std::int64_t cin,
                         std::int64_t cout, ConvGeom geo, RngStream& rng,
                         double gain = init::kReluGain) {
        Conv2d c;
        c.geo = geo;
        c.cin = cin;
        c.cout = cout;
        const std::int64_t fan_in = geo.kh * geo.kw * cin;
        c.W = store.add(name + ".weight",
                        parameter(init::gaussian<T>({fan_in, cout}, fan_in, gain, rng)));
        c.b = store.add(name + ".bias", parameter(init::uniform_bias<T>(cout, fan_in, rng)));
        return c;
    }

    Var<T> operator()(Var<T> x) const { return conv2d(x, W, b, geo); }
};

/// Transposed 2-D convolution layer.
template <class T>
struct ConvTranspose2d {
    Var<T> W, b;
    ConvGeom geo;
    std::int64_t cin = 0, cout = 0;

    static ConvTranspose2d create(ParameterStore<T>& store, const std::string& name,
                                  std::int64_t cin, std::int64_t cout, ConvGeom geo,
                                  RngStream& rng, double gain = init::kReluGain) {
        ConvTranspose2d c;
        c.geo = geo;
        c.cin = cin;
        c.cout = cout;
        const std::int64_t fan_in = geo.kh * geo.kw * cin;
        c.W = store.add(name + ".weight", parameter(init::gaussian<T>(
                                              {cin, geo.kh * geo.kw * cout}, fan_in, gain, rng)));
        c.b = store.add(name + ".bias", parameter(init::uniform_bias<T>(cout, fan_in, rng)));
        return c;
    }

    Var<T> operator()(Var<T> x) const { return conv_transpose2d(x, W, b, geo); }
};

template <class T>
struct LayerNorm {
    Var<T> gamma, beta;

    static LayerNorm create(ParameterStore<T>& store, const std::string& name, std::int64_t dim) {
        LayerNorm n;
        n.gamma = store.add(name + ".gain", parameter(Tensor<T>::full({dim}, T(1))));
        n.beta = store.add(name + ".bias", parameter(Tensor<T>::zeros({dim})));
        return n;
    }

    Var<T> operator()(Var<T> x) const { return layer_norm(x, gamma, beta); }
};

}  // namespace deepbroadcast::nn
