// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "deepbroadcast/chansim.hpp"
#include "deepbroadcast/error.hpp"
#include "deepbroadcast/tensor.hpp"

namespace deepbroadcast::nn {

// ---------------------------------------------------------------------------
// Reverse-mode autodiff over Tensor<T>. The graph is built dynamically per
// forward pass; nodes hold their value, a lazily allocated gradient, and a
// closure that pushes the gradient to their parents. Graphs rooted only in
// constants carry no closures, so inference pays nothing for the machinery.
// ---------------------------------------------------------------------------

template <class T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backprop;
    bool requires_grad = false;

    Tensor<T>& ensure_grad() {
        if (grad.numel() == 0) grad = Tensor<T>::zeros(value.shape);
        return grad;
    }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

template <class T>
Var<T> constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return n;
}

template <class T>
Var<T> parameter(Tensor<T> value) {
    auto n = constant(std::move(value));
    n->requires_grad = true;
    return n;
}

template <class T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backprop) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

/// Run reverse-mode accumulation from a scalar root. Gradients accumulate
/// (+=) into every reachable node with requires_grad set.
template <class T>
void backward(const Var<T>& root) {
    if (!root || !root->requires_grad) return;
    if (root->value.numel() != 1) throw shape_error("backward: root must be a scalar");

    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    struct Frame {
        Node<T>* n;
        std::size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->parents.size()) {
            Node<T>* p = f.n->parents[f.next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }
    root->ensure_grad().v[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backprop && n->grad.numel() != 0) n->backprop(*n);
    }
}

namespace detail {

template <class T>
void axpy(std::int64_t n, T a, const T* x, T* y) {
    for (std::int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
Tensor<T>& acc(Var<T>& p) {
    return p->ensure_grad();
}

}  // namespace detail

// --------------------------- elementwise ops -------------------------------

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
    require_same_shape(a->value, b->value, "add");
    Tensor<T> out = a->value;
    const T* bv = b->value.data();
    T* ov = out.data();
    parallel_for_chunks(out.numel(), 4096, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) ov[i] += bv[i];
    });
    return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) mutable {
        const T* g = n.grad.data();
        const std::int64_t ne = n.grad.numel();
        if (a->requires_grad) detail::axpy(ne, T(1), g, detail::acc(a).data());
        if (b->requires_grad) detail::axpy(ne, T(1), g, detail::acc(b).data());
    });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
    require_same_shape(a->value, b->value, "mul");
    Tensor<T> out = a->value;
    const T* bv = b->value.data();
    T* ov = out.data();
    parallel_for_chunks(out.numel(), 4096, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) ov[i] *= bv[i];
    });
    return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) mutable {
        const T* g = n.grad.data();
        const std::int64_t ne = n.grad.numel();
        if (a->requires_grad) {
            T* ga = detail::acc(a).data();
            const T* bv2 = b->value.data();
            for (std::int64_t i = 0; i < ne; ++i) ga[i] += g[i] * bv2[i];
        }
        if (b->requires_grad) {
            T* gb = detail::acc(b).data();
            const T* av = a->value.data();
            for (std::int64_t i = 0; i < ne; ++i) gb[i] += g[i] * av[i];
        }
    });
}

template <class T>
Var<T> scale(Var<T> a, T c) {
    Tensor<T> out = a->value;
    for (auto& x : out.v) x *= c;
    return make_op<T>(std::move(out), {a}, [a, c](Node<T>& n) mutable {
        detail::axpy(n.grad.numel(), c, n.grad.data(), detail::acc(a).data());
    });
}

template <class T>
Var<T> relu(Var<T> a) {
    Tensor<T> out = a->value;
    for (auto& x : out.v)
        if (x < T(0)) x = T(0);
    return make_op<T>(std::move(out), {a}, [a](Node<T>& n) mutable {
        const T* g = n.grad.data();
        const T* x = a->value.data();
        T* ga = detail::acc(a).data();
        const std::int64_t ne = n.grad.numel();
        for (std::int64_t i = 0; i < ne; ++i)
            if (x[i] > T(0)) ga[i] += g[i];
    });
}

template <class T>
Var<T> sigmoid(Var<T> a) {
    Tensor<T> out = a->value;
    for (auto& x : out.v) {
        const double xd = static_cast<double>(x);
        x = static_cast<T>(xd >= 0.0 ? 1.0 / (1.0 + std::exp(-xd))
                                     : std::exp(xd) / (1.0 + std::exp(xd)));
    }
    auto y = std::make_shared<Tensor<T>>(out);
    return make_op<T>(std::move(out), {a}, [a, y](Node<T>& n) mutable {
        const T* g = n.grad.data();
        const T* yv = y->data();
        T* ga = detail::acc(a).data();
        const std::int64_t ne = n.grad.numel();
        for (std::int64_t i = 0; i < ne; ++i) ga[i] += g[i] * yv[i] * (T(1) - yv[i]);
    });
}

/// softplus(x) + floor, the positivity map for latent scale outputs.
template <class T>
Var<T> softplus_floor(Var<T> a, T floor) {
    Tensor<T> out = a->value;
    for (auto& x : out.v) {
        const double xd = static_cast<double>(x);
        const double sp = xd > 30.0 ? xd : (xd < -30.0 ? std::exp(xd) : std::log1p(std::exp(xd)));
        x = static_cast<T>(sp) + floor;
    }
    return make_op<T>(std::move(out), {a}, [a](Node<T>& n) mutable {
        const T* g = n.grad.data();
        const T* x = a->value.data();
        T* ga = detail::acc(a).data();
        const std::int64_t ne = n.grad.numel();
        for (std::int64_t i = 0; i < ne; ++i) {
            const double xd = static_cast<double>(x[i]);
            const double s = xd >= 0.0 ? 1.0 / (1.0 + std::exp(-xd))
                                       : std::exp(xd) / (1.0 + std::exp(xd));
            ga[i] += g[i] * static_cast<T>(s);
        }
    });
}

// ------------------------------ shape ops ----------------------------------

template <class T>
Var<T> reshape(Var<T> a, std::vector<std::int64_t> shape) {
    Tensor<T> out = a->value.reshaped(std::move(shape));
    return make_op<T>(std::move(out), {a}, [a](Node<T>& n) mutable {
        detail::axpy(n.grad.numel(), T(1), n.grad.data(), detail::acc(a).data());
    });
}

template <class T>
Var<T> concat_last(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw shape_error("concat_last: no inputs");
    const std::int64_t rows = xs[0]->value.rows();
    std::int64_t total = 0;
    for (const auto& x : xs) {
        if (x->value.rows() != rows) throw shape_error("concat_last: row mismatch");
        total += x->value.last();
    }
    std::vector<std::int64_t> shape = xs[0]->value.shape;
    shape.back() = total;
    Tensor<T> out(shape);
    std::int64_t off = 0;
    for (const auto& x : xs) {
        const std::int64_t d = x->value.last();
        const T* src = x->value.data();
        T* dst = out.data();
        parallel_for(rows, [&](std::int64_t r) {
            std::copy(src + r * d, src + (r + 1) * d, dst + r * total + off);
        });
        off += d;
    }
    auto parents = xs;
    return make_op<T>(std::move(out), xs, [parents, rows, total](Node<T>& n) mutable {
        const T* g = n.grad.data();
        std::int64_t off2 = 0;
        for (auto& x : parents) {
            const std::int64_t d = x->value.last();
            if (x->requires_grad) {
                T* gx = detail::acc(x).data();
                for (std::int64_t r = 0; r < rows; ++r)
                    detail::axpy(d, T(1), g + r * total + off2, gx + r * d);
            }
            off2 += d;
        }
    });
}

// ----------------------------- dense / matmul -------------------------------

/// y = x * W^T + b over the trailing dimension; x is treated as
/// (rows, in), W is (out, in), b is (out). Works for both (B, in) vectors
/// and (B, H, W, in) feature maps (a 1x1 convolution).
template <class T>
Var<T> dense(Var<T> x, Var<T> W, Var<T> b) {
    const std::int64_t in = x->value.last();
    const std::int64_t rows = x->value.rows();
    if (W->value.rank() != 2 || W->value.dim(1) != in)
        throw shape_error("dense: weight " + W->value.shape_str() + " does not accept input " +
                          x->value.shape_str());
    const std::int64_t out_dim = W->value.dim(0);
    if (b->value.numel() != out_dim) throw shape_error("dense: bias size mismatch");

    std::vector<std::int64_t> oshape = x->value.shape;
    oshape.back() = out_dim;
    Tensor<T> out(oshape);
    T* ov = out.data();
    const T* bv = b->value.data();
    parallel_for(rows, [&](std::int64_t r) {
        std::copy(bv, bv + out_dim, ov + r * out_dim);
    });
    gemm_nt(rows, out_dim, in, x->value.data(), W->value.data(), ov);

    return make_op<T>(std::move(out), {x, W, b}, [x, W, b, rows, in, out_dim](Node<T>& n) mutable {
        const T* g = n.grad.data();
        if (x->requires_grad)
            gemm_nn(rows, in, out_dim, g, W->value.data(), detail::acc(x).data());
        if (W->requires_grad)
            gemm_tn(out_dim, in, rows, g, x->value.data(), detail::acc(W).data());
        if (b->requires_grad) {
            T* gb = detail::acc(b).data();
            for (std::int64_t r = 0; r < rows; ++r) detail::axpy(out_dim, T(1), g + r * out_dim, gb);
        }
    });
}

// ------------------------------ convolution --------------------------------

/// Kernel geometry shared by conv2d and conv_transpose2d. A grid position
/// (i, j) with kernel offset (u, v) touches image pixel
/// (i*sh - ph + u, j*sw - pw + v).
struct ConvGeom {
    std::int64_t kh = 3, kw = 3;
    std::int64_t sh = 1, sw = 1;
    std::int64_t ph = 1, pw = 1;

    std::int64_t grid_h(std::int64_t image_h) const { return (image_h + 2 * ph - kh) / sh + 1; }
    std::int64_t grid_w(std::int64_t image_w) const { return (image_w + 2 * pw - kw) / sw + 1; }
    std::int64_t image_h(std::int64_t grid_h_) const { return (grid_h_ - 1) * sh - 2 * ph + kh; }
    std::int64_t image_w(std::int64_t grid_w_) const { return (grid_w_ - 1) * sw - 2 * pw + kw; }
};

namespace detail {

/// Gather image patches into rows: cols is (B*Gh*Gw, kh*kw*C).
template <class T>
void im2col(const T* img, std::int64_t B, std::int64_t IH, std::int64_t IW, std::int64_t C,
            const ConvGeom& geo, std::int64_t GH, std::int64_t GW, T* cols) {
    const std::int64_t K = geo.kh * geo.kw * C;
    parallel_for(B * GH, [&](std::int64_t bg) {
        const std::int64_t b = bg / GH;
        const std::int64_t i = bg % GH;
        for (std::int64_t j = 0; j < GW; ++j) {
            T* row = cols + ((b * GH + i) * GW + j) * K;
            for (std::int64_t u = 0; u < geo.kh; ++u) {
                const std::int64_t y = i * geo.sh - geo.ph + u;
                for (std::int64_t v = 0; v < geo.kw; ++v) {
                    const std::int64_t x = j * geo.sw - geo.pw + v;
                    T* dst = row + (u * geo.kw + v) * C;
                    if (y < 0 || y >= IH || x < 0 || x >= IW) {
                        std::fill(dst, dst + C, T(0));
                    } else {
                        const T* src = img + ((b * IH + y) * IW + x) * C;
                        std::copy(src, src + C, dst);
                    }
                }
            }
        }
    });
}

/// Adjoint of im2col: scatter-add rows back into the image.
template <class T>
void col2im_add(const T* cols, std::int64_t B, std::int64_t IH, std::int64_t IW, std::int64_t C,
                const ConvGeom& geo, std::int64_t GH, std::int64_t GW, T* img) {
    const std::int64_t K = geo.kh * geo.kw * C;
    // one thread per sample: every image pixel is written by a single thread
    parallel_for(B, [&](std::int64_t b) {
        for (std::int64_t i = 0; i < GH; ++i) {
            for (std::int64_t j = 0; j < GW; ++j) {
                const T* row = cols + ((b * GH + i) * GW + j) * K;
                for (std::int64_t u = 0; u < geo.kh; ++u) {
                    const std::int64_t y = i * geo.sh - geo.ph + u;
                    if (y < 0 || y >= IH) continue;
                    for (std::int64_t v = 0; v < geo.kw; ++v) {
                        const std::int64_t x = j * geo.sw - geo.pw + v;
                        if (x < 0 || x >= IW) continue;
                        T* dst = img + ((b * IH + y) * IW + x) * C;
                        const T* src = row + (u * geo.kw + v) * C;
                        for (std::int64_t c = 0; c < C; ++c) dst[c] += src[c];
                    }
                }
            }
        }
    });
}

}  // namespace detail

/// 2-D convolution on (B, H, W, Cin); weight is (kh*kw*Cin, Cout) flattened
/// in (u, v, cin) order, bias is (Cout).
template <class T>
Var<T> conv2d(Var<T> x, Var<T> W, Var<T> b, const ConvGeom& geo) {
    if (x->value.rank() != 4) throw shape_error("conv2d: input must be (B,H,W,C)");
    const std::int64_t B = x->value.dim(0), H = x->value.dim(1), Wd = x->value.dim(2),
                       C = x->value.dim(3);
    const std::int64_t K = geo.kh * geo.kw * C;
    if (W->value.rank() != 2 || W->value.dim(0) != K)
        throw shape_error("conv2d: weight shape " + W->value.shape_str() + " incompatible");
    const std::int64_t Cout = W->value.dim(1);
    const std::int64_t GH = geo.grid_h(H), GW = geo.grid_w(Wd);
    if (GH < 1 || GW < 1) throw shape_error("conv2d: kernel larger than padded input");

    auto cols = std::make_shared<Tensor<T>>(std::vector<std::int64_t>{B * GH * GW, K});
    detail::im2col(x->value.data(), B, H, Wd, C, geo, GH, GW, cols->data());

    Tensor<T> out({B, GH, GW, Cout});
    T* ov = out.data();
    const T* bv = b->value.data();
    parallel_for(B * GH * GW, [&](std::int64_t r) { std::copy(bv, bv + Cout, ov + r * Cout); });
    gemm_nn(B * GH * GW, Cout, K, cols->data(), W->value.data(), ov);

    return make_op<T>(std::move(out), {x, W, b},
                      [x, W, b, cols, geo, B, H, Wd, C, K, Cout, GH, GW](Node<T>& n) mutable {
                          const T* g = n.grad.data();
                          const std::int64_t R = B * GH * GW;
                          if (x->requires_grad) {
                              Tensor<T> dcols({R, K});
                              gemm_nt(R, K, Cout, g, W->value.data(), dcols.data());
                              detail::col2im_add(dcols.data(), B, H, Wd, C, geo, GH, GW,
                                                 detail::acc(x).data());
                          }
                          if (W->requires_grad)
                              gemm_tn(K, Cout, R, cols->data(), g, detail::acc(W).data());
                          if (b->requires_grad) {
                              T* gb = detail::acc(b).data();
                              for (std::int64_t r = 0; r < R; ++r)
                                  detail::axpy(Cout, T(1), g + r * Cout, gb);
                          }
                      });
}

/// Transposed 2-D convolution on (B, H, W, Cin); weight is
/// (Cin, kh*kw*Cout), bias (Cout). Output spatial size is
/// (H-1)*sh - 2*ph + kh.
template <class T>
Var<T> conv_transpose2d(Var<T> x, Var<T> W, Var<T> b, const ConvGeom& geo) {
    if (x->value.rank() != 4) throw shape_error("conv_transpose2d: input must be (B,H,W,C)");
    const std::int64_t B = x->value.dim(0), H = x->value.dim(1), Wd = x->value.dim(2),
                       C = x->value.dim(3);
    if (W->value.rank() != 2 || W->value.dim(0) != C)
        throw shape_error("conv_transpose2d: weight shape " + W->value.shape_str() +
                          " incompatible");
    const std::int64_t K = W->value.dim(1);
    const std::int64_t Cout = K / (geo.kh * geo.kw);
    if (Cout * geo.kh * geo.kw != K)
        throw shape_error("conv_transpose2d: weight columns not divisible by kernel size");
    const std::int64_t OH = geo.image_h(H), OW = geo.image_w(Wd);
    if (OH < 1 || OW < 1) throw shape_error("conv_transpose2d: degenerate output size");

    Tensor<T> cols({B * H * Wd, K});
    gemm_nn(B * H * Wd, K, C, x->value.data(), W->value.data(), cols.data());
    Tensor<T> out({B, OH, OW, Cout});
    const T* bv = b->value.data();
    T* ov = out.data();
    parallel_for(B * OH * OW, [&](std::int64_t r) { std::copy(bv, bv + Cout, ov + r * Cout); });
    detail::col2im_add(cols.data(), B, OH, OW, Cout, geo, H, Wd, ov);

    return make_op<T>(std::move(out), {x, W, b},
                      [x, W, b, geo, B, H, Wd, C, K, Cout, OH, OW](Node<T>& n) mutable {
                          const T* g = n.grad.data();
                          Tensor<T> dcols({B * H * Wd, K});
                          detail::im2col(g, B, OH, OW, Cout, geo, H, Wd, dcols.data());
                          if (x->requires_grad)
                              gemm_nt(B * H * Wd, C, K, dcols.data(), W->value.data(),
                                      detail::acc(x).data());
                          if (W->requires_grad)
                              gemm_tn(C, K, B * H * Wd, x->value.data(), dcols.data(),
                                      detail::acc(W).data());
                          if (b->requires_grad) {
                              T* gb = detail::acc(b).data();
                              for (std::int64_t r = 0; r < B * OH * OW; ++r)
                                  detail::axpy(Cout, T(1), g + r * Cout, gb);
                          }
                      });
}

// ------------------------- normalization / softmax --------------------------

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
    const std::int64_t D = x->value.last();
    const std::int64_t R = x->value.rows();
    if (gamma->value.numel() != D || beta->value.numel() != D)
        throw shape_error("layer_norm: gain/bias size mismatch");
    Tensor<T> out(x->value.shape);
    auto xhat = std::make_shared<Tensor<T>>(x->value.shape);
    auto inv_std = std::make_shared<Tensor<T>>(std::vector<std::int64_t>{R});
    const T* xv = x->value.data();
    const T* gv = gamma->value.data();
    const T* bv = beta->value.data();
    T* ov = out.data();
    T* hv = xhat->data();
    T* sv = inv_std->data();
    parallel_for(R, [&](std::int64_t r) {
        const T* row = xv + r * D;
        double m = 0;
        for (std::int64_t i = 0; i < D; ++i) m += row[i];
        m /= static_cast<double>(D);
        double var = 0;
        for (std::int64_t i = 0; i < D; ++i) {
            const double d = row[i] - m;
            var += d * d;
        }
        var /= static_cast<double>(D);
        const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
        sv[r] = static_cast<T>(is);
        for (std::int64_t i = 0; i < D; ++i) {
            const T h = static_cast<T>((row[i] - m) * is);
            hv[r * D + i] = h;
            ov[r * D + i] = gv[i] * h + bv[i];
        }
    });
    return make_op<T>(std::move(out), {x, gamma, beta},
                      [x, gamma, beta, xhat, inv_std, R, D](Node<T>& n) mutable {
                          const T* g = n.grad.data();
                          const T* hv2 = xhat->data();
                          const T* gv2 = gamma->value.data();
                          if (gamma->requires_grad || beta->requires_grad) {
                              T* gg = gamma->requires_grad ? detail::acc(gamma).data() : nullptr;
                              T* gb = beta->requires_grad ? detail::acc(beta).data() : nullptr;
                              for (std::int64_t r = 0; r < R; ++r)
                                  for (std::int64_t i = 0; i < D; ++i) {
                                      if (gg) gg[i] += g[r * D + i] * hv2[r * D + i];
                                      if (gb) gb[i] += g[r * D + i];
                                  }
                          }
                          if (x->requires_grad) {
                              T* gx = detail::acc(x).data();
                              const T* sv2 = inv_std->data();
                              parallel_for(R, [&](std::int64_t r) {
                                  double mean_gh = 0, mean_ghh = 0;
                                  for (std::int64_t i = 0; i < D; ++i) {
                                      const double gh = static_cast<double>(g[r * D + i]) * gv2[i];
                                      mean_gh += gh;
                                      mean_ghh += gh * hv2[r * D + i];
                                  }
                                  mean_gh /= static_cast<double>(D);
                                  mean_ghh /= static_cast<double>(D);
                                  for (std::int64_t i = 0; i < D; ++i) {
                                      const double gh = static_cast<double>(g[r * D + i]) * gv2[i];
                                      gx[r * D + i] += static_cast<T>(
                                          sv2[r] * (gh - mean_gh - hv2[r * D + i] * mean_ghh));
                                  }
                              });
                          }
                      });
}

/// Row-wise softmax over the trailing dimension (per-position channel
/// attention when applied to (B, H, W, C) maps).
template <class T>
Var<T> softmax_last(Var<T> x) {
    const std::int64_t D = x->value.last();
    const std::int64_t R = x->value.rows();
    Tensor<T> out(x->value.shape);
    const T* xv = x->value.data();
    T* ov = out.data();
    parallel_for(R, [&](std::int64_t r) {
        const T* row = xv + r * D;
        T* orow = ov + r * D;
        T mx = row[0];
        for (std::int64_t i = 1; i < D; ++i) mx = std::max(mx, row[i]);
        double sum = 0;
        for (std::int64_t i = 0; i < D; ++i) {
            const double e = std::exp(static_cast<double>(row[i] - mx));
            orow[i] = static_cast<T>(e);
            sum += e;
        }
        const T inv = static_cast<T>(1.0 / sum);
        for (std::int64_t i = 0; i < D; ++i) orow[i] *= inv;
    });
    auto y = std::make_shared<Tensor<T>>(out);
    return make_op<T>(std::move(out), {x}, [x, y, R, D](Node<T>& n) mutable {
        const T* g = n.grad.data();
        const T* yv = y->data();
        T* gx = detail::acc(x).data();
        parallel_for(R, [&](std::int64_t r) {
            double dot = 0;
            for (std::int64_t i = 0; i < D; ++i) dot += static_cast<double>(g[r * D + i]) * yv[r * D + i];
            for (std::int64_t i = 0; i < D; ++i)
                gx[r * D + i] += yv[r * D + i] * (g[r * D + i] - static_cast<T>(dot));
        });
    });
}

/// Per-row unit-power scaling y = s / sqrt(mean(s^2)); rejects all-zero rows.
template <class T>
Var<T> power_norm_rows(Var<T> x) {
    const std::int64_t D = x->value.last();
    const std::int64_t R = x->value.rows();
    Tensor<T> out(x->value.shape);
    auto inv_rms = std::make_shared<Tensor<T>>(std::vector<std::int64_t>{R});
    const T* xv = x->value.data();
    T* ov = out.data();
    T* iv = inv_rms->data();
    for (std::int64_t r = 0; r < R; ++r) {
        const T* row = xv + r * D;
        double ms = 0;
        for (std::int64_t i = 0; i < D; ++i)
            ms += static_cast<double>(row[i]) * static_cast<double>(row[i]);
        ms /= static_cast<double>(D);
        if (ms == 0.0)
            throw degenerate_signal_error("power_norm: all-zero signal in row " +
                                          std::to_string(r));
        const T inv = static_cast<T>(1.0 / std::sqrt(ms));
        iv[r] = inv;
        for (std::int64_t i = 0; i < D; ++i) ov[r * D + i] = row[i] * inv;
    }
    auto y = std::make_shared<Tensor<T>>(out);
    return make_op<T>(std::move(out), {x}, [x, y, inv_rms, R, D](Node<T>& n) mutable {
        const T* g = n.grad.data();
        const T* yv = y->data();
        const T* iv2 = inv_rms->data();
        T* gx = detail::acc(x).data();
        parallel_for(R, [&](std::int64_t r) {
            double dot = 0;
            for (std::int64_t i = 0; i < D; ++i) dot += static_cast<double>(g[r * D + i]) * yv[r * D + i];
            const T corr = static_cast<T>(dot / static_cast<double>(D));
            for (std::int64_t i = 0; i < D; ++i)
                gx[r * D + i] += iv2[r] * (g[r * D + i] - yv[r * D + i] * corr);
        });
    });
}

// ------------------------------- channel op ---------------------------------

/// Differentiable channel corruption with a fixed sampled realization:
/// identity-gradient for AWGN/equalized paths, conj(h) rotation otherwise.
template <class T>
Var<T> apply_channel(Var<T> z, std::shared_ptr<const chansim::BatchRealization<T>> real) {
    Tensor<T> out = real->apply(z->value);
    return make_op<T>(std::move(out), {z}, [z, real](Node<T>& n) mutable {
        Tensor<T> g = n.grad;
        real->backprop_inplace(g.data());
        detail::axpy(g.numel(), T(1), g.data(), detail::acc(z).data());
    });
}

// -------------------------------- losses ------------------------------------

/// Mean negative log-likelihood of the labeled class under softmax(logits);
/// numerically stable log-sum-exp, mean reduction over rows.
template <class T>
Var<T> cross_entropy(Var<T> logits, const std::vector<int>& labels) {
    const std::int64_t K = logits->value.last();
    const std::int64_t B = logits->value.rows();
    if (static_cast<std::int64_t>(labels.size()) != B)
        throw shape_error("cross_entropy: label count mismatch");
    for (const int y : labels)
        if (y < 0 || y >= K)
            throw config_error("cross_entropy: label " + std::to_string(y) + " out of range [0," +
                               std::to_string(K) + ")");
    auto probs = std::make_shared<Tensor<T>>(logits->value.shape);
    const T* lv = logits->value.data();
    T* pv = probs->data();
    double loss = 0;
    for (std::int64_t r = 0; r < B; ++r) {
        const T* row = lv + r * K;
        T mx = row[0];
        for (std::int64_t i = 1; i < K; ++i) mx = std::max(mx, row[i]);
        double sum = 0;
        for (std::int64_t i = 0; i < K; ++i) {
            const double e = std::exp(static_cast<double>(row[i] - mx));
            pv[r * K + i] = static_cast<T>(e);
            sum += e;
        }
        const double lse = std::log(sum) + static_cast<double>(mx);
        loss += lse - static_cast<double>(row[labels[static_cast<std::size_t>(r)]]);
        const T inv = static_cast<T>(1.0 / sum);
        for (std::int64_t i = 0; i < K; ++i) pv[r * K + i] *= inv;
    }
    Tensor<T> out({std::int64_t{1}});
    out.v[0] = static_cast<T>(loss / static_cast<double>(B));
    return make_op<T>(std::move(out), {logits}, [logits, probs, labels, B, K](Node<T>& n) mutable {
        const T g = n.grad.v[0] / static_cast<T>(B);
        T* gx = detail::acc(logits).data();
        const T* pv2 = probs->data();
        for (std::int64_t r = 0; r < B; ++r) {
            for (std::int64_t i = 0; i < K; ++i) gx[r * K + i] += g * pv2[r * K + i];
            gx[r * K + labels[static_cast<std::size_t>(r)]] -= g;
        }
    });
}

/// Mean absolute deviation against a fixed target.
template <class T>
Var<T> l1_loss(Var<T> pred, const Tensor<T>& target) {
    require_same_shape(pred->value, target, "l1_loss");
    const std::int64_t N = pred->value.numel();
    double acc = 0;
    const T* p = pred->value.data();
    const T* t = target.data();
    for (std::int64_t i = 0; i < N; ++i) acc += std::abs(static_cast<double>(p[i]) - t[i]);
    Tensor<T> out({std::int64_t{1}});
    out.v[0] = static_cast<T>(acc / static_cast<double>(N));
    auto tgt = std::make_shared<Tensor<T>>(target);
    return make_op<T>(std::move(out), {pred}, [pred, tgt, N](Node<T>& n) mutable {
        const T g = n.grad.v[0] / static_cast<T>(N);
        T* gx = detail::acc(pred).data();
        const T* p2 = pred->value.data();
        const T* t2 = tgt->data();
        for (std::int64_t i = 0; i < N; ++i) {
            if (p2[i] > t2[i])
                gx[i] += g;
            else if (p2[i] < t2[i])
                gx[i] -= g;
        }
    });
}

/// Closed-form KL divergence of N(mu, diag(sigma^2)) from N(0, I), summed
/// over the latent dimension and averaged over the batch:
///   sum_k ((mu_k^2 + sigma_k^2 - 1)/2 - log sigma_k).
template <class T>
Var<T> gaussian_kl(Var<T> mu, Var<T> sigma) {
    require_same_shape(mu->value, sigma->value, "gaussian_kl");
    const std::int64_t B = mu->value.rows();
    const std::int64_t N = mu->value.numel();
    const T* m = mu->value.data();
    const T* s = sigma->value.data();
    double acc = 0;
    for (std::int64_t i = 0; i < N; ++i) {
        const double md = m[i], sd = s[i];
        if (!(sd > 0)) throw config_error("gaussian_kl: sigma must be strictly positive");
        acc += (md * md + sd * sd - 1.0) * 0.5 - std::log(sd);
    }
    Tensor<T> out({std::int64_t{1}});
    out.v[0] = static_cast<T>(acc / static_cast<double>(B));
    return make_op<T>(std::move(out), {mu, sigma}, [mu, sigma, B, N](Node<T>& n) mutable {
        const T g = n.grad.v[0] / static_cast<T>(B);
        if (mu->requires_grad) {
            T* gm = detail::acc(mu).data();
            const T* m2 = mu->value.data();
            for (std::int64_t i = 0; i < N; ++i) gm[i] += g * m2[i];
        }
        if (sigma->requires_grad) {
            T* gs = detail::acc(sigma).data();
            const T* s2 = sigma->value.data();
            for (std::int64_t i = 0; i < N; ++i) gs[i] += g * (s2[i] - T(1) / s2[i]);
        }
    });
}

/// total = sum_i coeff_i * scalar_i.
template <class T>
Var<T> weighted_sum(const std::vector<Var<T>>& scalars, const std::vector<double>& coeffs) {
    if (scalars.size() != coeffs.size() || scalars.empty())
        throw shape_error("weighted_sum: size mismatch or empty");
    double acc = 0;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        if (scalars[i]->value.numel() != 1) throw shape_error("weighted_sum: non-scalar term");
        acc += coeffs[i] * static_cast<double>(scalars[i]->value.v[0]);
    }
    Tensor<T> out({std::int64_t{1}});
    out.v[0] = static_cast<T>(acc);
    auto parents = scalars;
    return make_op<T>(std::move(out), scalars, [parents, coeffs](Node<T>& n) mutable {
        for (std::size_t i = 0; i < parents.size(); ++i)
            if (parents[i]->requires_grad)
                detail::acc(parents[i]).v[0] += n.grad.v[0] * static_cast<T>(coeffs[i]);
    });
}

}  // namespace deepbroadcast::nn
