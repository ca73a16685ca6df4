// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "deepbroadcast/error.hpp"

namespace deepbroadcast {

/// Dense row-major tensor with value semantics. Activations use a
/// channels-last (B, H, W, C) layout so 1x1 convolutions and per-position
/// channel softmax are contiguous operations.
template <class T>
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)), v(checked_numel(shape)) {}
    Tensor(std::vector<std::int64_t> s, T fill)
        : shape(std::move(s)), v(checked_numel(shape), fill) {}

    static Tensor zeros(std::vector<std::int64_t> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<std::int64_t> s, T value) { return Tensor(std::move(s), value); }

    static std::int64_t checked_numel(const std::vector<std::int64_t>& s) {
        std::int64_t n = 1;
        for (auto d : s) {
            if (d < 0) throw shape_error("negative tensor dimension");
            n *= d;
        }
        return n;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    std::int64_t dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

    /// Size of the trailing dimension; tensors are treated as (rows, last)
    /// matrices by all row-wise kernels.
    std::int64_t last() const { return shape.empty() ? 1 : shape.back(); }
    std::int64_t rows() const { return last() == 0 ? 0 : numel() / last(); }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }

    Tensor reshaped(std::vector<std::int64_t> s) const {
        if (checked_numel(s) != numel())
            throw shape_error("reshape changes element count: " + shape_str() + " -> " +
                              shape_str(s));
        Tensor out;
        out.shape = std::move(s);
        out.v = v;
        return out;
    }

    std::string shape_str() const { return shape_str(shape); }

    static std::string shape_str(const std::vector<std::int64_t>& s) {
        std::ostringstream os;
        os << '(';
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
        os << ')';
        return os.str();
    }
};

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!a.same_shape(b))
        throw shape_error(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                          b.shape_str());
}

// ---------------------------------------------------------------------------
// Parallel helpers. Work is split into fixed chunks per thread so that every
// output element is produced by exactly one thread in a fixed order; results
// are bitwise reproducible for a given build regardless of thread count.
// ---------------------------------------------------------------------------

template <class F>
void parallel_for(std::int64_t n, F&& fn) {
    if (n <= 0) return;
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) fn(i);
#else
    for (std::int64_t i = 0; i < n; ++i) fn(i);
#endif
}

/// Chunked variant: fn(begin, end) on contiguous ranges.
template <class F>
void parallel_for_chunks(std::int64_t n, std::int64_t min_chunk, F&& fn) {
    if (n <= 0) return;
#if defined(_OPENMP)
    const std::int64_t chunks = std::max<std::int64_t>(1, (n + min_chunk - 1) / min_chunk);
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < chunks; ++c) {
        const std::int64_t b = c * min_chunk;
        const std::int64_t e = std::min(n, b + min_chunk);
        if (b < e) fn(b, e);
    }
#else
    fn(std::int64_t{0}, n);
#endif
}

// ---------------------------------------------------------------------------
// GEMM kernels (row-major, accumulating: C += op(A) * op(B)).
// Parallelism is over rows of C; each row is accumulated serially in a fixed
// k order, so results do not depend on the thread count.
// ---------------------------------------------------------------------------

/// C(MxN) += A(MxK) * B(KxN)
template <class T>
void gemm_nn(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, const T* B, T* C) {
    constexpr std::int64_t kRowChunk = 8;
    parallel_for_chunks(M, kRowChunk, [&](std::int64_t m0, std::int64_t m1) {
        for (std::int64_t m = m0; m < m1; ++m) {
            const T* a = A + m * K;
            T* c = C + m * N;
            for (std::int64_t k = 0; k < K; ++k) {
                const T ak = a[k];
                const T* b = B + k * N;
                for (std::int64_t n = 0; n < N; ++n) c[n] += ak * b[n];
            }
        }
    });
}

/// C(MxN) += A(MxK) * B(NxK)^T
template <class T>
void gemm_nt(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, const T* B, T* C) {
    constexpr std::int64_t kRowChunk = 8;
    parallel_for_chunks(M, kRowChunk, [&](std::int64_t m0, std::int64_t m1) {
        for (std::int64_t m = m0; m < m1; ++m) {
            const T* a = A + m * K;
            T* c = C + m * N;
            std::int64_t n = 0;
            for (; n + 4 <= N; n += 4) {
                const T* b0 = B + (n + 0) * K;
                const T* b1 = B + (n + 1) * K;
                const T* b2 = B + (n + 2) * K;
                const T* b3 = B + (n + 3) * K;
                T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
                for (std::int64_t k = 0; k < K; ++k) {
                    const T ak = a[k];
                    s0 += ak * b0[k];
                    s1 += ak * b1[k];
                    s2 += ak * b2[k];
                    s3 += ak * b3[k];
                }
                c[n + 0] += s0;
                c[n + 1] += s1;
                c[n + 2] += s2;
                c[n + 3] += s3;
            }
            for (; n < N; ++n) {
                const T* b = B + n * K;
                T s = 0;
                for (std::int64_t k = 0; k < K; ++k) s += a[k] * b[k];
                c[n] += s;
            }
        }
    });
}

/// C(MxN) += A(KxM)^T * B(KxN)
template <class T>
void gemm_tn(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, const T* B, T* C) {
    constexpr std::int64_t kRowChunk = 8;
    parallel_for_chunks(M, kRowChunk, [&](std::int64_t m0, std::int64_t m1) {
        for (std::int64_t m = m0; m < m1; ++m) {
            T* c = C + m * N;
            for (std::int64_t k = 0; k < K; ++k) {
                const T ak = A[k * M + m];
                const T* b = B + k * N;
                for (std::int64_t n = 0; n < N; ++n) c[n] += ak * b[n];
            }
        }
    });
}

}  // namespace deepbroadcast
