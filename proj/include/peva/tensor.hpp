#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "peva/common.hpp"

namespace peva {

/// Dense row-major tensor. Deliberately minimal: shape bookkeeping plus
/// contiguous storage; all math lives in free functions over raw spans so the
/// hot paths stay BLAS-shaped.
template <typename T>
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        v.assign(static_cast<size_t>(numel_of(shape)), T(0));
    }

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(v.size()); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    void zero() { std::fill(v.begin(), v.end(), T(0)); }

    T& at(int64_t i) { return v[static_cast<size_t>(i)]; }
    const T& at(int64_t i) const { return v[static_cast<size_t>(i)]; }
    // row-major [i][j] for 2-D tensors
    T& at(int64_t i, int64_t j) { return v[static_cast<size_t>(i * shape[1] + j)]; }
    const T& at(int64_t i, int64_t j) const { return v[static_cast<size_t>(i * shape[1] + j)]; }
};

/// C = alpha * op(A) op(B) + beta * C, row-major. Dispatches to cblas_{s,d}gemm.
/// A is M x K after op, B is K x N after op, C is M x N.
void matmul(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, float alpha,
            const float* a, int64_t lda, const float* b, int64_t ldb, float beta, float* c,
            int64_t ldc);
void matmul(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, double alpha,
            const double* a, int64_t lda, const double* b, int64_t ldb, double beta, double* c,
            int64_t ldc);

/// y = x @ W^T + b. x: [rows, in], W: [out, in], b: [out] or null, y: [rows, out].
template <typename T>
void linear_forward(const T* x, const T* w, const T* b, T* y, int64_t rows, int64_t in,
                    int64_t out) {
    matmul(false, true, rows, out, in, T(1), x, in, w, in, T(0), y, out);
    if (b) {
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t o = 0; o < out; ++o) y[r * out + o] += b[o];
    }
}

/// Accumulates dW += dy^T x, db += sum(dy), dx = dy @ W (dx may be null).
template <typename T>
void linear_backward(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db, int64_t rows,
                     int64_t in, int64_t out) {
    matmul(true, false, out, in, rows, T(1), dy, out, x, in, T(1), dw, in);
    if (db) {
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t o = 0; o < out; ++o) db[o] += dy[r * out + o];
    }
    if (dx) matmul(false, false, rows, in, out, T(1), dy, out, w, in, T(0), dx, in);
}

/// LayerNorm without learnable affine (modulation supplies scale/shift).
/// Caches mean and rstd per row for the backward pass.
template <typename T>
void layer_norm_forward(const T* x, T* y, T* mean, T* rstd, int64_t rows, int64_t d,
                        T eps = T(1e-6)) {
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = x + r * d;
        T m = T(0);
        for (int64_t i = 0; i < d; ++i) m += xr[i];
        m /= T(d);
        T var = T(0);
        for (int64_t i = 0; i < d; ++i) {
            T t = xr[i] - m;
            var += t * t;
        }
        var /= T(d);
        T rs = T(1) / std::sqrt(var + eps);
        mean[r] = m;
        rstd[r] = rs;
        T* yr = y + r * d;
        for (int64_t i = 0; i < d; ++i) yr[i] = (xr[i] - m) * rs;
    }
}

/// dx for affine-free LayerNorm given cached stats. dx may alias dy.
template <typename T>
void layer_norm_backward(const T* x, const T* mean, const T* rstd, const T* dy, T* dx,
                         int64_t rows, int64_t d) {
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = x + r * d;
        const T* dyr = dy + r * d;
        T m = mean[r], rs = rstd[r];
        T sum_dy = T(0), sum_dy_xhat = T(0);
        for (int64_t i = 0; i < d; ++i) {
            T xhat = (xr[i] - m) * rs;
            sum_dy += dyr[i];
            sum_dy_xhat += dyr[i] * xhat;
        }
        T inv_d = T(1) / T(d);
        T* dxr = dx + r * d;
        for (int64_t i = 0; i < d; ++i) {
            T xhat = (xr[i] - m) * rs;
            dxr[i] = rs * (dyr[i] - inv_d * sum_dy - xhat * inv_d * sum_dy_xhat);
        }
    }
}

/// Row-wise softmax in place.
template <typename T>
void softmax_rows(T* x, int64_t rows, int64_t cols) {
    for (int64_t r = 0; r < rows; ++r) {
        T* xr = x + r * cols;
        T mx = xr[0];
        for (int64_t i = 1; i < cols; ++i) mx = std::max(mx, xr[i]);
        T sum = T(0);
        for (int64_t i = 0; i < cols; ++i) {
            xr[i] = std::exp(xr[i] - mx);
            sum += xr[i];
        }
        T inv = T(1) / sum;
        for (int64_t i = 0; i < cols; ++i) xr[i] *= inv;
    }
}

/// Backward of row-wise softmax: dx = p * (dy - sum(dy * p)). In place over dy.
template <typename T>
void softmax_rows_backward(const T* p, T* dy, int64_t rows, int64_t cols) {
    for (int64_t r = 0; r < rows; ++r) {
        const T* pr = p + r * cols;
        T* dyr = dy + r * cols;
        T dot = T(0);
        for (int64_t i = 0; i < cols; ++i) dot += dyr[i] * pr[i];
        for (int64_t i = 0; i < cols; ++i) dyr[i] = pr[i] * (dyr[i] - dot);
    }
}

template <typename T>
inline T silu(T x) {
    return x / (T(1) + std::exp(-x));
}

template <typename T>
inline T silu_grad(T x) {
    T s = T(1) / (T(1) + std::exp(-x));
    return s * (T(1) + x * (T(1) - s));
}

template <typename T>
bool all_finite(const T* x, int64_t n) {
    for (int64_t i = 0; i < n; ++i)
        if (!std::isfinite(static_cast<double>(x[i]))) return false;
    return true;
}

}  // namespace peva
