#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <type_traits>
#include <vector>

#include "lanecast/core/errors.hpp"
#include "lanecast/core/rng.hpp"

namespace lanecast::nn {

// Dense row-major tensor of rank 0..4.  Just storage plus the handful of
// raw kernels the autodiff ops are built from; anything gradient-aware
// lives in graph.hpp / ops.hpp.
template <typename T>
struct Tensor {
    static_assert(std::is_floating_point_v<T>);

    std::vector<std::int64_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel_of(shape)), T(0));
    }

    static Tensor zeros(std::vector<std::int64_t> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<std::int64_t> s, T v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    static Tensor from(std::vector<std::int64_t> s, std::vector<T> values) {
        Tensor t;
        t.shape = std::move(s);
        if (static_cast<std::int64_t>(values.size()) != numel_of(t.shape))
            throw ShapeError("value count does not match tensor shape");
        t.data = std::move(values);
        return t;
    }

    static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
        std::int64_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    T& operator[](std::size_t i) { return data[i]; }
    T operator[](std::size_t i) const { return data[i]; }

    T& at2(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * shape[1] + j)]; }
    T at2(std::int64_t i, std::int64_t j) const {
        return data[static_cast<std::size_t>(i * shape[1] + j)];
    }
    T& at3(std::int64_t b, std::int64_t i, std::int64_t j) {
        return data[static_cast<std::size_t>((b * shape[1] + i) * shape[2] + j)];
    }
    T at3(std::int64_t b, std::int64_t i, std::int64_t j) const {
        return data[static_cast<std::size_t>((b * shape[1] + i) * shape[2] + j)];
    }

    void fill_uniform(Rng& rng, double lo, double hi) {
        for (T& v : data) v = static_cast<T>(rng.uniform(lo, hi));
    }

    std::string shape_string() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
    return a.shape == b.shape;
}

// --- raw kernels ------------------------------------------------------
// All written with a contiguous innermost loop and no reductions across
// iterations, so they vectorize under -O3 without relaxed float semantics.

// C[m,p] += A[m,k] * B[k,p]
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t p) {
    for (std::int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * p;
        for (std::int64_t l = 0; l < k; ++l) {
            const T av = arow[l];
            const T* brow = b + l * p;
            for (std::int64_t j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[p,k] += A[r,p]^T * B[r,k]  (weight-gradient shape)
template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::int64_t r, std::int64_t p, std::int64_t k) {
    for (std::int64_t i = 0; i < r; ++i) {
        const T* arow = a + i * p;
        const T* brow = b + i * k;
        for (std::int64_t j = 0; j < p; ++j) {
            const T av = arow[j];
            T* crow = c + j * k;
            for (std::int64_t l = 0; l < k; ++l) crow[l] += av * brow[l];
        }
    }
}

// dst[c,r] = src[r,c]
template <typename T>
void transpose_into(const T* src, T* dst, std::int64_t r, std::int64_t c) {
    for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
}

}  // namespace lanecast::nn
