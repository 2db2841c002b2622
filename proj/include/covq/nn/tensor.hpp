#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "covq/errors.hpp"

namespace covq {
namespace nn {

// Dense row-major tensor. Scalar type is a template parameter: tests and
// gradient checks run in double, training runs in float (the checkpoint
// format stores 32-bit reals either way).
template <class T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), T(0)) {}
    Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != static_cast<size_t>(numel_of(shape))) {
            throw ShapeMismatchError("tensor data length does not match shape");
        }
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // 2-D / 3-D / 4-D accessors; shape is trusted.
    T& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
    const T& at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
    T& at(int i, int j, int k) {
        return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    const T& at(int i, int j, int k) const {
        return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    T& at(int i, int j, int k, int l) {
        return data[((static_cast<size_t>(i) * shape[1] + j) * static_cast<size_t>(shape[2]) + k) *
                        shape[3] +
                    l];
    }
    const T& at(int i, int j, int k, int l) const {
        return data[((static_cast<size_t>(i) * shape[1] + j) * static_cast<size_t>(shape[2]) + k) *
                        shape[3] +
                    l];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const std::vector<int>& s) const { return shape == s; }

    void require_shape(const std::vector<int>& s, const char* what) const {
        if (shape != s) {
            throw ShapeMismatchError(std::string(what) + ": unexpected tensor shape");
        }
    }
};

// C[m,n] = A[m,k] * B[k,n]  (+= when accumulate)
template <class T>
void gemm(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
    if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, T(0));
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<size_t>(i) * k;
        T* crow = c + static_cast<size_t>(i) * n;
        for (int t = 0; t < k; ++t) {
            const T av = arow[t];
            if (av == T(0)) continue;
            const T* brow = b + static_cast<size_t>(t) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] = A[m,k] * B^T where B is [n,k]  (+= when accumulate)
// B is transposed into scratch first so the inner loop runs over
// independent accumulators, which vectorizes without reassociation.
template <class T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
    thread_local std::vector<T> scratch;
    scratch.resize(static_cast<size_t>(k) * n);
    for (int j = 0; j < n; ++j) {
        for (int t = 0; t < k; ++t) {
            scratch[static_cast<size_t>(t) * n + j] = b[static_cast<size_t>(j) * k + t];
        }
    }
    gemm(a, scratch.data(), c, m, k, n, accumulate);
}

// C[m,n] = A^T * B where A is [k,m], B is [k,n]  (+= when accumulate)
template <class T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
    if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, T(0));
    for (int t = 0; t < k; ++t) {
        const T* arow = a + static_cast<size_t>(t) * m;
        const T* brow = b + static_cast<size_t>(t) * n;
        for (int i = 0; i < m; ++i) {
            const T av = arow[i];
            if (av == T(0)) continue;
            T* crow = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace nn
}  // namespace covq
