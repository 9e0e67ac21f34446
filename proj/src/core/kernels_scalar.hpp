#ifndef GCPA_SRC_KERNELS_SCALAR_HPP
#define GCPA_SRC_KERNELS_SCALAR_HPP

#include <cmath>
#include <cstring>

// Reference kernels. Loop orders are chosen so the per-element accumulation
// order matches the SIMD variants (k ascending), keeping the numeric gap down
// to FMA rounding only.
namespace gcpa::kern::scalar {

template <typename T>
void gemm(const T* a, const T* b, T* c, long m, long n, long k, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(T) * static_cast<size_t>(m * n));
    for (long i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (long p = 0; p < k; ++p) {
            T av = arow[p];
            const T* brow = b + p * n;
            for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, long m, long n, long k, bool accumulate) {
    // a stored [k, m]
    if (!accumulate) std::memset(c, 0, sizeof(T) * static_cast<size_t>(m * n));
    for (long p = 0; p < k; ++p) {
        const T* arow = a + p * m;
        const T* brow = b + p * n;
        for (long i = 0; i < m; ++i) {
            T av = arow[i];
            T* crow = c + i * n;
            for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, long m, long n, long k, bool accumulate) {
    // b stored [n, k]
    for (long i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (long j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = T(0);
            for (long p = 0; p < k; ++p) acc += arow[p] * brow[p];
            if (accumulate) crow[j] += acc; else crow[j] = acc;
        }
    }
}

template <typename T> void add(const T* a, const T* b, T* out, long n) {
    for (long i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
template <typename T> void mul(const T* a, const T* b, T* out, long n) {
    for (long i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
template <typename T> void mul_acc(const T* a, const T* b, T* out, long n) {
    for (long i = 0; i < n; ++i) out[i] += a[i] * b[i];
}
template <typename T> void axpy(T alpha, const T* x, T* y, long n) {
    for (long i = 0; i < n; ++i) y[i] += alpha * x[i];
}
template <typename T> void scale(T alpha, T* x, long n) {
    for (long i = 0; i < n; ++i) x[i] *= alpha;
}
template <typename T> void add_const(T alpha, T* x, long n) {
    for (long i = 0; i < n; ++i) x[i] += alpha;
}
template <typename T> void relu(const T* x, T* y, long n) {
    for (long i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}
template <typename T> void relu_bwd(const T* x, const T* dy, T* dx, long n) {
    for (long i = 0; i < n; ++i) dx[i] += x[i] > T(0) ? dy[i] : T(0);
}
template <typename T> T reduce_sum(const T* x, long n) {
    T acc = T(0);
    for (long i = 0; i < n; ++i) acc += x[i];
    return acc;
}
template <typename T> T dot(const T* a, const T* b, long n) {
    T acc = T(0);
    for (long i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}
template <typename T> T reduce_abs_diff(const T* a, const T* b, long n) {
    T acc = T(0);
    for (long i = 0; i < n; ++i) acc += std::abs(a[i] - b[i]);
    return acc;
}
template <typename T>
void sgd_momentum(T* p, T* v, const T* g, T lr, T mu, T wd, long n) {
    for (long i = 0; i < n; ++i) {
        v[i] = mu * v[i] + (g[i] + wd * p[i]);
        p[i] -= lr * v[i];
    }
}

}  // namespace gcpa::kern::scalar

#endif
