// AVX2/FMA kernel variants. Built only on x86-64; selected at runtime when the
// CPU reports AVX2 (see kernels.cpp). Each kernel keeps the per-element
// accumulation order of the scalar reference (k ascending), so the only
// numeric difference is FMA rounding.
#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstring>

namespace gcpa::kern::avx2 {

// ---------------------------------------------------------------- float gemm

// C[M,N] (+)= A[M,K] * B[K,N], row-major. Register block: 4 rows x 16 cols.
void gemm_f32(const float* a, const float* b, float* c, long m, long n, long k, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(float) * static_cast<size_t>(m * n));
    long m4 = m / 4 * 4;
    long n16 = n / 16 * 16;
    for (long i = 0; i < m4; i += 4) {
        const float* a0 = a + (i + 0) * k;
        const float* a1 = a + (i + 1) * k;
        const float* a2 = a + (i + 2) * k;
        const float* a3 = a + (i + 3) * k;
        float* c0 = c + (i + 0) * n;
        float* c1 = c + (i + 1) * n;
        float* c2 = c + (i + 2) * n;
        float* c3 = c + (i + 3) * n;
        long j = 0;
        for (; j < n16; j += 16) {
            __m256 acc00 = _mm256_loadu_ps(c0 + j), acc01 = _mm256_loadu_ps(c0 + j + 8);
            __m256 acc10 = _mm256_loadu_ps(c1 + j), acc11 = _mm256_loadu_ps(c1 + j + 8);
            __m256 acc20 = _mm256_loadu_ps(c2 + j), acc21 = _mm256_loadu_ps(c2 + j + 8);
            __m256 acc30 = _mm256_loadu_ps(c3 + j), acc31 = _mm256_loadu_ps(c3 + j + 8);
            for (long p = 0; p < k; ++p) {
                const float* brow = b + p * n + j;
                __m256 b0 = _mm256_loadu_ps(brow);
                __m256 b1 = _mm256_loadu_ps(brow + 8);
                __m256 av;
                av = _mm256_set1_ps(a0[p]);
                acc00 = _mm256_fmadd_ps(av, b0, acc00);
                acc01 = _mm256_fmadd_ps(av, b1, acc01);
                av = _mm256_set1_ps(a1[p]);
                acc10 = _mm256_fmadd_ps(av, b0, acc10);
                acc11 = _mm256_fmadd_ps(av, b1, acc11);
                av = _mm256_set1_ps(a2[p]);
                acc20 = _mm256_fmadd_ps(av, b0, acc20);
                acc21 = _mm256_fmadd_ps(av, b1, acc21);
                av = _mm256_set1_ps(a3[p]);
                acc30 = _mm256_fmadd_ps(av, b0, acc30);
                acc31 = _mm256_fmadd_ps(av, b1, acc31);
            }
            _mm256_storeu_ps(c0 + j, acc00); _mm256_storeu_ps(c0 + j + 8, acc01);
            _mm256_storeu_ps(c1 + j, acc10); _mm256_storeu_ps(c1 + j + 8, acc11);
            _mm256_storeu_ps(c2 + j, acc20); _mm256_storeu_ps(c2 + j + 8, acc21);
            _mm256_storeu_ps(c3 + j, acc30); _mm256_storeu_ps(c3 + j + 8, acc31);
        }
        for (; j < n; ++j) {
            float s0 = c0[j], s1 = c1[j], s2 = c2[j], s3 = c3[j];
            for (long p = 0; p < k; ++p) {
                float bv = b[p * n + j];
                s0 = std::fma(a0[p], bv, s0);
                s1 = std::fma(a1[p], bv, s1);
                s2 = std::fma(a2[p], bv, s2);
                s3 = std::fma(a3[p], bv, s3);
            }
            c0[j] = s0; c1[j] = s1; c2[j] = s2; c3[j] = s3;
        }
    }
    for (long i = m4; i < m; ++i) {
        const float* arow = a + i * k;
        float* crow = c + i * n;
        long j = 0;
        for (; j + 8 <= n; j += 8) {
            __m256 acc = _mm256_loadu_ps(crow + j);
            for (long p = 0; p < k; ++p)
                acc = _mm256_fmadd_ps(_mm256_set1_ps(arow[p]), _mm256_loadu_ps(b + p * n + j), acc);
            _mm256_storeu_ps(crow + j, acc);
        }
        for (; j < n; ++j) {
            float s = crow[j];
            for (long p = 0; p < k; ++p) s = std::fma(arow[p], b[p * n + j], s);
            crow[j] = s;
        }
    }
}

// C[M,N] (+)= A^T * B with A stored [K,M]: same kernel with A transposed on
// the fly through a strided read.
void gemm_tn_f32(const float* a, const float* b, float* c, long m, long n, long k, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(float) * static_cast<size_t>(m * n));
    for (long i = 0; i < m; ++i) {
        float* crow = c + i * n;
        long j = 0;
        for (; j + 8 <= n; j += 8) {
            __m256 acc = _mm256_loadu_ps(crow + j);
            for (long p = 0; p < k; ++p)
                acc = _mm256_fmadd_ps(_mm256_set1_ps(a[p * m + i]), _mm256_loadu_ps(b + p * n + j), acc);
            _mm256_storeu_ps(crow + j, acc);
        }
        for (; j < n; ++j) {
            float s = crow[j];
            for (long p = 0; p < k; ++p) s = std::fma(a[p * m + i], b[p * n + j], s);
            crow[j] = s;
        }
    }
}

static inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
}

static inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

// C[M,N] (+)= A * B^T with B stored [N,K]: rows of both operands are
// contiguous, each output element is one dot product.
void gemm_nt_f32(const float* a, const float* b, float* c, long m, long n, long k, bool accumulate) {
    long k8 = k / 8 * 8;
    for (long i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        float* crow = c + i * n;
        for (long j = 0; j < n; ++j) {
            const float* brow = b + j * k;
            __m256 acc = _mm256_setzero_ps();
            long p = 0;
            for (; p < k8; p += 8)
                acc = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), acc);
            float s = hsum(acc);
            for (; p < k; ++p) s = std::fma(arow[p], brow[p], s);
            if (accumulate) crow[j] += s; else crow[j] = s;
        }
    }
}

// --------------------------------------------------------------- double gemm

void gemm_f64(const double* a, const double* b, double* c, long m, long n, long k, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * static_cast<size_t>(m * n));
    for (long i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        long j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256d acc = _mm256_loadu_pd(crow + j);
            for (long p = 0; p < k; ++p)
                acc = _mm256_fmadd_pd(_mm256_set1_pd(arow[p]), _mm256_loadu_pd(b + p * n + j), acc);
            _mm256_storeu_pd(crow + j, acc);
        }
        for (; j < n; ++j) {
            double s = crow[j];
            for (long p = 0; p < k; ++p) s = std::fma(arow[p], b[p * n + j], s);
            crow[j] = s;
        }
    }
}

void gemm_tn_f64(const double* a, const double* b, double* c, long m, long n, long k, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * static_cast<size_t>(m * n));
    for (long i = 0; i < m; ++i) {
        double* crow = c + i * n;
        long j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256d acc = _mm256_loadu_pd(crow + j);
            for (long p = 0; p < k; ++p)
                acc = _mm256_fmadd_pd(_mm256_set1_pd(a[p * m + i]), _mm256_loadu_pd(b + p * n + j), acc);
            _mm256_storeu_pd(crow + j, acc);
        }
        for (; j < n; ++j) {
            double s = crow[j];
            for (long p = 0; p < k; ++p) s = std::fma(a[p * m + i], b[p * n + j], s);
            crow[j] = s;
        }
    }
}

void gemm_nt_f64(const double* a, const double* b, double* c, long m, long n, long k, bool accumulate) {
    long k4 = k / 4 * 4;
    for (long i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (long j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            __m256d acc = _mm256_setzero_pd();
            long p = 0;
            for (; p < k4; p += 4)
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), acc);
            double s = hsum(acc);
            for (; p < k; ++p) s = std::fma(arow[p], brow[p], s);
            if (accumulate) crow[j] += s; else crow[j] = s;
        }
    }
}

// ------------------------------------------------------------- element-wise

void add_f32(const float* a, const float* b, float* out, long n) {
    long i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_f32(const float* a, const float* b, float* out, long n) {
    long i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc_f32(const float* a, const float* b, float* out, long n) {
    long i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 acc = _mm256_loadu_ps(out + i);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
        _mm256_storeu_ps(out + i, acc);
    }
    for (; i < n; ++i) out[i] += a[i] * b[i];
}

void axpy_f32(float alpha, const float* x, float* y, long n) {
    __m256 av = _mm256_set1_ps(alpha);
    long i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 acc = _mm256_loadu_ps(y + i);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
        _mm256_storeu_ps(y + i, acc);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_f32(float alpha, float* x, long n) {
    __m256 av = _mm256_set1_ps(alpha);
    long i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(x + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

void add_const_f32(float alpha, float* x, long n) {
    __m256 av = _mm256_set1_ps(alpha);
    long i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(x + i, _mm256_add_ps(av, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] += alpha;
}

void relu_f32(const float* x, float* y, long n) {
    __m256 zero = _mm256_setzero_ps();
    long i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_max_ps(zero, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : 0.f;
}

void relu_bwd_f32(const float* x, const float* dy, float* dx, long n) {
    __m256 zero = _mm256_setzero_ps();
    long i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        __m256 g = _mm256_and_ps(mask, _mm256_loadu_ps(dy + i));
        _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), g));
    }
    for (; i < n; ++i) dx[i] += x[i] > 0.f ? dy[i] : 0.f;
}

float reduce_sum_f32(const float* x, long n) {
    __m256 acc = _mm256_setzero_ps();
    long i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

float dot_f32(const float* a, const float* b, long n) {
    __m256 acc = _mm256_setzero_ps();
    long i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
    float s = hsum(acc);
    for (; i < n; ++i) s = std::fma(a[i], b[i], s);
    return s;
}

float reduce_abs_diff_f32(const float* a, const float* b, long n) {
    const __m256 signmask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
    __m256 acc = _mm256_setzero_ps();
    long i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 d = _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
        acc = _mm256_add_ps(acc, _mm256_and_ps(d, signmask));
    }
    float s = hsum(acc);
    for (; i < n; ++i) s += std::abs(a[i] - b[i]);
    return s;
}

void sgd_momentum_f32(float* p, float* v, const float* g, float lr, float mu, float wd, long n) {
    __m256 muv = _mm256_set1_ps(mu), wdv = _mm256_set1_ps(wd), lrv = _mm256_set1_ps(lr);
    long i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 pv = _mm256_loadu_ps(p + i);
        __m256 vv = _mm256_loadu_ps(v + i);
        __m256 gv = _mm256_add_ps(_mm256_loadu_ps(g + i), _mm256_mul_ps(wdv, pv));
        vv = _mm256_add_ps(_mm256_mul_ps(muv, vv), gv);
        pv = _mm256_sub_ps(pv, _mm256_mul_ps(lrv, vv));
        _mm256_storeu_ps(v + i, vv);
        _mm256_storeu_ps(p + i, pv);
    }
    for (; i < n; ++i) {
        v[i] = mu * v[i] + (g[i] + wd * p[i]);
        p[i] -= lr * v[i];
    }
}

// double variants of the element-wise family; gemm dominates runtime so these
// stay simple 4-lane loops.
void add_f64(const double* a, const double* b, double* out, long n) {
    long i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}
void mul_f64(const double* a, const double* b, double* out, long n) {
    long i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}
void mul_acc_f64(const double* a, const double* b, double* out, long n) {
    long i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d acc = _mm256_loadu_pd(out + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < n; ++i) out[i] += a[i] * b[i];
}
void axpy_f64(double alpha, const double* x, double* y, long n) {
    __m256d av = _mm256_set1_pd(alpha);
    long i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d acc = _mm256_loadu_pd(y + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
        _mm256_storeu_pd(y + i, acc);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}
void scale_f64(double alpha, double* x, long n) {
    __m256d av = _mm256_set1_pd(alpha);
    long i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}
void add_const_f64(double alpha, double* x, long n) {
    __m256d av = _mm256_set1_pd(alpha);
    long i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_add_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] += alpha;
}
void relu_f64(const double* x, double* y, long n) {
    __m256d zero = _mm256_setzero_pd();
    long i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void relu_bwd_f64(const double* x, const double* dy, double* dx, long n) {
    __m256d zero = _mm256_setzero_pd();
    long i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        __m256d g = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
        _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), g));
    }
    for (; i < n; ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
}
double reduce_sum_f64(const double* x, long n) {
    __m256d acc = _mm256_setzero_pd();
    long i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}
double dot_f64(const double* a, const double* b, long n) {
    __m256d acc = _mm256_setzero_pd();
    long i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s = std::fma(a[i], b[i], s);
    return s;
}
double reduce_abs_diff_f64(const double* a, const double* b, long n) {
    const __m256d signmask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    __m256d acc = _mm256_setzero_pd();
    long i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_and_pd(d, signmask));
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += std::abs(a[i] - b[i]);
    return s;
}
void sgd_momentum_f64(double* p, double* v, const double* g, double lr, double mu, double wd, long n) {
    for (long i = 0; i < n; ++i) {
        v[i] = mu * v[i] + (g[i] + wd * p[i]);
        p[i] -= lr * v[i];
    }
}

}  // namespace gcpa::kern::avx2

#endif  // x86-64
