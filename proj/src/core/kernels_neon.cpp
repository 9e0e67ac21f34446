// NEON kernel variants, mirroring kernels_avx2.cpp at 4-float / 2-double
// width. Compiled only on aarch64, where NEON is baseline.
#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>
#include <cstring>

namespace gcpa::kern::neon {

// ---------------------------------------------------------------- float gemm

void gemm_f32(const float* a, const float* b, float* c, long m, long n, long k, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(float) * static_cast<size_t>(m * n));
    for (long i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        float* crow = c + i * n;
        long j = 0;
        for (; j + 8 <= n; j += 8) {
            float32x4_t acc0 = vld1q_f32(crow + j);
            float32x4_t acc1 = vld1q_f32(crow + j + 4);
            for (long p = 0; p < k; ++p) {
                float32x4_t av = vdupq_n_f32(arow[p]);
                acc0 = vfmaq_f32(acc0, av, vld1q_f32(b + p * n + j));
                acc1 = vfmaq_f32(acc1, av, vld1q_f32(b + p * n + j + 4));
            }
            vst1q_f32(crow + j, acc0);
            vst1q_f32(crow + j + 4, acc1);
        }
        for (; j < n; ++j) {
            float s = crow[j];
            for (long p = 0; p < k; ++p) s = std::fma(arow[p], b[p * n + j], s);
            crow[j] = s;
        }
    }
}

void gemm_tn_f32(const float* a, const float* b, float* c, long m, long n, long k, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(float) * static_cast<size_t>(m * n));
    for (long i = 0; i < m; ++i) {
        float* crow = c + i * n;
        long j = 0;
        for (; j + 4 <= n; j += 4) {
            float32x4_t acc = vld1q_f32(crow + j);
            for (long p = 0; p < k; ++p)
                acc = vfmaq_f32(acc, vdupq_n_f32(a[p * m + i]), vld1q_f32(b + p * n + j));
            vst1q_f32(crow + j, acc);
        }
        for (; j < n; ++j) {
            float s = crow[j];
            for (long p = 0; p < k; ++p) s = std::fma(a[p * m + i], b[p * n + j], s);
            crow[j] = s;
        }
    }
}

void gemm_nt_f32(const float* a, const float* b, float* c, long m, long n, long k, bool accumulate) {
    long k4 = k / 4 * 4;
    for (long i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        float* crow = c + i * n;
        for (long j = 0; j < n; ++j) {
            const float* brow = b + j * k;
            float32x4_t acc = vdupq_n_f32(0.f);
            long p = 0;
            for (; p < k4; p += 4)
                acc = vfmaq_f32(acc, vld1q_f32(arow + p), vld1q_f32(brow + p));
            float s = vaddvq_f32(acc);
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
        for (; j + 2 <= n; j += 2) {
            float64x2_t acc = vld1q_f64(crow + j);
            for (long p = 0; p < k; ++p)
                acc = vfmaq_f64(acc, vdupq_n_f64(arow[p]), vld1q_f64(b + p * n + j));
            vst1q_f64(crow + j, acc);
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
        for (; j + 2 <= n; j += 2) {
            float64x2_t acc = vld1q_f64(crow + j);
            for (long p = 0; p < k; ++p)
                acc = vfmaq_f64(acc, vdupq_n_f64(a[p * m + i]), vld1q_f64(b + p * n + j));
            vst1q_f64(crow + j, acc);
        }
        for (; j < n; ++j) {
            double s = crow[j];
            for (long p = 0; p < k; ++p) s = std::fma(a[p * m + i], b[p * n + j], s);
            crow[j] = s;
        }
    }
}

void gemm_nt_f64(const double* a, const double* b, double* c, long m, long n, long k, bool accumulate) {
    long k2 = k / 2 * 2;
    for (long i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (long j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            float64x2_t acc = vdupq_n_f64(0.0);
            long p = 0;
            for (; p < k2; p += 2)
                acc = vfmaq_f64(acc, vld1q_f64(arow + p), vld1q_f64(brow + p));
            double s = vaddvq_f64(acc);
            for (; p < k; ++p) s = std::fma(arow[p], brow[p], s);
            if (accumulate) crow[j] += s; else crow[j] = s;
        }
    }
}

// ------------------------------------------------------------- element-wise

void add_f32(const float* a, const float* b, float* out, long n) {
    long i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(out + i, vaddq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}
void mul_f32(const float* a, const float* b, float* out, long n) {
    long i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(out + i, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}
void mul_acc_f32(const float* a, const float* b, float* out, long n) {
    long i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t acc = vld1q_f32(out + i);
        acc = vaddq_f32(acc, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
        vst1q_f32(out + i, acc);
    }
    for (; i < n; ++i) out[i] += a[i] * b[i];
}
void axpy_f32(float alpha, const float* x, float* y, long n) {
    float32x4_t av = vdupq_n_f32(alpha);
    long i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t acc = vld1q_f32(y + i);
        acc = vaddq_f32(acc, vmulq_f32(av, vld1q_f32(x + i)));
        vst1q_f32(y + i, acc);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}
void scale_f32(float alpha, float* x, long n) {
    float32x4_t av = vdupq_n_f32(alpha);
    long i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(x + i, vmulq_f32(av, vld1q_f32(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}
void add_const_f32(float alpha, float* x, long n) {
    float32x4_t av = vdupq_n_f32(alpha);
    long i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(x + i, vaddq_f32(av, vld1q_f32(x + i)));
    for (; i < n; ++i) x[i] += alpha;
}
void relu_f32(const float* x, float* y, long n) {
    float32x4_t zero = vdupq_n_f32(0.f);
    long i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vmaxq_f32(zero, vld1q_f32(x + i)));
    for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : 0.f;
}
void relu_bwd_f32(const float* x, const float* dy, float* dx, long n) {
    float32x4_t zero = vdupq_n_f32(0.f);
    long i = 0;
    for (; i + 4 <= n; i += 4) {
        uint32x4_t mask = vcgtq_f32(vld1q_f32(x + i), zero);
        float32x4_t g = vreinterpretq_f32_u32(
            vandq_u32(mask, vreinterpretq_u32_f32(vld1q_f32(dy + i))));
        vst1q_f32(dx + i, vaddq_f32(vld1q_f32(dx + i), g));
    }
    for (; i < n; ++i) dx[i] += x[i] > 0.f ? dy[i] : 0.f;
}
float reduce_sum_f32(const float* x, long n) {
    float32x4_t acc = vdupq_n_f32(0.f);
    long i = 0;
    for (; i + 4 <= n; i += 4) acc = vaddq_f32(acc, vld1q_f32(x + i));
    float s = vaddvq_f32(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}
float dot_f32(const float* a, const float* b, long n) {
    float32x4_t acc = vdupq_n_f32(0.f);
    long i = 0;
    for (; i + 4 <= n; i += 4)
        acc = vfmaq_f32(acc, vld1q_f32(a + i), vld1q_f32(b + i));
    float s = vaddvq_f32(acc);
    for (; i < n; ++i) s = std::fma(a[i], b[i], s);
    return s;
}
float reduce_abs_diff_f32(const float* a, const float* b, long n) {
    float32x4_t acc = vdupq_n_f32(0.f);
    long i = 0;
    for (; i + 4 <= n; i += 4)
        acc = vaddq_f32(acc, vabdq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    float s = vaddvq_f32(acc);
    for (; i < n; ++i) s += std::abs(a[i] - b[i]);
    return s;
}
void sgd_momentum_f32(float* p, float* v, const float* g, float lr, float mu, float wd, long n) {
    float32x4_t muv = vdupq_n_f32(mu), wdv = vdupq_n_f32(wd), lrv = vdupq_n_f32(lr);
    long i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t pv = vld1q_f32(p + i);
        float32x4_t vv = vld1q_f32(v + i);
        float32x4_t gv = vaddq_f32(vld1q_f32(g + i), vmulq_f32(wdv, pv));
        vv = vaddq_f32(vmulq_f32(muv, vv), gv);
        pv = vsubq_f32(pv, vmulq_f32(lrv, vv));
        vst1q_f32(v + i, vv);
        vst1q_f32(p + i, pv);
    }
    for (; i < n; ++i) {
        v[i] = mu * v[i] + (g[i] + wd * p[i]);
        p[i] -= lr * v[i];
    }
}

void add_f64(const double* a, const double* b, double* out, long n) {
    long i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}
void mul_f64(const double* a, const double* b, double* out, long n) {
    long i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}
void mul_acc_f64(const double* a, const double* b, double* out, long n) {
    long i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t acc = vld1q_f64(out + i);
        acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
        vst1q_f64(out + i, acc);
    }
    for (; i < n; ++i) out[i] += a[i] * b[i];
}
void axpy_f64(double alpha, const double* x, double* y, long n) {
    float64x2_t av = vdupq_n_f64(alpha);
    long i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t acc = vld1q_f64(y + i);
        acc = vaddq_f64(acc, vmulq_f64(av, vld1q_f64(x + i)));
        vst1q_f64(y + i, acc);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}
void scale_f64(double alpha, double* x, long n) {
    float64x2_t av = vdupq_n_f64(alpha);
    long i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(av, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}
void add_const_f64(double alpha, double* x, long n) {
    float64x2_t av = vdupq_n_f64(alpha);
    long i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vaddq_f64(av, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] += alpha;
}
void relu_f64(const double* x, double* y, long n) {
    float64x2_t zero = vdupq_n_f64(0.0);
    long i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmaxq_f64(zero, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void relu_bwd_f64(const double* x, const double* dy, double* dx, long n) {
    float64x2_t zero = vdupq_n_f64(0.0);
    long i = 0;
    for (; i + 2 <= n; i += 2) {
        uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
        float64x2_t g = vreinterpretq_f64_u64(
            vandq_u64(mask, vreinterpretq_u64_f64(vld1q_f64(dy + i))));
        vst1q_f64(dx + i, vaddq_f64(vld1q_f64(dx + i), g));
    }
    for (; i < n; ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
}
double reduce_sum_f64(const double* x, long n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    long i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}
double dot_f64(const double* a, const double* b, long n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    long i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s = std::fma(a[i], b[i], s);
    return s;
}
double reduce_abs_diff_f64(const double* a, const double* b, long n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    long i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vaddq_f64(acc, vabdq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += std::abs(a[i] - b[i]);
    return s;
}
void sgd_momentum_f64(double* p, double* v, const double* g, double lr, double mu, double wd, long n) {
    for (long i = 0; i < n; ++i) {
        v[i] = mu * v[i] + (g[i] + wd * p[i]);
        p[i] -= lr * v[i];
    }
}

}  // namespace gcpa::kern::neon

#endif  // aarch64
