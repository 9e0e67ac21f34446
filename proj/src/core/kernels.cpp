#include "gcpa/core/kernels.hpp"

#include <cctype>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_scalar.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define GCPA_SIMD_NS avx2
#define GCPA_SIMD_ISA Isa::avx2
#elif defined(__aarch64__)
#define GCPA_SIMD_NS neon
#define GCPA_SIMD_ISA Isa::neon
#endif

namespace gcpa::kern {

#ifdef GCPA_SIMD_NS
// Bodies live in kernels_avx2.cpp / kernels_neon.cpp, compiled with the
// matching target flags.
namespace GCPA_SIMD_NS {
void gemm_f32(const float*, const float*, float*, long, long, long, bool);
void gemm_tn_f32(const float*, const float*, float*, long, long, long, bool);
void gemm_nt_f32(const float*, const float*, float*, long, long, long, bool);
void gemm_f64(const double*, const double*, double*, long, long, long, bool);
void gemm_tn_f64(const double*, const double*, double*, long, long, long, bool);
void gemm_nt_f64(const double*, const double*, double*, long, long, long, bool);
void add_f32(const float*, const float*, float*, long);
void mul_f32(const float*, const float*, float*, long);
void mul_acc_f32(const float*, const float*, float*, long);
void axpy_f32(float, const float*, float*, long);
void scale_f32(float, float*, long);
void add_const_f32(float, float*, long);
void relu_f32(const float*, float*, long);
void relu_bwd_f32(const float*, const float*, float*, long);
float reduce_sum_f32(const float*, long);
float dot_f32(const float*, const float*, long);
float reduce_abs_diff_f32(const float*, const float*, long);
void sgd_momentum_f32(float*, float*, const float*, float, float, float, long);
void add_f64(const double*, const double*, double*, long);
void mul_f64(const double*, const double*, double*, long);
void mul_acc_f64(const double*, const double*, double*, long);
void axpy_f64(double, const double*, double*, long);
void scale_f64(double, double*, long);
void add_const_f64(double, double*, long);
void relu_f64(const double*, double*, long);
void relu_bwd_f64(const double*, const double*, double*, long);
double reduce_sum_f64(const double*, long);
double dot_f64(const double*, const double*, long);
double reduce_abs_diff_f64(const double*, const double*, long);
void sgd_momentum_f64(double*, double*, const double*, double, double, double, long);
}  // namespace GCPA_SIMD_NS
#endif

namespace {

Isa detect() {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::avx2;
#elif defined(__aarch64__)
    return Isa::neon;
#endif
    return Isa::scalar;
}

Isa parse_isa(const std::string& v) {
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2") return Isa::avx2;
    if (v == "neon") return Isa::neon;
    throw std::runtime_error("GCPA_ISA has unknown value '" + v +
                             "' (expected scalar, avx2, neon or auto)");
}

Isa& isa_slot() {
    static Isa isa = [] {
        const char* env = std::getenv("GCPA_ISA");
        if (env && *env) {
            std::string v(env);
            for (char& ch : v) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            if (v != "auto") {
                Isa want = parse_isa(v);
                if (!isa_supported(want))
                    throw std::runtime_error(std::string("GCPA_ISA requests ") + isa_name(want) +
                                             ", which this machine does not support");
                return want;
            }
        }
        return detect();
    }();
    return isa;
}

}  // namespace

Isa active_isa() { return isa_slot(); }

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "?";
}

bool isa_supported(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

void force_isa(Isa isa) {
    if (!isa_supported(isa))
        throw std::runtime_error(std::string("cannot force ISA ") + isa_name(isa) +
                                 ": not supported on this machine");
    isa_slot() = isa;
}

#ifdef GCPA_SIMD_NS
#define GCPA_DISPATCH(fn, suffix, ...)                                        \
    if (isa_slot() == GCPA_SIMD_ISA) return GCPA_SIMD_NS::fn##_##suffix(__VA_ARGS__); \
    return scalar::fn(__VA_ARGS__)
#else
#define GCPA_DISPATCH(fn, suffix, ...) return scalar::fn(__VA_ARGS__)
#endif

// clang-format off
template <> void gemm<float>(const float* a, const float* b, float* c, long m, long n, long k, bool acc) { GCPA_DISPATCH(gemm, f32, a, b, c, m, n, k, acc); }
template <> void gemm<double>(const double* a, const double* b, double* c, long m, long n, long k, bool acc) { GCPA_DISPATCH(gemm, f64, a, b, c, m, n, k, acc); }
template <> void gemm_tn<float>(const float* a, const float* b, float* c, long m, long n, long k, bool acc) { GCPA_DISPATCH(gemm_tn, f32, a, b, c, m, n, k, acc); }
template <> void gemm_tn<double>(const double* a, const double* b, double* c, long m, long n, long k, bool acc) { GCPA_DISPATCH(gemm_tn, f64, a, b, c, m, n, k, acc); }
template <> void gemm_nt<float>(const float* a, const float* b, float* c, long m, long n, long k, bool acc) { GCPA_DISPATCH(gemm_nt, f32, a, b, c, m, n, k, acc); }
template <> void gemm_nt<double>(const double* a, const double* b, double* c, long m, long n, long k, bool acc) { GCPA_DISPATCH(gemm_nt, f64, a, b, c, m, n, k, acc); }
template <> void add<float>(const float* a, const float* b, float* out, long n) { GCPA_DISPATCH(add, f32, a, b, out, n); }
template <> void add<double>(const double* a, const double* b, double* out, long n) { GCPA_DISPATCH(add, f64, a, b, out, n); }
template <> void mul<float>(const float* a, const float* b, float* out, long n) { GCPA_DISPATCH(mul, f32, a, b, out, n); }
template <> void mul<double>(const double* a, const double* b, double* out, long n) { GCPA_DISPATCH(mul, f64, a, b, out, n); }
template <> void mul_acc<float>(const float* a, const float* b, float* out, long n) { GCPA_DISPATCH(mul_acc, f32, a, b, out, n); }
template <> void mul_acc<double>(const double* a, const double* b, double* out, long n) { GCPA_DISPATCH(mul_acc, f64, a, b, out, n); }
template <> void axpy<float>(float alpha, const float* x, float* y, long n) { GCPA_DISPATCH(axpy, f32, alpha, x, y, n); }
template <> void axpy<double>(double alpha, const double* x, double* y, long n) { GCPA_DISPATCH(axpy, f64, alpha, x, y, n); }
template <> void scale<float>(float alpha, float* x, long n) { GCPA_DISPATCH(scale, f32, alpha, x, n); }
template <> void scale<double>(double alpha, double* x, long n) { GCPA_DISPATCH(scale, f64, alpha, x, n); }
template <> void add_const<float>(float alpha, float* x, long n) { GCPA_DISPATCH(add_const, f32, alpha, x, n); }
template <> void add_const<double>(double alpha, double* x, long n) { GCPA_DISPATCH(add_const, f64, alpha, x, n); }
template <> void relu<float>(const float* x, float* y, long n) { GCPA_DISPATCH(relu, f32, x, y, n); }
template <> void relu<double>(const double* x, double* y, long n) { GCPA_DISPATCH(relu, f64, x, y, n); }
template <> void relu_bwd<float>(const float* x, const float* dy, float* dx, long n) { GCPA_DISPATCH(relu_bwd, f32, x, dy, dx, n); }
template <> void relu_bwd<double>(const double* x, const double* dy, double* dx, long n) { GCPA_DISPATCH(relu_bwd, f64, x, dy, dx, n); }
template <> float reduce_sum<float>(const float* x, long n) { GCPA_DISPATCH(reduce_sum, f32, x, n); }
template <> double reduce_sum<double>(const double* x, long n) { GCPA_DISPATCH(reduce_sum, f64, x, n); }
template <> float dot<float>(const float* a, const float* b, long n) { GCPA_DISPATCH(dot, f32, a, b, n); }
template <> double dot<double>(const double* a, const double* b, long n) { GCPA_DISPATCH(dot, f64, a, b, n); }
template <> float reduce_abs_diff<float>(const float* a, const float* b, long n) { GCPA_DISPATCH(reduce_abs_diff, f32, a, b, n); }
template <> double reduce_abs_diff<double>(const double* a, const double* b, long n) { GCPA_DISPATCH(reduce_abs_diff, f64, a, b, n); }
template <> void sgd_momentum<float>(float* p, float* v, const float* g, float lr, float mu, float wd, long n) { GCPA_DISPATCH(sgd_momentum, f32, p, v, g, lr, mu, wd, n); }
template <> void sgd_momentum<double>(double* p, double* v, const double* g, double lr, double mu, double wd, long n) { GCPA_DISPATCH(sgd_momentum, f64, p, v, g, lr, mu, wd, n); }
// clang-format on

#undef GCPA_DISPATCH

}  // namespace gcpa::kern
