#ifndef GCPA_CORE_KERNELS_HPP
#define GCPA_CORE_KERNELS_HPP

#include <string>

namespace gcpa::kern {

// Arithmetic inner loops come in a scalar reference flavor plus SIMD variants
// picked at runtime. The scalar kernels are the semantic reference; the SIMD
// ones must agree with them within rounding (see tests/test_kernels.cpp).
enum class Isa { scalar, avx2, neon };

Isa active_isa();
const char* isa_name(Isa isa);
bool isa_supported(Isa isa);

// Overrides the dispatch choice for this process. Throws std::runtime_error
// if the ISA is not supported on this machine. GCPA_ISA=scalar|avx2|neon|auto
// does the same from the environment.
void force_isa(Isa isa);

// Row-major matrix multiply variants. When accumulate is false, C is
// overwritten, otherwise the product is added into C.
//   gemm:    C[M,N] = A[M,K]   * B[K,N]
//   gemm_tn: C[M,N] = A^T with A stored [K,M]
//   gemm_nt: C[M,N] = B^T with B stored [N,K]
template <typename T>
void gemm(const T* a, const T* b, T* c, long m, long n, long k, bool accumulate);
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, long m, long n, long k, bool accumulate);
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, long m, long n, long k, bool accumulate);

template <typename T> void add(const T* a, const T* b, T* out, long n);   // out = a + b
template <typename T> void mul(const T* a, const T* b, T* out, long n);   // out = a * b
template <typename T> void axpy(T alpha, const T* x, T* y, long n);        // y += alpha * x
template <typename T> void scale(T alpha, T* x, long n);                   // x *= alpha
template <typename T> void add_const(T alpha, T* x, long n);               // x += alpha
template <typename T> void relu(const T* x, T* y, long n);                 // y = max(x, 0)
template <typename T> void relu_bwd(const T* x, const T* dy, T* dx, long n);  // dx += dy * (x > 0)
template <typename T> void mul_acc(const T* a, const T* b, T* out, long n);   // out += a * b

template <typename T> T reduce_sum(const T* x, long n);
template <typename T> T dot(const T* a, const T* b, long n);
template <typename T> T reduce_abs_diff(const T* a, const T* b, long n);   // sum |a - b|

// SGD update with momentum: v = mu*v + (g + wd*p); p -= lr*v
template <typename T>
void sgd_momentum(T* p, T* v, const T* g, T lr, T mu, T wd, long n);

}  // namespace gcpa::kern

#endif
