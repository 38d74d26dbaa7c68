#pragma once

#include <cstddef>

// Data-parallel inner loops behind the tensor engine. Every entry has a
// scalar reference implementation and, on x86-64 with AVX2+FMA, a vectorized
// variant. The active table is chosen once at runtime; SUMBT_KERNELS=scalar
// forces the reference path. SIMD and scalar kernels are equivalence-tested
// against each other in tests/test_kernels.cpp.
//
// Matrices are dense row-major. Matmul kernels accumulate into C, so callers
// zero C for a plain product and pass gradient buffers directly for
// accumulation. Reductions accumulate in double regardless of T: softmax and
// layer-norm normalization quality depends on it.
namespace sumbt::kernels {

template <typename T>
struct Kernels {
    // C[m x n] += A[m x k] * B[k x n]
    void (*matmul_nn)(const T* a, const T* b, T* c, int m, int k, int n);
    // C[m x n] += A[m x k] * B[n x k]^T
    void (*matmul_nt)(const T* a, const T* b, T* c, int m, int k, int n);
    // C[k x n] += A[m x k]^T * B[m x n]
    void (*matmul_tn)(const T* a, const T* b, T* c, int m, int k, int n);

    void (*add)(const T* a, const T* b, T* out, std::size_t n);  // out = a + b
    void (*mul)(const T* a, const T* b, T* out, std::size_t n);  // out = a * b
    void (*axpy)(T alpha, const T* x, T* y, std::size_t n);      // y += alpha * x
    // out = alpha * x + beta
    void (*scale_shift)(const T* x, T alpha, T beta, T* out, std::size_t n);

    double (*reduce_sum)(const T* x, std::size_t n);
    double (*dot)(const T* a, const T* b, std::size_t n);

    // In-place Adam update for one parameter block. bc1/bc2 are the
    // 1/(1-beta^t) bias-correction factors, precomputed by the caller.
    void (*adam_update)(T* p, const T* g, T* m, T* v, std::size_t n, T lr,
                        T beta1, T beta2, T eps, T bc1, T bc2);

    const char* name;
};

template <typename T>
const Kernels<T>& scalar_kernels();

bool cpu_has_avx2();

#if defined(__x86_64__) || defined(_M_X64)
// Only valid to call when cpu_has_avx2() is true.
template <typename T>
const Kernels<T>& avx2_kernels();
#endif

// Runtime-selected table (AVX2 when available, else scalar; env override).
template <typename T>
const Kernels<T>& active();

}  // namespace sumbt::kernels
