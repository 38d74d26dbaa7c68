#include <cmath>
#include <cstddef>

#include "sumbt/kernels/kernels.hpp"

namespace sumbt::kernels {

namespace {

// i-k-j loop order: streams B and C rows, broadcast of A[i,k] in a register.
// Same traversal as the AVX2 variant so results differ only by vector-lane
// reassociation.
template <typename T>
void matmul_nn_ref(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * k;
        T* crow = c + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const T aik = arow[kk];
            const T* brow = b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

template <typename T>
void matmul_nt_ref(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * k;
        T* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* brow = b + static_cast<std::size_t>(j) * k;
            T acc = 0;
            for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            crow[j] += acc;
        }
    }
}

template <typename T>
void matmul_tn_ref(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * k;
        const T* brow = b + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const T aik = arow[kk];
            T* crow = c + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

template <typename T>
void add_ref(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void mul_ref(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void axpy_ref(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale_shift_ref(const T* x, T alpha, T beta, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i] + beta;
}

template <typename T>
double reduce_sum_ref(const T* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]);
    return acc;
}

template <typename T>
double dot_ref(const T* a, const T* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

template <typename T>
void adam_update_ref(T* p, const T* g, T* m, T* v, std::size_t n, T lr, T beta1,
                     T beta2, T eps, T bc1, T bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
        v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
        const T mhat = m[i] * bc1;
        const T vhat = v[i] * bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

template <typename T>
Kernels<T> make_scalar_table() {
    Kernels<T> t;
    t.matmul_nn = &matmul_nn_ref<T>;
    t.matmul_nt = &matmul_nt_ref<T>;
    t.matmul_tn = &matmul_tn_ref<T>;
    t.add = &add_ref<T>;
    t.mul = &mul_ref<T>;
    t.axpy = &axpy_ref<T>;
    t.scale_shift = &scale_shift_ref<T>;
    t.reduce_sum = &reduce_sum_ref<T>;
    t.dot = &dot_ref<T>;
    t.adam_update = &adam_update_ref<T>;
    t.name = "scalar";
    return t;
}

}  // namespace

template <>
const Kernels<float>& scalar_kernels<float>() {
    static const Kernels<float> table = make_scalar_table<float>();
    return table;
}

template <>
const Kernels<double>& scalar_kernels<double>() {
    static const Kernels<double> table = make_scalar_table<double>();
    return table;
}

}  // namespace sumbt::kernels
