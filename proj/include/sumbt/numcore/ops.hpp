#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sumbt/kernels/kernels.hpp"
#include "sumbt/numcore/tensor.hpp"

// Differentiable primitives. Forward values go through the kernel layer;
// backward closures are recorded on the thread's active tape when at least
// one input requires grad. Reductions that feed normalization (softmax,
// log-softmax, layer norm, sum, mean) accumulate in double so that
// distributions sum to 1 within 1e-6 even on the float32 path.
namespace sumbt::numcore {

enum class DistanceMetric { Euclidean, SquaredEuclidean, NegativeCosine };

namespace detail {

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

template <typename T>
bool grad_wanted(const Tensor<T>& t) {
    return Tape<T>::active() != nullptr && t.requires_grad();
}

template <typename T, typename... Ts>
bool grad_wanted(const Tensor<T>& t, const Ts&... rest) {
    return grad_wanted(t) || grad_wanted(rest...);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw ShapeError("matmul: incompatible shapes " +
                         detail::shape_str(a.shape()) + " x " +
                         detail::shape_str(b.shape()));
    const int m = a.rows(), k = a.cols(), n = b.cols();
    auto out = Tensor<T>::zeros({m, n});
    const auto& K = kernels::active<T>();
    K.matmul_nn(a.data().data(), b.data().data(), out.data().data(), m, k, n);
    if (detail::grad_wanted(a, b)) {
        out.set_requires_grad(true);
        auto an = a.node(), bn = b.node(), on = out.node();
        Tape<T>::active()->record(on, [an, bn, on, m, k, n] {
            const auto& KK = kernels::active<T>();
            if (an->requires_grad) {
                an->ensure_grad();
                KK.matmul_nt(on->grad.data(), bn->value.data(),
                             an->grad.data(), m, n, k);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                KK.matmul_tn(an->value.data(), on->grad.data(),
                             bn->grad.data(), m, k, n);
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    if (a.rank() != 2) throw ShapeError("transpose: rank-2 tensor required");
    const int m = a.rows(), n = a.cols();
    auto out = Tensor<T>::zeros({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on, m, n] {
            an->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    an->grad[static_cast<std::size_t>(i) * n + j] +=
                        on->grad[static_cast<std::size_t>(j) * m + i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shape mismatch " +
                         detail::shape_str(a.shape()) + " vs " +
                         detail::shape_str(b.shape()));
    auto out = Tensor<T>::zeros(a.shape());
    kernels::active<T>().add(a.data().data(), b.data().data(),
                             out.data().data(), a.numel());
    if (detail::grad_wanted(a, b)) {
        out.set_requires_grad(true);
        auto an = a.node(), bn = b.node(), on = out.node();
        Tape<T>::active()->record(on, [an, bn, on] {
            const auto& K = kernels::active<T>();
            if (an->requires_grad) {
                an->ensure_grad();
                K.axpy(T(1), on->grad.data(), an->grad.data(), on->grad.size());
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                K.axpy(T(1), on->grad.data(), bn->grad.data(), on->grad.size());
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("sub: shape mismatch " +
                         detail::shape_str(a.shape()) + " vs " +
                         detail::shape_str(b.shape()));
    auto out = Tensor<T>::zeros(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i)
        out.data()[i] = a.data()[i] - b.data()[i];
    if (detail::grad_wanted(a, b)) {
        out.set_requires_grad(true);
        auto an = a.node(), bn = b.node(), on = out.node();
        Tape<T>::active()->record(on, [an, bn, on] {
            const auto& K = kernels::active<T>();
            if (an->requires_grad) {
                an->ensure_grad();
                K.axpy(T(1), on->grad.data(), an->grad.data(), on->grad.size());
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                K.axpy(T(-1), on->grad.data(), bn->grad.data(),
                       on->grad.size());
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("mul: shape mismatch " +
                         detail::shape_str(a.shape()) + " vs " +
                         detail::shape_str(b.shape()));
    auto out = Tensor<T>::zeros(a.shape());
    kernels::active<T>().mul(a.data().data(), b.data().data(),
                             out.data().data(), a.numel());
    if (detail::grad_wanted(a, b)) {
        out.set_requires_grad(true);
        auto an = a.node(), bn = b.node(), on = out.node();
        Tape<T>::active()->record(on, [an, bn, on] {
            const std::size_t n = on->grad.size();
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    an->grad[i] += on->grad[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    bn->grad[i] += on->grad[i] * an->value[i];
            }
        });
    }
    return out;
}

// out[i][j] = mat[i][j] + vec[j]
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& mat, const Tensor<T>& vec) {
    if (mat.rank() != 2 || vec.rank() != 1 || vec.cols() != mat.cols())
        throw ShapeError("add_rowvec: shape mismatch " +
                         detail::shape_str(mat.shape()) + " vs " +
                         detail::shape_str(vec.shape()));
    const int m = mat.rows(), n = mat.cols();
    auto out = Tensor<T>::zeros(mat.shape());
    for (int i = 0; i < m; ++i)
        kernels::active<T>().add(mat.data().data() + std::size_t(i) * n,
                                 vec.data().data(),
                                 out.data().data() + std::size_t(i) * n, n);
    if (detail::grad_wanted(mat, vec)) {
        out.set_requires_grad(true);
        auto mn = mat.node(), vn = vec.node(), on = out.node();
        Tape<T>::active()->record(on, [mn, vn, on, m, n] {
            const auto& K = kernels::active<T>();
            if (mn->requires_grad) {
                mn->ensure_grad();
                K.axpy(T(1), on->grad.data(), mn->grad.data(), on->grad.size());
            }
            if (vn->requires_grad) {
                vn->ensure_grad();
                for (int i = 0; i < m; ++i)
                    K.axpy(T(1), on->grad.data() + std::size_t(i) * n,
                           vn->grad.data(), n);
            }
        });
    }
    return out;
}

// out = alpha * a + beta
template <typename T>
Tensor<T> affine(const Tensor<T>& a, T alpha, T beta) {
    auto out = Tensor<T>::zeros(a.shape());
    kernels::active<T>().scale_shift(a.data().data(), alpha, beta,
                                     out.data().data(), a.numel());
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on, alpha] {
            an->ensure_grad();
            kernels::active<T>().axpy(alpha, on->grad.data(), an->grad.data(),
                                      on->grad.size());
        });
    }
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T alpha) {
    return affine(a, alpha, T(0));
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    auto out = Tensor<T>::zeros(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const T x = a.data()[i];
        if (x >= T(0)) {
            out.data()[i] = T(1) / (T(1) + std::exp(-x));
        } else {
            const T e = std::exp(x);
            out.data()[i] = e / (T(1) + e);
        }
    }
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on] {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                const T y = on->value[i];
                an->grad[i] += on->grad[i] * y * (T(1) - y);
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
    auto out = Tensor<T>::zeros(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i)
        out.data()[i] = std::tanh(a.data()[i]);
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on] {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                const T y = on->value[i];
                an->grad[i] += on->grad[i] * (T(1) - y * y);
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    auto out = Tensor<T>::zeros(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i)
        out.data()[i] = a.data()[i] > T(0) ? a.data()[i] : T(0);
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on] {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                if (an->value[i] > T(0)) an->grad[i] += on->grad[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
    auto out = Tensor<T>::zeros(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i)
        out.data()[i] = std::sqrt(a.data()[i]);
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on] {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i] / (T(2) * on->value[i]);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// shape surgery

template <typename T>
Tensor<T> concat_cols(std::span<const Tensor<T>> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const int m = parts[0].rows();
    int total = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.rows() != m)
            throw ShapeError("concat_cols: row count mismatch");
        total += p.cols();
    }
    auto out = Tensor<T>::zeros({m, total});
    int off = 0;
    for (const auto& p : parts) {
        const int c = p.cols();
        for (int i = 0; i < m; ++i)
            std::copy_n(p.data().data() + std::size_t(i) * c, c,
                        out.data().data() + std::size_t(i) * total + off);
        off += c;
    }
    bool rg = false;
    for (const auto& p : parts) rg = rg || detail::grad_wanted(p);
    if (rg) {
        out.set_requires_grad(true);
        std::vector<std::shared_ptr<TensorNode<T>>> ins;
        for (const auto& p : parts) ins.push_back(p.node());
        auto on = out.node();
        Tape<T>::active()->record(on, [ins, on, m, total] {
            int off2 = 0;
            for (auto& in : ins) {
                const int c = in->shape[1];
                if (in->requires_grad) {
                    in->ensure_grad();
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < c; ++j)
                            in->grad[std::size_t(i) * c + j] +=
                                on->grad[std::size_t(i) * total + off2 + j];
                }
                off2 += c;
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> concat_cols(std::initializer_list<Tensor<T>> parts) {
    std::vector<Tensor<T>> v(parts);
    return concat_cols(std::span<const Tensor<T>>(v));
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, int c0, int c1) {
    if (a.rank() != 2 || c0 < 0 || c1 > a.cols() || c0 >= c1)
        throw ShapeError("slice_cols: bad range on " +
                         detail::shape_str(a.shape()));
    const int m = a.rows(), n = a.cols(), w = c1 - c0;
    auto out = Tensor<T>::zeros({m, w});
    for (int i = 0; i < m; ++i)
        std::copy_n(a.data().data() + std::size_t(i) * n + c0, w,
                    out.data().data() + std::size_t(i) * w);
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on, m, n, w, c0] {
            an->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < w; ++j)
                    an->grad[std::size_t(i) * n + c0 + j] +=
                        on->grad[std::size_t(i) * w + j];
        });
    }
    return out;
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, int r0, int r1) {
    if (a.rank() != 2 || r0 < 0 || r1 > a.rows() || r0 >= r1)
        throw ShapeError("slice_rows: bad range on " +
                         detail::shape_str(a.shape()));
    const int n = a.cols(), h = r1 - r0;
    auto out = Tensor<T>::zeros({h, n});
    std::copy_n(a.data().data() + std::size_t(r0) * n, std::size_t(h) * n,
                out.data().data());
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on, n, h, r0] {
            an->ensure_grad();
            kernels::active<T>().axpy(
                T(1), on->grad.data(),
                an->grad.data() + std::size_t(r0) * n, std::size_t(h) * n);
        });
    }
    return out;
}

// Row gather (embedding lookup). out[i][:] = table[ids[i]][:]
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<int>& ids) {
    if (table.rank() != 2) throw ShapeError("gather_rows: table must be rank 2");
    if (ids.empty()) throw ShapeError("gather_rows: empty id list");
    const int n = table.cols(), v = table.rows();
    for (int id : ids)
        if (id < 0 || id >= v)
            throw ShapeError("gather_rows: id out of range");
    auto out = Tensor<T>::zeros({static_cast<int>(ids.size()), n});
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::copy_n(table.data().data() + std::size_t(ids[i]) * n, n,
                    out.data().data() + i * n);
    if (detail::grad_wanted(table)) {
        out.set_requires_grad(true);
        auto tn = table.node(), on = out.node();
        Tape<T>::active()->record(on, [tn, on, ids, n] {
            tn->ensure_grad();
            for (std::size_t i = 0; i < ids.size(); ++i)
                kernels::active<T>().axpy(
                    T(1), on->grad.data() + i * n,
                    tn->grad.data() + std::size_t(ids[i]) * n, n);
        });
    }
    return out;
}

// out[i] = mat[i][ids[i]]
template <typename T>
Tensor<T> select_cols(const Tensor<T>& mat, const std::vector<int>& ids) {
    if (mat.rank() != 2 || static_cast<int>(ids.size()) != mat.rows())
        throw ShapeError("select_cols: need one column id per row");
    const int n = mat.cols();
    for (int id : ids)
        if (id < 0 || id >= n) throw ShapeError("select_cols: id out of range");
    auto out = Tensor<T>::zeros({static_cast<int>(ids.size())});
    for (std::size_t i = 0; i < ids.size(); ++i)
        out.data()[i] = mat.data()[i * n + ids[i]];
    if (detail::grad_wanted(mat)) {
        out.set_requires_grad(true);
        auto mn = mat.node(), on = out.node();
        Tape<T>::active()->record(on, [mn, on, ids, n] {
            mn->ensure_grad();
            for (std::size_t i = 0; i < ids.size(); ++i)
                mn->grad[i * n + ids[i]] += on->grad[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> pick(const Tensor<T>& a, int flat_index) {
    if (flat_index < 0 || static_cast<std::size_t>(flat_index) >= a.numel())
        throw ShapeError("pick: index out of range");
    auto out = Tensor<T>::scalar(a.data()[flat_index]);
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on, flat_index] {
            an->ensure_grad();
            an->grad[flat_index] += on->grad[0];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    const double s = kernels::active<T>().reduce_sum(a.data().data(), a.numel());
    auto out = Tensor<T>::scalar(static_cast<T>(s));
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on] {
            an->ensure_grad();
            const T g = on->grad[0];
            for (auto& x : an->grad) x += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    const double n = static_cast<double>(a.numel());
    const double s = kernels::active<T>().reduce_sum(a.data().data(), a.numel());
    auto out = Tensor<T>::scalar(static_cast<T>(s / n));
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on, n] {
            an->ensure_grad();
            const T g = static_cast<T>(on->grad[0] / n);
            for (auto& x : an->grad) x += g;
        });
    }
    return out;
}

// Sum of scalar terms as a single record (keeps dialog losses off a long
// add-chain).
template <typename T>
Tensor<T> sum_scalars(std::span<const Tensor<T>> terms) {
    if (terms.empty()) throw ShapeError("sum_scalars: no inputs");
    double acc = 0.0;
    bool rg = false;
    for (const auto& t : terms) {
        if (t.numel() != 1) throw ShapeError("sum_scalars: non-scalar term");
        acc += static_cast<double>(t.item());
        rg = rg || detail::grad_wanted(t);
    }
    auto out = Tensor<T>::scalar(static_cast<T>(acc));
    if (rg) {
        out.set_requires_grad(true);
        std::vector<std::shared_ptr<TensorNode<T>>> ins;
        for (const auto& t : terms) ins.push_back(t.node());
        auto on = out.node();
        Tape<T>::active()->record(on, [ins, on] {
            for (auto& in : ins) {
                if (!in->requires_grad) continue;
                in->ensure_grad();
                in->grad[0] += on->grad[0];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// normalization

// Row-wise softmax over the last axis (a rank-1 tensor is one row).
// Max-subtracted for stability; the denominator accumulates in double.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a) {
    const int rows = a.rows(), n = a.cols();
    auto out = Tensor<T>::zeros(a.shape());
    for (int r = 0; r < rows; ++r) {
        const T* x = a.data().data() + std::size_t(r) * n;
        T* y = out.data().data() + std::size_t(r) * n;
        T mx = x[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        if (std::isnan(static_cast<double>(mx)))
            throw NumericError("softmax: NaN input");
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
            y[j] = std::exp(x[j] - mx);
            denom += static_cast<double>(y[j]);
        }
        for (int j = 0; j < n; ++j)
            y[j] = static_cast<T>(static_cast<double>(y[j]) / denom);
    }
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on, rows, n] {
            an->ensure_grad();
            for (int r = 0; r < rows; ++r) {
                const T* p = on->value.data() + std::size_t(r) * n;
                const T* dy = on->grad.data() + std::size_t(r) * n;
                T* dx = an->grad.data() + std::size_t(r) * n;
                double inner = 0.0;
                for (int j = 0; j < n; ++j)
                    inner += static_cast<double>(dy[j]) *
                             static_cast<double>(p[j]);
                for (int j = 0; j < n; ++j)
                    dx[j] += p[j] * (dy[j] - static_cast<T>(inner));
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& a) {
    const int rows = a.rows(), n = a.cols();
    auto out = Tensor<T>::zeros(a.shape());
    for (int r = 0; r < rows; ++r) {
        const T* x = a.data().data() + std::size_t(r) * n;
        T* y = out.data().data() + std::size_t(r) * n;
        T mx = x[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        if (std::isnan(static_cast<double>(mx)))
            throw NumericError("log_softmax: NaN input");
        double denom = 0.0;
        for (int j = 0; j < n; ++j)
            denom += std::exp(static_cast<double>(x[j] - mx));
        const double lse = static_cast<double>(mx) + std::log(denom);
        for (int j = 0; j < n; ++j)
            y[j] = static_cast<T>(static_cast<double>(x[j]) - lse);
    }
    if (detail::grad_wanted(a)) {
        out.set_requires_grad(true);
        auto an = a.node(), on = out.node();
        Tape<T>::active()->record(on, [an, on, rows, n] {
            an->ensure_grad();
            for (int r = 0; r < rows; ++r) {
                const T* lp = on->value.data() + std::size_t(r) * n;
                const T* dy = on->grad.data() + std::size_t(r) * n;
                T* dx = an->grad.data() + std::size_t(r) * n;
                double total = 0.0;
                for (int j = 0; j < n; ++j)
                    total += static_cast<double>(dy[j]);
                for (int j = 0; j < n; ++j)
                    dx[j] += dy[j] - static_cast<T>(std::exp(static_cast<double>(
                                         lp[j])) * total);
            }
        });
    }
    return out;
}

// Row-wise layer normalization over the last axis with learnable gain/bias.
// Population variance; mean/variance accumulate in double.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps) {
    const int rows = x.rows(), n = x.cols();
    if (gain.rank() != 1 || bias.rank() != 1 || gain.cols() != n ||
        bias.cols() != n)
        throw ShapeError("layer_norm: gain/bias must be rank-1 of width " +
                         std::to_string(n));
    auto out = Tensor<T>::zeros(x.shape());
    std::vector<T> xhat(x.numel());
    std::vector<double> inv_std(rows);
    for (int r = 0; r < rows; ++r) {
        const T* xr = x.data().data() + std::size_t(r) * n;
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += static_cast<double>(xr[j]);
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = static_cast<double>(xr[j]) - mu;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
        inv_std[r] = inv;
        T* yr = out.data().data() + std::size_t(r) * n;
        for (int j = 0; j < n; ++j) {
            const T xh =
                static_cast<T>((static_cast<double>(xr[j]) - mu) * inv);
            xhat[std::size_t(r) * n + j] = xh;
            yr[j] = gain.data()[j] * xh + bias.data()[j];
        }
    }
    if (detail::grad_wanted(x, gain, bias)) {
        out.set_requires_grad(true);
        auto xn = x.node(), gn = gain.node(), bn = bias.node(),
             on = out.node();
        auto xh = std::make_shared<std::vector<T>>(std::move(xhat));
        auto inv = std::make_shared<std::vector<double>>(std::move(inv_std));
        Tape<T>::active()->record(on, [xn, gn, bn, on, xh, inv, rows, n] {
            for (int r = 0; r < rows; ++r) {
                const T* dy = on->grad.data() + std::size_t(r) * n;
                const T* xhr = xh->data() + std::size_t(r) * n;
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    double m1 = 0.0, m2 = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const double dxh = static_cast<double>(dy[j]) *
                                           static_cast<double>(gn->value[j]);
                        m1 += dxh;
                        m2 += dxh * static_cast<double>(xhr[j]);
                    }
                    m1 /= n;
                    m2 /= n;
                    T* dx = xn->grad.data() + std::size_t(r) * n;
                    for (int j = 0; j < n; ++j) {
                        const double dxh = static_cast<double>(dy[j]) *
                                           static_cast<double>(gn->value[j]);
                        dx[j] += static_cast<T>(
                            (*inv)[r] *
                            (dxh - m1 - static_cast<double>(xhr[j]) * m2));
                    }
                }
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (int j = 0; j < n; ++j)
                        gn->grad[j] += dy[j] * xhr[j];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (int j = 0; j < n; ++j) bn->grad[j] += dy[j];
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// distances (the non-parametric classifier head)

// out[i] = d(yhat, Y[i]). yhat is rank-1 [d] or [1,d]; Y is [n,d].
template <typename T>
Tensor<T> pair_distances(const Tensor<T>& yhat, const Tensor<T>& y_rows,
                         DistanceMetric metric) {
    const int d = yhat.cols();
    if (yhat.rows() != 1 || y_rows.rank() != 2 || y_rows.cols() != d)
        throw ShapeError("pair_distances: shape mismatch " +
                         detail::shape_str(yhat.shape()) + " vs " +
                         detail::shape_str(y_rows.shape()));
    const int n = y_rows.rows();
    const auto& K = kernels::active<T>();
    auto out = Tensor<T>::zeros({n});

    double yh_norm = 0.0;
    if (metric == DistanceMetric::NegativeCosine) {
        yh_norm = std::sqrt(K.dot(yhat.data().data(), yhat.data().data(), d));
        if (yh_norm < 1e-12)
            throw NumericError(
                "pair_distances: zero vector under cosine metric");
    }
    // Stash per-candidate scalars for backward (cosines or distances).
    auto aux = std::make_shared<std::vector<double>>(n);
    for (int i = 0; i < n; ++i) {
        const T* yi = y_rows.data().data() + std::size_t(i) * d;
        switch (metric) {
            case DistanceMetric::Euclidean:
            case DistanceMetric::SquaredEuclidean: {
                double s = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double diff = static_cast<double>(yhat.data()[j]) -
                                        static_cast<double>(yi[j]);
                    s += diff * diff;
                }
                const double dist =
                    metric == DistanceMetric::Euclidean ? std::sqrt(s) : s;
                (*aux)[i] = dist;
                out.data()[i] = static_cast<T>(dist);
                break;
            }
            case DistanceMetric::NegativeCosine: {
                const double ni = std::sqrt(K.dot(yi, yi, d));
                if (ni < 1e-12)
                    throw NumericError(
                        "pair_distances: zero vector under cosine metric");
                const double c =
                    K.dot(yhat.data().data(), yi, d) / (yh_norm * ni);
                (*aux)[i] = c;
                out.data()[i] = static_cast<T>(-c);
                break;
            }
        }
    }
    if (detail::grad_wanted(yhat, y_rows)) {
        out.set_requires_grad(true);
        auto yn = yhat.node(), rn = y_rows.node(), on = out.node();
        Tape<T>::active()->record(on, [yn, rn, on, aux, metric, n, d,
                                       yh_norm] {
            const auto& KK = kernels::active<T>();
            if (yn->requires_grad) yn->ensure_grad();
            if (rn->requires_grad) rn->ensure_grad();
            for (int i = 0; i < n; ++i) {
                const double go = static_cast<double>(on->grad[i]);
                if (go == 0.0) continue;
                const T* yi = rn->value.data() + std::size_t(i) * d;
                switch (metric) {
                    case DistanceMetric::Euclidean: {
                        const double dist = (*aux)[i];
                        if (dist < 1e-12) break;  // subgradient 0 at the cusp
                        const double coef = go / dist;
                        for (int j = 0; j < d; ++j) {
                            const double diff =
                                static_cast<double>(yn->value[j]) -
                                static_cast<double>(yi[j]);
                            if (yn->requires_grad)
                                yn->grad[j] += static_cast<T>(coef * diff);
                            if (rn->requires_grad)
                                rn->grad[std::size_t(i) * d + j] -=
                                    static_cast<T>(coef * diff);
                        }
                        break;
                    }
                    case DistanceMetric::SquaredEuclidean: {
                        for (int j = 0; j < d; ++j) {
                            const double diff =
                                static_cast<double>(yn->value[j]) -
                                static_cast<double>(yi[j]);
                            if (yn->requires_grad)
                                yn->grad[j] += static_cast<T>(2.0 * go * diff);
                            if (rn->requires_grad)
                                rn->grad[std::size_t(i) * d + j] -=
                                    static_cast<T>(2.0 * go * diff);
                        }
                        break;
                    }
                    case DistanceMetric::NegativeCosine: {
                        const double ni = std::sqrt(KK.dot(yi, yi, d));
                        const double c = (*aux)[i];
                        for (int j = 0; j < d; ++j) {
                            const double yhj =
                                static_cast<double>(yn->value[j]);
                            const double yij = static_cast<double>(yi[j]);
                            if (yn->requires_grad)
                                yn->grad[j] += static_cast<T>(
                                    go * (-yij / (yh_norm * ni) +
                                          c * yhj / (yh_norm * yh_norm)));
                            if (rn->requires_grad)
                                rn->grad[std::size_t(i) * d + j] +=
                                    static_cast<T>(
                                        go * (-yhj / (yh_norm * ni) +
                                              c * yij / (ni * ni)));
                        }
                        break;
                    }
                }
            }
        });
    }
    return out;
}

}  // namespace sumbt::numcore
