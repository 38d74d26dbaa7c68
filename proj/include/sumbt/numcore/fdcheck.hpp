#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sumbt/numcore/tensor.hpp"

// Central finite differences against analytic gradients. Deliberately knows
// nothing about the tape: it only perturbs parameter storage and re-runs a
// forward closure, so it stays independent of the code path it checks.
namespace sumbt::numcore {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst;  // "param[index]" of the worst element
    bool ok(double tol) const { return max_rel_err < tol; }
};

inline double rel_err(double a, double b) {
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) / scale;
}

// `params` must already carry analytic grads (run backward first). `eval`
// re-runs the forward pass from current parameter values and returns the
// loss; it must not record anything.
template <typename Eval>
GradCheckResult check_gradients(
    std::span<const std::pair<std::string, Tensor<double>>> params, Eval eval,
    double h = 1e-4) {
    GradCheckResult res;
    for (const auto& [name, p] : params) {
        auto pt = p;  // shared handle; perturb through it
        for (std::size_t i = 0; i < pt.numel(); ++i) {
            const double saved = pt.data()[i];
            pt.data()[i] = saved + h;
            const double fp = eval();
            pt.data()[i] = saved - h;
            const double fm = eval();
            pt.data()[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double analytic =
                p.has_grad() ? static_cast<double>(p.grad()[i]) : 0.0;
            const double e = rel_err(analytic, numeric);
            if (e > res.max_rel_err) {
                res.max_rel_err = e;
                res.worst = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return res;
}

}  // namespace sumbt::numcore
