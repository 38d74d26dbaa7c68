#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sumbt/errors.hpp"
#include "sumbt/kernels/kernels.hpp"
#include "sumbt/numcore/tensor.hpp"

namespace sumbt::training {

// Linear warmup to `peak` over warmup_steps, then linear decay to 0 at
// total_steps. Continuous, peaks exactly at the warmup boundary.
inline double lr_schedule(long step, long total_steps, long warmup_steps,
                          double peak) {
    if (warmup_steps < 1) throw ConfigError("warmup_steps must be >= 1");
    if (warmup_steps >= total_steps)
        throw ConfigError("warmup_steps must be < total_steps");
    if (step < 0 || step > total_steps)
        throw ConfigError("schedule step out of range");
    if (step <= warmup_steps)
        return peak * static_cast<double>(step) /
               static_cast<double>(warmup_steps);
    return peak * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup_steps);
}

// Adam with bias correction. State is keyed by parameter order, which must
// stay stable across calls.
template <typename T>
class Adam {
  public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    long steps_taken() const { return t_; }

    void step(std::span<std::pair<std::string, numcore::Tensor<T>>> params,
              double lr) {
        if (m_.empty()) {
            for (const auto& [name, p] : params) {
                m_.emplace_back(p.numel(), T(0));
                v_.emplace_back(p.numel(), T(0));
            }
        }
        if (m_.size() != params.size())
            throw ConfigError("Adam: parameter list changed size");
        ++t_;
        const T bc1 = static_cast<T>(1.0 / (1.0 - std::pow(beta1_, t_)));
        const T bc2 = static_cast<T>(1.0 / (1.0 - std::pow(beta2_, t_)));
        const auto& K = kernels::active<T>();
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& [name, p] = params[i];
            p.node()->ensure_grad();
            auto g = p.node()->grad.data();
            for (std::size_t j = 0; j < p.numel(); ++j)
                if (std::isnan(static_cast<double>(g[j])))
                    throw NumericError("NaN gradient in parameter " + name);
            K.adam_update(p.data().data(), g, m_[i].data(), v_[i].data(),
                          p.numel(), static_cast<T>(lr),
                          static_cast<T>(beta1_), static_cast<T>(beta2_),
                          static_cast<T>(eps_), bc1, bc2);
        }
    }

  private:
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

template <typename T>
void zero_grads(std::span<std::pair<std::string, numcore::Tensor<T>>> params) {
    for (auto& [name, p] : params) p.zero_grad();
}

}  // namespace sumbt::training
