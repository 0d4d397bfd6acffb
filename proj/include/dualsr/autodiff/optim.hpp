#pragma once

#include <cmath>
#include <vector>

#include "dualsr/autodiff/tensor.hpp"

namespace dualsr::ad {

struct AdamState {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

/// Halves the base rate every 30 epochs.
inline double lr_schedule(std::size_t epoch, double base = 1e-4)
{
    return base * std::pow(0.5, static_cast<double>(epoch / 30));
}

/// One bias-corrected ADAM update of every parameter from its accumulated
/// gradient. Moments are kept in double.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState& state)
{
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.numel(), 0.0);
            state.v.emplace_back(p.numel(), 0.0);
        }
    }
    require(state.m.size() == params.size(), "adam: parameter count changed between steps");
    for (std::size_t k = 0; k < params.size(); ++k) {
        require(state.m[k].size() == params[k].numel(), "adam: moment shape does not match parameter");
        if (!params[k].has_grad()) continue;
        for (auto g : params[k].grad_buffer())
            if (!std::isfinite(static_cast<double>(g))) throw Error("adam: non-finite gradient");
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        auto& m = state.m[k];
        auto& v = state.v[k];
        const bool has = p.has_grad();
        const auto& g = p.grad_buffer();
        auto& val = p.values();
        for (std::size_t n = 0; n < val.size(); ++n) {
            const double gn = has ? static_cast<double>(g[n]) : 0.0;
            m[n] = state.beta1 * m[n] + (1.0 - state.beta1) * gn;
            v[n] = state.beta2 * v[n] + (1.0 - state.beta2) * gn * gn;
            const double mhat = m[n] / c1;
            const double vhat = v[n] / c2;
            val[n] = static_cast<T>(static_cast<double>(val[n]) - state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon));
        }
    }
}

} // namespace dualsr::ad
