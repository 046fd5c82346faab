#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "peformer/tensor.hpp"

namespace peformer {

/// First/second moment buffers for one parameter list. The buffers are laid
/// out in the same order as the parameter list handed to adam_step.
struct AdamState {
    std::int64_t step = 0;
    double learning_rate = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    explicit AdamState(double lr = 0.002) : learning_rate(lr) {}
};

/// Standard Adam update with bias correction, applied in place. Gradients
/// are zeroed after the update.
inline void adam_step(const std::vector<TensorPtr>& params, AdamState& state) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i]->data.size(), 0.0);
            state.v[i].assign(params[i]->data.size(), 0.0);
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: parameter list size changed under a live state");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i]->grad.empty())
            throw std::invalid_argument("adam_step: parameter " + std::to_string(i) + " has no gradient");

    state.step += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (m.size() != p.data.size())
            throw std::invalid_argument("adam_step: moment shape does not match parameter");
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            const double g = p.grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            p.data[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
        p.zero_grad();
    }
}

}  // namespace peformer
