#include "novaclass/adam.hpp"

#include <cmath>

#include "novaclass/errors.hpp"

namespace novaclass {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state) {
    if (params.size() != grads.size())
        throw InvalidArgument("adam: " + std::to_string(params.size()) + " parameters but " +
                              std::to_string(grads.size()) + " gradients");
    if (state.m.empty()) {
        for (const Tensor* p : params) {
            state.m.emplace_back(p->shape());
            state.v.emplace_back(p->shape());
        }
    }
    if (state.m.size() != params.size())
        throw InvalidArgument("adam: state was built for a different parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->shape() != grads[i].shape() || params[i]->shape() != state.m[i].shape())
            throw InvalidArgument("adam: shape mismatch at parameter " + std::to_string(i));
    }

    const AdamConfig& c = state.config;
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double correct1 = 1.0 - std::pow(c.beta1, t);
    const double correct2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* theta = params[i]->data();
        const double* g = grads[i].data();
        double* m = state.m[i].data();
        double* v = state.v[i].data();
        for (std::size_t j = 0; j < params[i]->size(); ++j) {
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
            const double m_hat = m[j] / correct1;
            const double v_hat = v[j] / correct2;
            theta[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

}  // namespace novaclass
