#include "nilm/nn/optim.hpp"

#include <cmath>

namespace nilm::nn {

void adam_step(ParamStore& params, const ParamStore& grads, const AdamConfig& cfg, AdamState& state) {
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
    for (const auto& [name, g] : grads) {
        if (!params.contains(name)) throw std::invalid_argument("adam: gradient for unknown parameter '" + name + "'");
        if (params.at(name).shape() != g.shape())
            throw ShapeError("adam: gradient shape for '" + name + "'", params.at(name).shape(), g.shape());
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (auto& [name, p] : params) {
        if (!state.m.contains(name) || state.m.at(name).shape() != p.shape()) {
            state.m.set(name, Tensor(p.shape(), 0.0));
            state.v.set(name, Tensor(p.shape(), 0.0));
        }
        Tensor& m = state.m.at(name);
        Tensor& v = state.v.at(name);
        const Tensor* g = grads.contains(name) ? &grads.at(name) : nullptr;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = g ? (*g)[k] : 0.0;
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
            if (m[k] == 0.0) continue;
            p[k] -= cfg.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.eps);
        }
    }
}

}  // namespace nilm::nn
