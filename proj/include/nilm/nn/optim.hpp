#pragma once

#include <cstdint>

#include "nilm/nn/param_store.hpp"

namespace nilm::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First and second moment estimates, keyed like the parameters they track.
struct AdamState {
    ParamStore m;
    ParamStore v;
    std::int64_t step = 0;
};

// One bias-corrected Adam update over every parameter in `params`. Parameters
// without an entry in `grads` are treated as having a zero gradient.
void adam_step(ParamStore& params, const ParamStore& grads, const AdamConfig& cfg, AdamState& state);

}  // namespace nilm::nn
