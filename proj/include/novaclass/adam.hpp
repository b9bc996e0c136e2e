#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "novaclass/tensor.hpp"

namespace novaclass {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment accumulators are created lazily (zeros) on the first step.
struct AdamState {
    AdamConfig config;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::size_t t = 0;
};

/// One bias-corrected Adam update of every parameter in place.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace novaclass
