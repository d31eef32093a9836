// First-order optimizers over a ParamStore, plus the weight initializer
// shared by both models.

#pragma once

#include <cstdint>
#include <random>

#include "protshape/nn/tape.hpp"

namespace protshape::nn {

// params -= lr * grads. Missing gradient entries are skipped.
void sgd_step(ParamStore& params, const GradMap& grads, double lr);

struct AdamState {
  std::map<std::string, std::pair<Tensor, Tensor>> moments;  // (m, v) per name
  long step_count = 0;
};

void adam_step(ParamStore& params, const GradMap& grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

// Uniform in +/- sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                      std::size_t fan_out, std::mt19937_64& rng);

}  // namespace protshape::nn
