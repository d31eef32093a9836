#include "protshape/nn/optim.hpp"

#include <cmath>

namespace protshape::nn {

void sgd_step(ParamStore& params, const GradMap& grads, double lr) {
  for (auto& [name, p] : params.tensors) {
    const auto it = grads.find(name);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    if (!g.same_shape(p)) throw ShapeMismatch("sgd_step: gradient shape differs for " + name);
    for (std::size_t i = 0; i < p.size(); ++i) p.v[i] -= lr * g.v[i];
  }
}

void adam_step(ParamStore& params, const GradMap& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  ++state.step_count;
  const double c1 = 1.0 - std::pow(beta1, state.step_count);
  const double c2 = 1.0 - std::pow(beta2, state.step_count);
  for (auto& [name, p] : params.tensors) {
    const auto it = grads.find(name);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    if (!g.same_shape(p)) throw ShapeMismatch("adam_step: gradient shape differs for " + name);
    auto& [m, v] = state.moments[name];
    if (m.v.empty()) {
      m = Tensor::zeros(p.shape);
      v = Tensor::zeros(p.shape);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m.v[i] = beta1 * m.v[i] + (1.0 - beta1) * g.v[i];
      v.v[i] = beta2 * v.v[i] + (1.0 - beta2) * g.v[i] * g.v[i];
      const double mhat = m.v[i] / c1;
      const double vhat = v.v[i] / c2;
      p.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                      std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.v) x = dist(rng);
  return t;
}

}  // namespace protshape::nn
