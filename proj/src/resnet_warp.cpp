#include "protshape/resnet_warp.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace protshape {

namespace {

using nn::NodeId;
using nn::Tape;
using nn::Tensor;

Tensor srvf_tensor(const Srvf& q) {
  const int T = q.grid_size();
  Tensor t = Tensor::zeros({3, static_cast<std::size_t>(T)});
  for (int d = 0; d < 3; ++d)
    for (int i = 0; i < T; ++i) t.v[d * T + i] = q.values[i][d];
  return t;
}

std::string block_name(int l, const char* part) {
  return "block" + std::to_string(l) + "." + part;
}

// The functional the trainer minimizes: (1/T) sum |q1_i - q2s_i|^2 on the
// grid. At the identity warp it matches the tape cost exactly, which is what
// makes the best-so-far contract structural.
double grid_cost(const Srvf& q1, const Srvf& q2s) {
  double s = 0.0;
  for (int i = 0; i < q1.grid_size(); ++i)
    s += (q1.values[i] - q2s.values[i]).squaredNorm();
  return s / q1.grid_size();
}

// Transformed q2 under the current gamma: (q2 o gamma) sqrt(gamma'), all
// differentiable in gamma.
NodeId warp_action(Tape& tape, NodeId q2c, NodeId gamma, int T) {
  const NodeId pos = tape.slice(gamma, 0, T);
  const NodeId sq = tape.sqrt_elem(tape.grid_derivative(gamma));
  const double x_max = static_cast<double>(T - 1) / T;
  return tape.rowmul(tape.linear_interp(q2c, pos, x_max), sq);
}

}  // namespace

ResNetTW ResNetTW::build(const ResNetConfig& cfg) {
  if (cfg.blocks < 1 || cfg.channels < 1 || cfg.grid < 2 || cfg.kernel % 2 != 1)
    throw Error("bad ResNetConfig");
  ResNetTW model;
  model.cfg_ = cfg;
  std::mt19937_64 rng(cfg.seed);
  const std::size_t C = cfg.channels, K = cfg.kernel;
  auto& t = model.params_.tensors;
  t["embed.K"] = nn::glorot_uniform({C, 7, K}, 7 * K, C * K, rng);
  t["embed.b"] = Tensor::zeros({C});
  for (int l = 0; l < cfg.blocks; ++l) {
    t[block_name(l, "conv1.K")] = nn::glorot_uniform({C, C, K}, C * K, C * K, rng);
    t[block_name(l, "conv1.b")] = Tensor::zeros({C});
    t[block_name(l, "conv2.K")] = nn::glorot_uniform({C, C, K}, C * K, C * K, rng);
    t[block_name(l, "conv2.b")] = Tensor::zeros({C});
    // Zero-initialized heads: the fresh network emits f = 0 and therefore
    // the identity warp.
    t[block_name(l, "proj.K")] = Tensor::zeros({1, C, 1});
    t[block_name(l, "proj.b")] = Tensor::zeros({1});
  }
  return model;
}

nn::NodeId build_warp_graph(Tape& tape, const ResNetTW& model, const Srvf& q1,
                            const Srvf& q2_rotated) {
  const ResNetConfig& cfg = model.config();
  const int T = cfg.grid;
  if (q1.grid_size() != T || q2_rotated.grid_size() != T)
    throw GridMismatch("srvf grids do not match the model grid");
  const int L = cfg.blocks;
  const double dL = 1.0 / L;

  auto& params = const_cast<nn::ParamStore&>(model.params());
  const NodeId q1c = tape.constant(srvf_tensor(q1));
  const NodeId q2c = tape.constant(srvf_tensor(q2_rotated));

  Tensor id_warp = Tensor::zeros({static_cast<std::size_t>(T + 1)});
  for (int j = 0; j <= T; ++j) id_warp.v[j] = static_cast<double>(j) / T;
  NodeId gamma = tape.constant(std::move(id_warp));

  for (int l = 0; l < L; ++l) {
    NodeId f;  // velocity-field derivative on the uniform x grid, f >= -1/dL
    if (model.debug_f_override) {
      f = tape.constant(Tensor::vector(*model.debug_f_override));
    } else {
      const NodeId q2w = warp_action(tape, q2c, gamma, T);
      const NodeId gamma_ch = tape.reshape(tape.slice(gamma, 0, T),
                                           {1, static_cast<std::size_t>(T)});
      const NodeId feats = tape.concat({q1c, q2w, gamma_ch});
      const NodeId e = tape.conv1d(feats, tape.param(params, "embed.K"),
                                   tape.param(params, "embed.b"));
      NodeId h = tape.relu(tape.conv1d(e, tape.param(params, block_name(l, "conv1.K")),
                                       tape.param(params, block_name(l, "conv1.b"))));
      h = tape.relu(tape.conv1d(h, tape.param(params, block_name(l, "conv2.K")),
                                tape.param(params, block_name(l, "conv2.b"))));
      const NodeId r = tape.conv1d(h, tape.param(params, block_name(l, "proj.K")),
                                   tape.param(params, block_name(l, "proj.b")));
      // f = elu(r) / dL, so f >= -1/dL pointwise. r is floored at -20.7
      // (elu = -1 + 1e-9) so that saturated heads cannot collapse gamma(1)
      // to exactly zero and break the renormalization.
      const NodeId r_flat = tape.reshape(r, {static_cast<std::size_t>(T)});
      const std::size_t Ts = static_cast<std::size_t>(T);
      const NodeId r_floored = tape.add(
          tape.relu(tape.add(r_flat, tape.constant(Tensor({Ts}, std::vector<double>(Ts, 20.7))))),
          tape.constant(Tensor({Ts}, std::vector<double>(Ts, -20.7))));
      f = tape.scale(tape.elu(r_floored), static_cast<double>(L));
    }
    // Antiderivative F(x) = integral_0^x f, left-Riemann on the T+1 nodes.
    const NodeId antideriv = tape.concat(
        {tape.constant(Tensor::vector({0.0})), tape.scale(tape.cumsum(f), 1.0 / T)});
    // gamma <- gamma + dL * F(gamma)
    const NodeId increment = tape.linear_interp(antideriv, gamma, 1.0);
    gamma = tape.add(gamma, tape.scale(increment, dL));
  }

  // Renormalization, rebuilt from slopes: relu is the identity here in exact
  // arithmetic (the update rule keeps slopes nonnegative), but summing the
  // rectified slopes makes the output nondecreasing bit for bit even when
  // saturated blocks leave gamma(1) tiny and rounding noise would otherwise
  // be amplified by the final division. The boundary values are exactly 0
  // and 1.
  const NodeId slopes = tape.relu(tape.grid_derivative(gamma));
  const NodeId partial = tape.cumsum(slopes);
  const NodeId rebuilt =
      tape.concat({tape.constant(Tensor::vector({0.0})), partial});
  const NodeId total = tape.slice(rebuilt, T, 1);
  const NodeId inv = tape.broadcast_scalar(tape.recip(total),
                                           static_cast<std::size_t>(T + 1));
  return tape.pointwise_mul(rebuilt, inv);
}

Warp forward_warp(const ResNetTW& model, const Srvf& q1, const Srvf& q2_rotated) {
  Tape tape;
  const NodeId gamma = build_warp_graph(tape, model, q1, q2_rotated);
  const Tensor& values = tape.value(gamma);
  if (!values.finite()) throw NonFinite("forward_warp produced non-finite values");
  Warp w;
  w.values = values.v;
  // Pin floating-point dust so the Warp invariants hold exactly.
  w.values.front() = 0.0;
  w.values.back() = 1.0;
  for (std::size_t i = 1; i < w.values.size(); ++i)
    w.values[i] = std::max(w.values[i], w.values[i - 1]);
  for (double& v : w.values) v = std::clamp(v, 0.0, 1.0);
  return w;
}

double warp_roughness(const Warp& gamma) {
  double r = 0.0;
  for (std::size_t i = 1; i + 1 < gamma.values.size(); ++i) {
    const double second =
        gamma.values[i + 1] - 2.0 * gamma.values[i] + gamma.values[i - 1];
    r += second * second;
  }
  return r;
}

FitReport fit_pair(ResNetTW& model, const Srvf& q1, const Srvf& q2,
                   const FitOptions& opts) {
  const int T = model.config().grid;
  if (std::abs(srvf_norm(q1) - 1.0) > kUnitNormTol ||
      std::abs(srvf_norm(q2) - 1.0) > kUnitNormTol)
    throw NotUnitNorm("fit_pair requires unit-norm inputs");

  Rotation O = optimal_rotation(q1, q2);
  FitReport report;
  report.identity_cost = grid_cost(q1, apply_rotation(q2, O));
  report.final_cost = std::numeric_limits<double>::infinity();

  nn::AdamState adam;
  Srvf q2_rot = apply_rotation(q2, O);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    if (epoch > 0 && opts.rotation_every > 0 && epoch % opts.rotation_every == 0) {
      const Warp current = forward_warp(model, q1, q2_rot);
      O = optimal_rotation(q1, normalize_preshape(apply_warp(q2, current)));
      q2_rot = apply_rotation(q2, O);
    }

    Tape tape;
    const NodeId gamma = build_warp_graph(tape, model, q1, q2_rot);
    const NodeId q2w = warp_action(tape, tape.constant(srvf_tensor(q2_rot)), gamma, T);
    const NodeId cost_node =
        tape.scale(tape.l2_loss(tape.constant(srvf_tensor(q1)), q2w),
                   1.0 / T);
    const double cost = tape.value(cost_node).v[0];
    if (!std::isfinite(cost)) throw NonFinite("fit_pair cost became non-finite");
    report.cost_history.push_back(cost);

    if (cost < report.final_cost) {
      report.final_cost = cost;
      report.warp = forward_warp(model, q1, q2_rot);
      report.rotation = O;
    }
    if (opts.target_cost_ratio > 0.0 &&
        cost < opts.target_cost_ratio * report.identity_cost)
      break;

    tape.backward(cost_node);
    nn::adam_step(model.params(), tape.param_grads(), adam, opts.lr);
  }

  const AlignmentQuadrature eval =
      evaluate_alignment(q1, q2, report.warp, report.rotation);
  report.theta = eval.theta();
  report.roughness = warp_roughness(report.warp);
  return report;
}

MethodComparison compare_with_dp(const ResNetConfig& cfg, const Srvf& q1,
                                 const Srvf& q2, const FitOptions& fit_opts,
                                 const RegistrationOptions& reg_opts) {
  MethodComparison cmp;
  ResNetTW model = ResNetTW::build(cfg);
  cmp.resnet = fit_pair(model, q1, q2, fit_opts);
  const RegistrationResult reg = register_pair(q1, q2, reg_opts);
  cmp.dp_cost = reg.cost;
  cmp.dp_theta = reg.theta;
  cmp.dp_roughness = warp_roughness(reg.warp);
  return cmp;
}

}  // namespace protshape
