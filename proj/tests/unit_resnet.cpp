#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "protshape/resnet_warp.hpp"
#include "support/synthetic.hpp"

using namespace protshape;

namespace {

ResNetConfig small_config(int T = 40, std::uint64_t seed = 1) {
  ResNetConfig cfg;
  cfg.blocks = 4;
  cfg.channels = 8;
  cfg.kernel = 5;
  cfg.grid = T;
  cfg.seed = seed;
  return cfg;
}

void randomize_params(nn::ParamStore& params, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> gauss(0.0, scale);
  for (auto& [name, tensor] : params.tensors)
    for (double& v : tensor.v) v = gauss(rng);
}

double min_forward_difference(const std::vector<double>& gamma) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < gamma.size(); ++i)
    m = std::min(m, gamma[i + 1] - gamma[i]);
  return m;
}

}  // namespace

TEST_CASE("fresh model produces the exact identity warp") {
  const ResNetConfig cfg = small_config();
  ResNetTW model = ResNetTW::build(cfg);
  std::mt19937_64 rng(2);
  const Srvf q1 = testsupport::random_unit_srvf(cfg.grid, rng);
  const Srvf q2 = testsupport::random_unit_srvf(cfg.grid, rng);
  const Warp w = forward_warp(model, q1, q2);
  for (int j = 0; j <= cfg.grid; ++j)
    CHECK(std::abs(w.values[j] - static_cast<double>(j) / cfg.grid) < 1e-12);
}

TEST_CASE("same seed gives identical parameters") {
  const ResNetTW a = ResNetTW::build(small_config(40, 7));
  const ResNetTW b = ResNetTW::build(small_config(40, 7));
  for (const auto& [name, t] : a.params().tensors)
    CHECK(t.v == b.params().at(name).v);
}

TEST_CASE("random parameterizations always yield valid monotone warps") {
  std::mt19937_64 rng(3);
  for (int L : {1, 8}) {
    ResNetConfig cfg = small_config(36, 11);
    cfg.blocks = L;
    ResNetTW model = ResNetTW::build(cfg);
    const Srvf q1 = testsupport::random_unit_srvf(cfg.grid, rng);
    const Srvf q2 = testsupport::random_unit_srvf(cfg.grid, rng);
    for (int trial = 0; trial < 50; ++trial) {
      randomize_params(model.params(), rng, trial % 5 == 0 ? 1.0 : 0.4);
      nn::Tape tape;
      const nn::NodeId gamma = build_warp_graph(tape, model, q1, q2);
      const auto& raw = tape.value(gamma).v;
      CHECK(std::abs(raw.front()) <= 1e-12);
      CHECK(std::abs(raw.back() - 1.0) <= 1e-12);
      CHECK(min_forward_difference(raw) >= -1e-12);
      CHECK_NOTHROW(forward_warp(model, q1, q2).validate());
    }
  }
}

TEST_CASE("non-finite forward pass raises NonFinite") {
  ResNetConfig cfg = small_config(20, 1);
  cfg.blocks = 1;
  ResNetTW model = ResNetTW::build(cfg);
  model.debug_f_override =
      std::vector<double>(cfg.grid, std::numeric_limits<double>::quiet_NaN());
  std::mt19937_64 rng(4);
  const Srvf q = testsupport::random_unit_srvf(cfg.grid, rng);
  CHECK_THROWS_AS(forward_warp(model, q, q), NonFinite);
}

TEST_CASE("constant f at the order-preserving bound flattens the warp") {
  ResNetConfig cfg = small_config(40, 5);
  cfg.blocks = 1;  // dL = 1, bound is f >= -1
  ResNetTW model = ResNetTW::build(cfg);
  std::vector<double> f(cfg.grid, 0.0);
  for (int j = cfg.grid / 4; j < cfg.grid / 2; ++j) f[j] = -1.0;
  model.debug_f_override = f;

  std::mt19937_64 rng(6);
  const Srvf q1 = testsupport::random_unit_srvf(cfg.grid, rng);
  const Srvf q2 = testsupport::random_unit_srvf(cfg.grid, rng);
  const Warp w = forward_warp(model, q1, q2);
  CHECK_NOTHROW(w.validate());
  // Slope is exactly zero across the active interval, nonnegative elsewhere.
  for (int j = cfg.grid / 4; j < cfg.grid / 2; ++j)
    CHECK(std::abs(w.values[j + 1] - w.values[j]) < 1e-15);
  CHECK(min_forward_difference(w.values) >= 0.0);
}

TEST_CASE("analytic gradient of the alignment cost matches finite differences") {
  ResNetConfig cfg;
  cfg.blocks = 2;
  cfg.channels = 4;
  cfg.kernel = 5;
  cfg.grid = 32;
  cfg.seed = 9;
  ResNetTW model = ResNetTW::build(cfg);
  std::mt19937_64 rng(10);
  randomize_params(model.params(), rng, 0.4);

  const Srvf q1 = normalize_preshape(to_srvf(testsupport::random_smooth_curve(cfg.grid + 1, rng)));
  const Srvf q2 = normalize_preshape(to_srvf(testsupport::random_smooth_curve(cfg.grid + 1, rng)));

  auto build_cost = [&](nn::Tape& tape) {
    const nn::NodeId gamma = build_warp_graph(tape, model, q1, q2);
    nn::Tensor q2t = nn::Tensor::zeros({3, static_cast<std::size_t>(cfg.grid)});
    nn::Tensor q1t = q2t;
    for (int d = 0; d < 3; ++d)
      for (int i = 0; i < cfg.grid; ++i) {
        q2t.v[d * cfg.grid + i] = q2.values[i][d];
        q1t.v[d * cfg.grid + i] = q1.values[i][d];
      }
    const nn::NodeId pos = tape.slice(gamma, 0, cfg.grid);
    const nn::NodeId sq = tape.sqrt_elem(tape.grid_derivative(gamma));
    const nn::NodeId q2w = tape.rowmul(
        tape.linear_interp(tape.constant(q2t), pos,
                           static_cast<double>(cfg.grid - 1) / cfg.grid),
        sq);
    return tape.scale(tape.l2_loss(tape.constant(q1t), q2w), 1.0 / cfg.grid);
  };

  nn::Tape tape;
  const nn::NodeId loss = build_cost(tape);
  tape.backward(loss);
  const nn::GradMap grads = tape.param_grads();

  const double h = 1e-5;
  double max_rel = 0.0;
  for (auto& [name, tensor] : model.params().tensors) {
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor.v[i];
      tensor.v[i] = saved + h;
      nn::Tape tp;
      const double up = tp.value(build_cost(tp)).v[0];
      tensor.v[i] = saved - h;
      nn::Tape tm;
      const double dn = tm.value(build_cost(tm)).v[0];
      tensor.v[i] = saved;
      const double fd = (up - dn) / (2.0 * h);
      const double analytic = grads.at(name).v[i];
      const double rel =
          std::abs(analytic - fd) / std::max(std::abs(analytic) + std::abs(fd), 1e-6);
      max_rel = std::max(max_rel, rel);
    }
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("fit_pair on identical curves stays at zero cost and identity warp") {
  ResNetConfig cfg = small_config(40, 12);
  ResNetTW model = ResNetTW::build(cfg);
  std::mt19937_64 rng(13);
  const Srvf q = normalize_preshape(to_srvf(testsupport::random_smooth_curve(cfg.grid + 1, rng)));
  FitOptions opts;
  opts.epochs = 30;
  const FitReport report = fit_pair(model, q, q, opts);
  CHECK(report.final_cost <= 1e-9);
  for (int j = 0; j <= cfg.grid; ++j)
    CHECK(std::abs(report.warp.values[j] - static_cast<double>(j) / cfg.grid) < 1e-6);
}

TEST_CASE("fit_pair recovers a synthetic warp on a small instance") {
  ResNetConfig cfg;
  cfg.blocks = 4;
  cfg.channels = 16;
  cfg.kernel = 5;
  cfg.grid = 48;
  cfg.seed = 21;
  ResNetTW model = ResNetTW::build(cfg);
  std::mt19937_64 rng(22);
  const Srvf q1 = normalize_preshape(to_srvf(testsupport::random_smooth_curve(cfg.grid + 1, rng)));
  const auto sw = testsupport::SmoothWarp::random(rng, 2, 0.45);
  const Rotation R = testsupport::random_rotation(rng);
  const Srvf q2 = normalize_preshape(apply_rotation(apply_warp(q1, sw.sample(cfg.grid)), R));

  FitOptions opts;
  opts.epochs = 800;
  opts.lr = 0.01;
  opts.rotation_every = 25;
  opts.target_cost_ratio = 0.15;
  const FitReport report = fit_pair(model, q1, q2, opts);
  CHECK(report.final_cost < 0.2 * report.identity_cost);
  CHECK(report.final_cost <= report.cost_history.front());
  CHECK_NOTHROW(report.warp.validate());
}

TEST_CASE("compare_with_dp on identical curves reports near-zero for both") {
  ResNetConfig cfg = small_config(40, 31);
  std::mt19937_64 rng(32);
  const Srvf q = normalize_preshape(to_srvf(testsupport::random_smooth_curve(cfg.grid + 1, rng)));
  FitOptions opts;
  opts.epochs = 20;
  RegistrationOptions reg;
  reg.grid = DpGrid::standard(20);
  const MethodComparison cmp = compare_with_dp(cfg, q, q, opts, reg);
  CHECK(cmp.resnet.final_cost <= 1e-9);
  CHECK(cmp.dp_cost <= 1e-9);
  CHECK(cmp.dp_theta <= 1e-6);
}
