#include "protshape/registration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace protshape {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_unit(const Srvf& q, const char* who) {
  if (std::abs(srvf_norm(q) - 1.0) > kUnitNormTol)
    throw NotUnitNorm(std::string(who) + " requires unit-norm inputs");
}

// Integral over one lattice edge of |q1(t) - sqrt(m) q2(j/N + m (t - a))|^2,
// sampled left-Riemann at a resolution matching the data grid. Both the DP
// and the brute-force oracle price edges with exactly this function.
double edge_cost(const Srvf& q1, const Srvf& q2, int N, int samples_per_cell,
                 int i, int j, int i2, int j2) {
  const double a = static_cast<double>(i) / N;
  const double b = static_cast<double>(i2) / N;
  const double m = static_cast<double>(j2 - j) / (i2 - i);
  const double sqrt_m = std::sqrt(m);
  const int K = (i2 - i) * samples_per_cell;
  const double h = (b - a) / K;
  const double g0 = static_cast<double>(j) / N;
  double sum = 0.0;
  for (int k = 0; k < K; ++k) {
    const double t = a + k * h;
    const Vec3 diff = interp_srvf(q1, t) - sqrt_m * interp_srvf(q2, g0 + m * (t - a));
    sum += diff.squaredNorm();
  }
  return sum * h;
}

// Integral of |gamma(t) - t| along one edge; the tie-break key. Closed form
// for a linear integrand.
double edge_deviation(int N, int i, int j, int i2, int j2) {
  const double len = static_cast<double>(i2 - i) / N;
  const double d0 = static_cast<double>(j - i) / N;
  const double d1 = static_cast<double>(j2 - i2) / N;
  if (d0 * d1 >= 0.0) return len * (std::abs(d0) + std::abs(d1)) / 2.0;
  return len * (d0 * d0 + d1 * d1) / (2.0 * (std::abs(d0) + std::abs(d1)));
}

int samples_per_cell_for(int T, int N) {
  return std::max(1, (T + N - 1) / N);
}

Warp path_to_warp(const std::vector<std::pair<int, int>>& nodes, int N, int T) {
  Warp g;
  g.values.resize(T + 1);
  std::size_t seg = 0;
  for (int k = 0; k <= T; ++k) {
    const double t = static_cast<double>(k) / T;
    while (seg + 2 < nodes.size() &&
           static_cast<double>(nodes[seg + 1].first) / N <= t)
      ++seg;
    const double x0 = static_cast<double>(nodes[seg].first) / N;
    const double x1 = static_cast<double>(nodes[seg + 1].first) / N;
    const double y0 = static_cast<double>(nodes[seg].second) / N;
    const double y1 = static_cast<double>(nodes[seg + 1].second) / N;
    g.values[k] = y0 + (y1 - y0) * (t - x0) / (x1 - x0);
  }
  g.values[0] = 0.0;
  g.values[T] = 1.0;
  return g;
}

constexpr int kEvalSamplesPerCell = 4;

// Cross covariance under the same quadrature, for the rotation subproblem.
Mat3 alignment_cross_covariance(const Srvf& q1, const Srvf& q2, const Warp& gamma) {
  const int T = q1.grid_size();
  const int S = kEvalSamplesPerCell;
  const double h = 1.0 / (T * S);
  Mat3 A = Mat3::Zero();
  for (int i = 0; i < T; ++i) {
    const double g0 = gamma.values[i];
    const double m = std::max((gamma.values[i + 1] - g0) * T, 0.0);
    const double sqrt_m = std::sqrt(m);
    for (int s = 0; s < S; ++s) {
      const double t = (i + static_cast<double>(s) / S) / T;
      const Vec3 a = interp_srvf(q1, t);
      const Vec3 b = sqrt_m * interp_srvf(q2, g0 + m * (t - static_cast<double>(i) / T));
      A += h * a * b.transpose();
    }
  }
  return A;
}

Rotation kabsch(const Mat3& A);

}  // namespace

double AlignmentQuadrature::theta() const {
  const double denom = std::sqrt(norm1 * norm2);
  if (denom < 1e-300) return 0.0;
  return std::acos(std::clamp(inner / denom, -1.0, 1.0));
}

AlignmentQuadrature evaluate_alignment(const Srvf& q1, const Srvf& q2,
                                       const Warp& gamma, const Rotation& O) {
  const int T = q1.grid_size();
  const int S = kEvalSamplesPerCell;
  const double h = 1.0 / (static_cast<double>(T) * S);
  AlignmentQuadrature out;
  for (int i = 0; i < T; ++i) {
    const double g0 = gamma.values[i];
    const double m = std::max((gamma.values[i + 1] - g0) * T, 0.0);
    const double sqrt_m = std::sqrt(m);
    for (int s = 0; s < S; ++s) {
      const double t = (i + static_cast<double>(s) / S) / T;
      const Vec3 a = interp_srvf(q1, t);
      const Vec3 b =
          sqrt_m * (O.m * interp_srvf(q2, g0 + m * (t - static_cast<double>(i) / T)));
      out.cost += h * (a - b).squaredNorm();
      out.inner += h * a.dot(b);
      out.norm1 += h * a.squaredNorm();
      out.norm2 += h * b.squaredNorm();
    }
  }
  return out;
}

namespace {

Rotation kabsch(const Mat3& A) {
  Eigen::JacobiSVD<Mat3> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  Mat3 D = Mat3::Identity();
  D(2, 2) = (U * V.transpose()).determinant() < 0 ? -1.0 : 1.0;
  Rotation r;
  r.m = U * D * V.transpose();
  return r;
}

// Warp action followed by reprojection onto the preshape sphere, then the
// rotation. The discrete action drifts the norm by O(1/T); without the
// projection that drift alone inflates arccos<q1,q2*> by sqrt(2 drift).
Srvf transform(const Srvf& q2, const Warp& g, const Rotation& O) {
  return apply_rotation(normalize_preshape(apply_warp(q2, g)), O);
}

double theta_of(const Srvf& q1, const Srvf& q2_star) {
  return std::acos(std::clamp(inner(q1, q2_star), -1.0, 1.0));
}

}  // namespace

DpGrid DpGrid::standard(int grid_size) {
  DpGrid g;
  g.grid_size = grid_size;
  // All coprime pairs up to 5. Slopes {1/5..5} with a fine ladder around 1;
  // the coarser classic {1..3} set leaves a ~0.07 rad registration floor on
  // smooth warps.
  for (int a = 1; a <= 5; ++a)
    for (int b = 1; b <= 5; ++b)
      if (std::gcd(a, b) == 1) g.steps.emplace_back(a, b);
  return g;
}

void DpGrid::validate() const {
  if (grid_size < 1) throw Error("DpGrid grid_size must be >= 1");
  if (steps.empty()) throw Error("DpGrid needs at least one step");
  for (const auto& [di, dj] : steps)
    if (di < 1 || dj < 1) throw Error("DpGrid steps must have di, dj >= 1");
  for (std::size_t a = 0; a < steps.size(); ++a)
    for (std::size_t b = a + 1; b < steps.size(); ++b)
      if (steps[a].first * steps[b].second == steps[b].first * steps[a].second)
        throw Error("DpGrid steps must be pairwise non-proportional");
}

RotationEstimate optimal_rotation_full(const Srvf& q1, const Srvf& q2) {
  if (q1.grid_size() != q2.grid_size())
    throw GridMismatch("optimal_rotation requires equal grids");
  Mat3 A = Mat3::Zero();
  for (int i = 0; i < q1.grid_size(); ++i)
    A += q1.values[i] * q2.values[i].transpose();
  A /= q1.grid_size();
  Eigen::JacobiSVD<Mat3> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  const double det_uv = (U * V.transpose()).determinant();
  Mat3 D = Mat3::Identity();
  D(2, 2) = det_uv < 0 ? -1.0 : 1.0;
  RotationEstimate est;
  est.rotation.m = U * D * V.transpose();
  const auto& sv = svd.singularValues();
  est.unique = sv(1) > 1e-12 * std::max(1.0, sv(0));
  return est;
}

Rotation optimal_rotation(const Srvf& q1, const Srvf& q2) {
  return optimal_rotation_full(q1, q2).rotation;
}

DpResult dp_warp(const Srvf& q1, const Srvf& q2, const DpGrid& grid) {
  grid.validate();
  check_unit(q1, "dp_warp");
  check_unit(q2, "dp_warp");
  if (q1.grid_size() != q2.grid_size())
    throw GridMismatch("dp_warp requires equal grids");
  const int N = grid.grid_size;
  const int T = q1.grid_size();
  const int spc = samples_per_cell_for(T, N);

  const int M = N + 1;
  std::vector<double> best(M * M, kInf);
  std::vector<double> dev(M * M, kInf);
  std::vector<int> parent(M * M, -1);  // encoded step index
  best[0] = 0.0;
  dev[0] = 0.0;
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j <= N; ++j) {
      const int at = i * M + j;
      if (best[at] == kInf) continue;
      for (std::size_t s = 0; s < grid.steps.size(); ++s) {
        const int i2 = i + grid.steps[s].first;
        const int j2 = j + grid.steps[s].second;
        if (i2 > N || j2 > N) continue;
        const double c = best[at] + edge_cost(q1, q2, N, spc, i, j, i2, j2);
        const double d = dev[at] + edge_deviation(N, i, j, i2, j2);
        const int to = i2 * M + j2;
        if (c < best[to] || (c == best[to] && d < dev[to])) {
          best[to] = c;
          dev[to] = d;
          parent[to] = static_cast<int>(s);
        }
      }
    }
  }
  if (best[N * M + N] == kInf)
    throw NoPath("allowed steps cannot reach the corner");

  std::vector<std::pair<int, int>> nodes;
  int i = N, j = N;
  while (!(i == 0 && j == 0)) {
    nodes.emplace_back(i, j);
    const int s = parent[i * M + j];
    i -= grid.steps[s].first;
    j -= grid.steps[s].second;
  }
  nodes.emplace_back(0, 0);
  std::reverse(nodes.begin(), nodes.end());

  DpResult r;
  r.cost = best[N * M + N];
  r.warp = path_to_warp(nodes, N, T);
  return r;
}

DpResult dp_warp_brute_force(const Srvf& q1, const Srvf& q2, const DpGrid& grid) {
  grid.validate();
  check_unit(q1, "dp_warp_brute_force");
  check_unit(q2, "dp_warp_brute_force");
  const int N = grid.grid_size;
  const int T = q1.grid_size();
  const int spc = samples_per_cell_for(T, N);

  std::vector<std::pair<int, int>> path{{0, 0}};
  std::vector<std::pair<int, int>> best_path;
  double best_cost = kInf;
  double best_dev = kInf;
  bool found = false;

  // Depth-first enumeration of every monotone path, summing edge costs left
  // to right exactly as the DP relaxation does.
  auto recurse = [&](auto&& self, int i, int j, double cost, double deviation) -> void {
    if (i == N && j == N) {
      if (cost < best_cost || (cost == best_cost && deviation < best_dev)) {
        best_cost = cost;
        best_dev = deviation;
        best_path = path;
        found = true;
      }
      return;
    }
    for (const auto& [di, dj] : grid.steps) {
      const int i2 = i + di, j2 = j + dj;
      if (i2 > N || j2 > N) continue;
      path.emplace_back(i2, j2);
      self(self, i2, j2, cost + edge_cost(q1, q2, N, spc, i, j, i2, j2),
           deviation + edge_deviation(N, i, j, i2, j2));
      path.pop_back();
    }
  };
  recurse(recurse, 0, 0, 0.0, 0.0);
  if (!found) throw NoPath("allowed steps cannot reach the corner");

  DpResult r;
  r.cost = best_cost;
  r.warp = path_to_warp(best_path, N, T);
  return r;
}

RegistrationResult register_pair(const Srvf& q1, const Srvf& q2,
                                 const RegistrationOptions& opts) {
  check_unit(q1, "register_pair");
  check_unit(q2, "register_pair");
  if (q1.grid_size() != q2.grid_size())
    throw GridMismatch("register_pair requires equal grids");
  const int T = q1.grid_size();

  if (bitwise_equal(q1, q2)) {  // reflexive shortcut: theta exactly 0
    RegistrationResult res;
    res.warp = Warp::identity(T);
    res.q2_star = q2;
    res.cost_history.assign(1, 0.0);
    return res;
  }

  const Warp identity = Warp::identity(T);
  const Rotation O_kabsch = kabsch(alignment_cross_covariance(q1, q2, identity));
  const double theta_identity =
      evaluate_alignment(q1, q2, identity, O_kabsch).theta();

  struct Chain {
    Rotation O;
    Warp gamma;
    double cost = 0.0;
    double theta = 0.0;
    int iters = 0;
    std::vector<double> history;
  };
  auto alternate = [&](Rotation O_init) {
    Chain c;
    c.O = O_init;
    c.gamma = identity;
    const AlignmentQuadrature e0 = evaluate_alignment(q1, q2, identity, O_init);
    c.cost = e0.cost;
    c.theta = e0.theta();
    c.history.push_back(c.cost);
    for (int it = 0; it < opts.max_iters; ++it) {
      const Srvf q2_rot = apply_rotation(q2, c.O);
      const DpResult dp = dp_warp(q1, q2_rot, opts.grid);
      const Rotation O_new = kabsch(alignment_cross_covariance(q1, q2, dp.warp));
      const AlignmentQuadrature e = evaluate_alignment(q1, q2, dp.warp, O_new);
      if (e.cost > c.cost) break;  // quadrature mismatch; keep previous iterate
      const double decrease = c.cost - e.cost;
      c.O = O_new;
      c.gamma = dp.warp;
      c.cost = e.cost;
      c.theta = e.theta();
      ++c.iters;
      c.history.push_back(c.cost);
      if (decrease < opts.tol) break;
    }
    return c;
  };

  // Rotation-first alternation from the preshape Kabsch start can stall in a
  // local optimum when the true rotation is near the identity; keep the
  // better of two deterministic starts.
  Chain best = alternate(O_kabsch);
  const Chain from_identity = alternate(Rotation::identity());
  if (from_identity.cost < best.cost) best = from_identity;

  if (best.theta > theta_identity) {
    best.O = O_kabsch;
    best.gamma = identity;
    best.cost = evaluate_alignment(q1, q2, identity, O_kabsch).cost;
    best.theta = theta_identity;
    best.iters = 0;
    best.history.assign(1, best.cost);
  }

  RegistrationResult res;
  res.rotation = best.O;
  res.warp = best.gamma;
  res.q2_star = transform(q2, best.gamma, best.O);
  res.cost = best.cost;
  res.theta = best.theta;
  res.iterations = best.iters;
  res.cost_history = std::move(best.history);
  return res;
}

std::vector<Srvf> geodesic_path(const Srvf& q1, const Srvf& q2_star, int steps) {
  check_unit(q1, "geodesic_path");
  check_unit(q2_star, "geodesic_path");
  if (q1.grid_size() != q2_star.grid_size())
    throw GridMismatch("geodesic_path requires equal grids");
  if (steps < 2) throw Error("geodesic_path requires steps >= 2");

  const double theta = theta_of(q1, q2_star);
  std::vector<Srvf> path;
  path.reserve(steps);
  if (theta < 1e-6) {
    for (int k = 0; k < steps; ++k) path.push_back(q1);
    return path;
  }
  if (theta > M_PI - 1e-6)
    throw AntipodalPair("geodesic between antipodal points is not unique");

  const double s = std::sin(theta);
  for (int k = 0; k < steps; ++k) {
    const double tau = static_cast<double>(k) / (steps - 1);
    const double w1 = std::sin((1.0 - tau) * theta) / s;
    const double w2 = std::sin(tau * theta) / s;
    Srvf step;
    step.values.resize(q1.grid_size());
    for (int i = 0; i < q1.grid_size(); ++i)
      step.values[i] = w1 * q1.values[i] + w2 * q2_star.values[i];
    path.push_back(std::move(step));
  }
  return path;
}

double shape_distance(const Srvf& q1, const Srvf& q2,
                      const RegistrationOptions& opts) {
  return register_pair(q1, q2, opts).theta;
}

}  // namespace protshape
