#include "protshape/curve.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>

namespace protshape {

bool Curve::finite() const {
  for (const Vec3& p : points)
    if (!p.allFinite()) return false;
  return true;
}

Warp Warp::identity(int grid_size) {
  Warp g;
  g.values.resize(grid_size + 1);
  for (int j = 0; j <= grid_size; ++j)
    g.values[j] = static_cast<double>(j) / grid_size;
  return g;
}

void Warp::validate() const {
  if (values.size() < 2) throw InvalidWarp("warp needs at least 2 nodes");
  if (std::abs(values.front()) > 1e-12 || std::abs(values.back() - 1.0) > 1e-12)
    throw InvalidWarp("warp boundaries must be 0 and 1");
  for (std::size_t j = 0; j + 1 < values.size(); ++j) {
    if (!(values[j + 1] >= values[j]))
      throw InvalidWarp("warp must be nondecreasing");
  }
  for (double v : values)
    if (v < -1e-12 || v > 1.0 + 1e-12) throw InvalidWarp("warp values must lie in [0,1]");
}

Rotation Rotation::from_matrix(const Mat3& m) {
  const Mat3 should_be_identity = m.transpose() * m;
  if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw InvalidRotation("matrix is not orthogonal");
  if (std::abs(m.determinant() - 1.0) > 1e-9)
    throw InvalidRotation("matrix determinant is not +1");
  return Rotation{m};
}

Srvf to_srvf(const Curve& curve) {
  const int n = curve.size();
  if (n < 2) throw DegenerateCurve("curve needs at least 2 points");
  const double scale = static_cast<double>(n - 1);  // 1 / grid step
  Srvf q;
  q.values.resize(n - 1);
  bool any_motion = false;
  for (int i = 0; i < n - 1; ++i) {
    const Vec3 vel = (curve.points[i + 1] - curve.points[i]) * scale;
    const double speed = vel.norm();
    if (speed < kVelocityEps) {
      q.values[i].setZero();
    } else {
      q.values[i] = vel / std::sqrt(speed);
      any_motion = true;
    }
  }
  if (!any_motion) throw DegenerateCurve("every velocity is below kVelocityEps");
  return q;
}

Curve from_srvf(const Srvf& q, const Vec3& origin) {
  const int T = q.grid_size();
  Curve c;
  c.points.resize(T + 1);
  c.points[0] = origin;
  const double h = 1.0 / T;
  for (int i = 0; i < T; ++i)
    c.points[i + 1] = c.points[i] + q.values[i] * q.values[i].norm() * h;
  return c;
}

double srvf_norm(const Srvf& q) {
  double s = 0.0;
  for (const Vec3& v : q.values) s += v.squaredNorm();
  return std::sqrt(s / q.grid_size());
}

Srvf normalize_preshape(const Srvf& q) {
  const double n = srvf_norm(q);
  if (n < 1e-300) throw ZeroNorm("srvf has zero norm");
  Srvf out = q;
  for (Vec3& v : out.values) v /= n;
  return out;
}

Vec3 interp_srvf(const Srvf& q, double t) {
  const int T = q.grid_size();
  const double u = t * T;
  const int j = static_cast<int>(std::floor(u));
  if (j < 0) return q.values.front();
  if (j >= T - 1) return q.values.back();
  const double frac = u - j;
  return q.values[j] * (1.0 - frac) + q.values[j + 1] * frac;
}

Srvf apply_warp(const Srvf& q, const Warp& gamma) {
  gamma.validate();
  const int T = q.grid_size();
  if (gamma.grid_size() != T)
    throw GridMismatch("warp grid does not match srvf grid");
  const std::vector<double>& g = gamma.values;
  Srvf out;
  out.values.resize(T);
  for (int i = 0; i < T; ++i) {
    // Forward difference: the exact cell derivative for piecewise-linear
    // warps with grid-aligned breakpoints, which is what dp_warp emits.
    const double deriv = std::max((g[i + 1] - g[i]) * T, 0.0);
    out.values[i] = interp_srvf(q, g[i]) * std::sqrt(deriv);
  }
  return out;
}

Srvf apply_rotation(const Srvf& q, const Rotation& rot) {
  Rotation::from_matrix(rot.m);  // revalidate; cheap
  Srvf out;
  out.values.resize(q.values.size());
  for (std::size_t i = 0; i < q.values.size(); ++i)
    out.values[i] = rot.m * q.values[i];
  return out;
}

double inner(const Srvf& q1, const Srvf& q2) {
  if (q1.grid_size() != q2.grid_size())
    throw GridMismatch("srvf grids differ");
  double s = 0.0;
  for (int i = 0; i < q1.grid_size(); ++i)
    s += q1.values[i].dot(q2.values[i]);
  return s / q1.grid_size();
}

bool bitwise_equal(const Srvf& q1, const Srvf& q2) {
  if (q1.grid_size() != q2.grid_size()) return false;
  for (int i = 0; i < q1.grid_size(); ++i)
    for (int d = 0; d < 3; ++d)
      if (q1.values[i][d] != q2.values[i][d]) return false;
  return true;
}

double preshape_distance(const Srvf& q1, const Srvf& q2) {
  if (std::abs(srvf_norm(q1) - 1.0) > kUnitNormTol ||
      std::abs(srvf_norm(q2) - 1.0) > kUnitNormTol)
    throw NotUnitNorm("preshape_distance requires unit-norm inputs");
  if (bitwise_equal(q1, q2)) return 0.0;  // reflexivity, exactly
  const double c = std::clamp(inner(q1, q2), -1.0, 1.0);
  return std::acos(c);
}

}  // namespace protshape
