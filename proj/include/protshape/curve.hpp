// Discretized open curves in R^3 and their square-root velocity functions.
//
// Conventions used throughout the library:
//   - a Curve with n points is sampled at t_i = i/(n-1), i = 0..n-1;
//   - its SRVF lives on the uniform left-endpoint grid t_i = i/T with
//     T = n-1 samples, and integrals are left-Riemann sums with weight 1/T;
//   - a Warp is sampled at the T+1 nodes j/T so that it can act on an SRVF
//     of grid size T.
// With these choices to_srvf and from_srvf invert each other up to
// translation, exactly in floating point.

#pragma once

#include <Eigen/Core>
#include <vector>

#include "protshape/errors.hpp"

namespace protshape {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Velocities below this magnitude (per unit parameter) are treated as zero,
// producing q = 0 on the interval.
inline constexpr double kVelocityEps = 1e-10;

// Tolerance for "is unit norm" preconditions.
inline constexpr double kUnitNormTol = 1e-6;

struct Curve {
  std::vector<Vec3> points;

  int size() const { return static_cast<int>(points.size()); }
  bool finite() const;
};

// q(t) on the grid t_i = i/T, i = 0..T-1.
struct Srvf {
  std::vector<Vec3> values;

  int grid_size() const { return static_cast<int>(values.size()); }
};

// Orientation-preserving reparameterization of [0,1], gamma(0)=0, gamma(1)=1,
// nondecreasing, sampled at the T+1 nodes j/T.
struct Warp {
  std::vector<double> values;

  int grid_size() const { return static_cast<int>(values.size()) - 1; }
  static Warp identity(int grid_size);
  // Throws InvalidWarp unless boundaries are exact (1e-12) and values are
  // nondecreasing and inside [0,1].
  void validate() const;
};

struct Rotation {
  Mat3 m = Mat3::Identity();

  // Throws InvalidRotation unless O^T O = I and det O = +1 within 1e-9.
  static Rotation from_matrix(const Mat3& m);
  static Rotation identity() { return Rotation{}; }
};

// SRVF of a curve (unnormalized). Velocities are forward differences divided
// by the grid step 1/(n-1). Throws DegenerateCurve if every velocity is below
// kVelocityEps.
Srvf to_srvf(const Curve& curve);

// Inverse transform: origin plus the cumulative left-Riemann integral of
// q|q|. Output has grid_size()+1 points.
Curve from_srvf(const Srvf& q, const Vec3& origin = Vec3::Zero());

// Discrete L2 norm, sqrt((1/T) sum |q_i|^2).
double srvf_norm(const Srvf& q);

// Scales q to unit discrete L2 norm. Throws ZeroNorm.
Srvf normalize_preshape(const Srvf& q);

// Linear interpolation of q at parameter t in [0,1]; nodes at i/T, clamped
// to the last node beyond (T-1)/T. The single interpolation convention used
// by apply_warp, the DP edge costs and the differentiable warp action.
Vec3 interp_srvf(const Srvf& q, double t);

// Group action (q o gamma) sqrt(gamma'). gamma' by forward differences on
// the left-endpoint grid, exact for piecewise-linear warps whose breakpoints
// sit on grid nodes.
Srvf apply_warp(const Srvf& q, const Warp& gamma);

// Group action O q, applied pointwise.
Srvf apply_rotation(const Srvf& q, const Rotation& rot);

// Discrete L2 inner product (1/T) sum <q1_i, q2_i>. Throws GridMismatch.
double inner(const Srvf& q1, const Srvf& q2);

// Great-circle distance arccos(<q1,q2>) on the preshape sphere. Both inputs
// must be unit norm (NotUnitNorm). Bitwise-identical inputs give exactly 0.
double preshape_distance(const Srvf& q1, const Srvf& q2);

bool bitwise_equal(const Srvf& q1, const Srvf& q2);

}  // namespace protshape
