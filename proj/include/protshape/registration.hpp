// Joint rotation/reparameterization alignment of SRVFs: SVD for the rotation
// subproblem, exact dynamic programming over monotone lattice paths for the
// warp subproblem, and great-circle geodesics on the preshape sphere.

#pragma once

#include <utility>
#include <vector>

#include "protshape/curve.hpp"

namespace protshape {

// Monotone lattice for the DP warp search. Steps must have both components
// >= 1 and be pairwise non-proportional (gcd-distinct directions).
struct DpGrid {
  int grid_size = 50;
  std::vector<std::pair<int, int>> steps;

  // Default lattice: all coprime (di, dj) with 1 <= di, dj <= 3, bounding
  // the warp slope to [1/3, 3].
  static DpGrid standard(int grid_size = 50);
  void validate() const;
};

struct RotationEstimate {
  Rotation rotation;
  // False when the cross-covariance has rank < 2 and the maximizer is not
  // unique; the returned rotation is still a maximizer.
  bool unique = true;
};

// argmin over SO(3) of |q1 - O q2|^2 via SVD with the Kabsch determinant
// correction.
RotationEstimate optimal_rotation_full(const Srvf& q1, const Srvf& q2);
Rotation optimal_rotation(const Srvf& q1, const Srvf& q2);

struct DpResult {
  Warp warp;
  double cost;
};

// Globally optimal monotone lattice path for
//   min_gamma |q1 - sqrt(gamma') q2(gamma)|^2,
// with ties broken toward the path closest to the identity. The returned
// warp is the path resampled onto the T+1 nodes of the SRVF grid.
DpResult dp_warp(const Srvf& q1, const Srvf& q2, const DpGrid& grid);

// Identical edge-cost and tie-break rules evaluated by exhaustive path
// enumeration; exponential, only usable for small grids. Used as the DP
// oracle in tests.
DpResult dp_warp_brute_force(const Srvf& q1, const Srvf& q2, const DpGrid& grid);

// Quadrature of the alignment functional |q1 - sqrt(gamma') O q2(gamma)|^2
// for a piecewise-linear warp, using the exact per-cell slope (the same
// integrand as the DP edge costs). Re-applying a kinky warp on the grid
// smears sqrt(gamma') across breakpoints and overstates distances.
struct AlignmentQuadrature {
  double cost = 0.0;   // integral of the squared residual
  double inner = 0.0;  // integral <q1, sqrt(m) O q2(gamma)>
  double norm1 = 0.0;  // integral |q1|^2
  double norm2 = 0.0;  // integral m |q2(gamma)|^2

  double theta() const;  // arccos of the normalized inner product
};

AlignmentQuadrature evaluate_alignment(const Srvf& q1, const Srvf& q2,
                                       const Warp& gamma, const Rotation& O);

struct RegistrationOptions {
  DpGrid grid = DpGrid::standard();
  int max_iters = 20;
  double tol = 1e-8;
};

struct RegistrationResult {
  Rotation rotation;
  Warp warp;
  // O (q2 o gamma) sqrt(gamma'), reprojected onto the preshape sphere before
  // the rotation (the discrete action drifts the norm by O(1/T)).
  Srvf q2_star;
  // Cost and theta are evaluated by a quadrature that uses the exact
  // per-cell warp slope (the same integrand as the DP edge costs); theta is
  // the arccos of the normalized inner product under that quadrature.
  double cost = 0.0;
  double theta = 0.0;
  int iterations = 0;
  std::vector<double> cost_history;  // accepted iterates, non-increasing
};

// Alternates the exact rotation and warp minimizers, rotation first, until
// the cost decrease drops below tol or max_iters is hit. An iterate is only
// accepted if it does not increase the cost, so the history is
// non-increasing and theta never exceeds the preshape distance.
RegistrationResult register_pair(const Srvf& q1, const Srvf& q2,
                                 const RegistrationOptions& opts = {});

// Great-circle path between two unit SRVFs, sampled at steps points.
// Returns the constant path when theta < 1e-6 and throws AntipodalPair when
// theta > pi - 1e-6.
std::vector<Srvf> geodesic_path(const Srvf& q1, const Srvf& q2_star, int steps);

// register_pair(...).theta.
double shape_distance(const Srvf& q1, const Srvf& q2,
                      const RegistrationOptions& opts = {});

}  // namespace protshape
