// Residual reparameterization network: each block predicts the derivative f
// of a velocity field on a uniform grid, f is bounded below by -1/dL through
// an ELU activation, the antiderivative is accumulated into the running warp
// with step dL, and the result is affinely pinned to gamma(0)=0, gamma(1)=1.
// Monotonicity holds for every parameter value by construction. The network
// is fitted per curve pair against the registration objective.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "protshape/curve.hpp"
#include "protshape/nn/optim.hpp"
#include "protshape/nn/tape.hpp"
#include "protshape/registration.hpp"

namespace protshape {

struct ResNetConfig {
  int blocks = 8;    // L; dL = 1/L
  int channels = 32; // feature width
  int kernel = 5;    // convolution support
  int grid = 100;    // T; must match the SRVF grids
  std::uint64_t seed = 0;
};

class ResNetTW {
 public:
  static ResNetTW build(const ResNetConfig& cfg);

  const ResNetConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Test hook: when set, every block's velocity derivative f is replaced by
  // this fixed grid function (bypassing the head). Used to probe the
  // order-preserving bound f >= -1/dL.
  std::optional<std::vector<double>> debug_f_override;

 private:
  ResNetConfig cfg_;
  nn::ParamStore params_;
};

// Differentiable graph of the warp given q1 and an already-rotated q2;
// returns the node holding gamma at the T+1 grid nodes (renormalized).
nn::NodeId build_warp_graph(nn::Tape& tape, const ResNetTW& model,
                            const Srvf& q1, const Srvf& q2_rotated);

// Runs the network; the returned warp satisfies all Warp invariants (fp dust
// on monotonicity is pinned, boundaries are exact). Throws NonFinite if the
// forward pass produced non-finite values.
Warp forward_warp(const ResNetTW& model, const Srvf& q1, const Srvf& q2_rotated);

struct FitOptions {
  int epochs = 1200;
  double lr = 0.01;
  int rotation_every = 25;
  // Early stop once cost < target_cost_ratio * identity cost (0 disables).
  double target_cost_ratio = 0.0;
};

struct FitReport {
  double final_cost = 0.0;           // best cost seen (never above epoch 0)
  double identity_cost = 0.0;        // cost at the identity warp, optimal rotation
  std::vector<double> cost_history;  // one entry per epoch
  Warp warp;                         // best-cost warp
  Rotation rotation;                 // rotation paired with it
  double theta = 0.0;                // alignment-quadrature angle of the best pair
  double roughness = 0.0;            // sum of squared second differences of gamma
};

FitReport fit_pair(ResNetTW& model, const Srvf& q1, const Srvf& q2,
                   const FitOptions& opts = {});

struct MethodComparison {
  FitReport resnet;
  double dp_cost = 0.0;
  double dp_theta = 0.0;
  double dp_roughness = 0.0;
};

// Fits a fresh network and runs the DP registration on the same pair.
MethodComparison compare_with_dp(const ResNetConfig& cfg, const Srvf& q1,
                                 const Srvf& q2, const FitOptions& fit_opts = {},
                                 const RegistrationOptions& reg_opts = {});

double warp_roughness(const Warp& gamma);

}  // namespace protshape
