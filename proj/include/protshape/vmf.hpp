// Von Mises-Fisher distribution on S^{m-1}: log-space Bessel normalizer,
// Wood rejection sampling of the change magnitude w, tangent sampling, the
// reparameterized sample z = w mu + v sqrt(1 - w^2), and the fixed-kappa KL
// term against the uniform prior.

#pragma once

#include <Eigen/Core>
#include <random>

#include "protshape/errors.hpp"

namespace protshape::vmf {

struct VmfParams {
  Eigen::VectorXd mu;  // unit vector in R^m
  double kappa = 0.0;

  int dim() const { return static_cast<int>(mu.size()); }
  // Throws NotUnit / Error unless |mu| = 1 within 1e-9, kappa >= 0, m >= 2.
  void validate() const;
};

// log I_v(x), v >= 0, x >= 0. Ascending power series (log-sum-exp, all terms
// positive) for small and moderate x, Hankel asymptotic expansion for large
// x; the series is also the fallback whenever the expansion's leading ratio
// is too large to converge. x = 0 gives 0 for v = 0 and -inf for v > 0.
double log_bessel_i(double v, double x);

// log of the surface area of S^{m-1}.
double log_surface_area(int m);

// log C_m(kappa); the kappa = 0 limit equals -log_surface_area(m).
double log_normalizer(int m, double kappa);

// kappa mu^T z + log C_m(kappa). z must be unit within 1e-6 (NotUnit).
double log_density(const Eigen::VectorXd& z, const VmfParams& p);

// Magnitude w in [-1, 1] with density proportional to
// exp(kappa w)(1-w^2)^{(m-3)/2}, via Wood's (1994) envelope rejection;
// kappa = 0 short-circuits to the Beta-transformed uniform marginal.
double sample_w(int m, double kappa, std::mt19937_64& rng);

// Uniform unit tangent at mu: Gaussian draw projected orthogonal to mu and
// normalized.
Eigen::VectorXd sample_tangent(const Eigen::VectorXd& mu, std::mt19937_64& rng);

// z = w mu + v sqrt(1 - w^2).
Eigen::VectorXd sample(const VmfParams& p, std::mt19937_64& rng);

// Uniform draw on S^{m-1} (the kappa = 0 prior).
Eigen::VectorXd sample_uniform(int m, std::mt19937_64& rng);

// A_m(kappa) = I_{m/2}(kappa) / I_{m/2-1}(kappa) = E[mu^T z].
double mean_resultant_length(int m, double kappa);

// KL(vMF(mu, kappa) || Uniform(S^{m-1})) = kappa A_m(kappa) + log C_m(kappa)
// + log S_{m-1}; independent of mu, zero at kappa = 0.
double kl_to_uniform(int m, double kappa);

}  // namespace protshape::vmf
