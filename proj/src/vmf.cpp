#include "protshape/vmf.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace protshape::vmf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// Ascending series sum_k (x/2)^{v+2k} / (k! Gamma(v+k+1)), accumulated in
// log space. All terms are positive, so there is no cancellation; the series
// converges for every x and is merely slow when x >> v.
double log_bessel_series(double v, double x) {
  const double log_half_x = std::log(x / 2.0);
  double log_sum = kNegInf;
  for (int k = 0; k < 20000; ++k) {
    const double log_term =
        (v + 2.0 * k) * log_half_x - std::lgamma(k + 1.0) - std::lgamma(v + k + 1.0);
    log_sum = log_add_exp(log_sum, log_term);
    // Terms decrease once (k+1)(v+k+1) > x^2/4; stop when negligible.
    if ((k + 1.0) * (v + k + 1.0) > x * x / 4.0 && log_term < log_sum - 40.0)
      break;
  }
  return log_sum;
}

// Hankel expansion I_v(x) ~ e^x / sqrt(2 pi x) sum_k (-1)^k a_k(v) / x^k.
// Asymptotic: truncated at the smallest term.
double log_bessel_hankel(double v, double x) {
  const double mu = 4.0 * v * v;
  double term = 1.0, sum = 1.0;
  double prev_abs = std::numeric_limits<double>::max();
  for (int k = 1; k <= 60; ++k) {
    term *= -(mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * x);
    if (std::abs(term) >= prev_abs) break;  // divergence onset
    prev_abs = std::abs(term);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
}

}  // namespace

double log_bessel_i(double v, double x) {
  if (v < 0.0 || x < 0.0) throw Error("log_bessel_i requires v >= 0, x >= 0");
  if (x == 0.0) return v == 0.0 ? 0.0 : kNegInf;
  const bool hankel_converges = (4.0 * v * v + 1.0) / (8.0 * x) < 0.5;
  if (x <= std::max(30.0, 2.0 * v) || !hankel_converges)
    return log_bessel_series(v, x);
  return log_bessel_hankel(v, x);
}

double log_surface_area(int m) {
  if (m < 2) throw Error("sphere dimension m must be >= 2");
  return std::log(2.0) + (m / 2.0) * std::log(std::numbers::pi) -
         std::lgamma(m / 2.0);
}

double log_normalizer(int m, double kappa) {
  if (m < 2) throw Error("sphere dimension m must be >= 2");
  if (kappa < 0.0) throw Error("kappa must be nonnegative");
  if (kappa == 0.0) return -log_surface_area(m);
  const double v = m / 2.0 - 1.0;
  return v * std::log(kappa) - (m / 2.0) * std::log(2.0 * std::numbers::pi) -
         log_bessel_i(v, kappa);
}

void VmfParams::validate() const {
  if (dim() < 2) throw Error("vMF requires m >= 2");
  if (kappa < 0.0) throw Error("kappa must be nonnegative");
  if (std::abs(mu.norm() - 1.0) > 1e-9) throw NotUnit("mu must be a unit vector");
}

double log_density(const Eigen::VectorXd& z, const VmfParams& p) {
  p.validate();
  if (z.size() != p.mu.size()) throw Error("dimension mismatch");
  if (std::abs(z.norm() - 1.0) > 1e-6) throw NotUnit("z must be a unit vector");
  return p.kappa * p.mu.dot(z) + log_normalizer(p.dim(), p.kappa);
}

double sample_w(int m, double kappa, std::mt19937_64& rng) {
  if (m < 2) throw Error("sphere dimension m must be >= 2");
  if (kappa < 0.0) throw Error("kappa must be nonnegative");
  const double a = (m - 1.0) / 2.0;
  std::gamma_distribution<double> gamma_a(a, 1.0);
  auto beta_aa = [&]() {
    const double g1 = gamma_a(rng);
    const double g2 = gamma_a(rng);
    return g1 / (g1 + g2);
  };
  if (kappa < 1e-12) return 2.0 * beta_aa() - 1.0;

  // Wood (1994) envelope constants, in cancellation-free form: the textbook
  // b = (-2k + sqrt(4k^2 + (m-1)^2))/(m-1) loses all precision for large
  // kappa, and 1 - x0 w = 2b / ((1+b)(1-(1-b)z)) exactly.
  const double b =
      (m - 1.0) / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + (m - 1.0) * (m - 1.0)));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double log_1mx02 = std::log(4.0 * b) - 2.0 * std::log1p(b);  // log(1-x0^2)
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (long attempt = 0; attempt < 1000000; ++attempt) {
    const double z = beta_aa();
    const double w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double log_1mx0w =
        std::log(2.0 * b) - std::log1p(b) - std::log1p(-(1.0 - b) * z);
    const double u = unif(rng);
    if (kappa * (w - x0) + (m - 1.0) * (log_1mx0w - log_1mx02) >= std::log(u))
      return w;
  }
  throw NonConvergence("vMF rejection sampler exceeded 1e6 attempts");
}

Eigen::VectorXd sample_tangent(const Eigen::VectorXd& mu, std::mt19937_64& rng) {
  if (std::abs(mu.norm() - 1.0) > 1e-9) throw NotUnit("mu must be a unit vector");
  std::normal_distribution<double> gauss;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::VectorXd v(mu.size());
    for (int i = 0; i < v.size(); ++i) v[i] = gauss(rng);
    v -= mu.dot(v) * mu;
    const double n = v.norm();
    if (n > 1e-8) return v / n;
  }
  throw NonConvergence("tangent sampling kept drawing parallel vectors");
}

Eigen::VectorXd sample(const VmfParams& p, std::mt19937_64& rng) {
  p.validate();
  const double w = sample_w(p.dim(), p.kappa, rng);
  const Eigen::VectorXd v = sample_tangent(p.mu, rng);
  return w * p.mu + std::sqrt(std::max(0.0, 1.0 - w * w)) * v;
}

Eigen::VectorXd sample_uniform(int m, std::mt19937_64& rng) {
  if (m < 2) throw Error("sphere dimension m must be >= 2");
  std::normal_distribution<double> gauss;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::VectorXd z(m);
    for (int i = 0; i < m; ++i) z[i] = gauss(rng);
    const double n = z.norm();
    if (n > 1e-8) return z / n;
  }
  throw NonConvergence("uniform sphere sampling kept drawing zero vectors");
}

double mean_resultant_length(int m, double kappa) {
  if (m < 2) throw Error("sphere dimension m must be >= 2");
  if (kappa < 0.0) throw Error("kappa must be nonnegative");
  if (kappa == 0.0) return 0.0;
  return std::exp(log_bessel_i(m / 2.0, kappa) - log_bessel_i(m / 2.0 - 1.0, kappa));
}

double kl_to_uniform(int m, double kappa) {
  if (kappa == 0.0) return 0.0;
  return kappa * mean_resultant_length(m, kappa) + log_normalizer(m, kappa) +
         log_surface_area(m);
}

}  // namespace protshape::vmf
