#pragma once

#include <cstdint>
#include <functional>
#include <utility>

#include <Eigen/Core>

#include "fbfx/metric.hpp"
#include "fbfx/vec.hpp"

namespace fbfx {

/// Bounded linear operator with its adjoint and a certified upper bound on
/// the operator norm.
struct LinearMap {
  std::function<Vec(const Vec&)> apply;
  std::function<Vec(const Vec&)> adjoint;
  int in_dim = 0;
  int out_dim = 0;
  double norm_bound = 0.0;

  static LinearMap identity(int n);
  static LinearMap scaled_identity(int n, double s);
  static LinearMap from_matrix(Eigen::MatrixXd a);  // norm_bound from SVD
};

/// Single-valued monotone map with a Lipschitz constant.
struct LipschitzMap {
  std::function<Vec(const Vec&)> apply;
  double lipschitz = 0.0;

  bool is_zero() const { return !apply; }
  Vec operator()(const Vec& x) const;
  static LipschitzMap zero() { return {}; }
};

/// prox(gamma, x) = argmin_y f(y) + ||y - x||^2 / (2 gamma)
struct Proximable {
  std::function<Vec(double, const Vec&)> prox;
};

/// Resolvent of gamma * U * A at x, for scalar metrics U (the only kind the
/// solvers feed resolvents; richer kinds may be supplied by the caller).
struct ResolventOperator {
  std::function<Vec(double gamma, const Metric& U, const Vec& x)> resolve;

  bool is_identity_like() const { return !resolve; }
  Vec operator()(double gamma, const Metric& u, const Vec& x) const;
  static ResolventOperator identity() { return {}; }  // A = 0
};

Vec clamp(const Vec& x, double lo, double hi);
Vec soft_threshold(const Vec& t, double gamma);

Vec prox_box01(const Vec& x);
Vec prox_l1_conj(const Vec& p, double gamma, const Vec& b);
Vec prox_l1_translated(const Vec& y, double gamma, const Vec& b);
Vec grad_quadratic(const Vec& x, double lambda);
LipschitzMap quadratic_gradient_map(double lambda);

/// Per-pair radial projection onto {(p_i, q_i) : sqrt(p_i^2 + q_i^2) <= lambda}.
std::pair<Vec, Vec> project_pair_ball(const Vec& p, const Vec& q, double lambda);
/// Scaled variant (p,q) / max{1, sqrt((p/sigma)^2 + (q/sigma)^2) / lambda},
/// the closed form the deblurring experiment uses for its sigma-metric dual.
std::pair<Vec, Vec> project_pair_ball_scaled(const Vec& p, const Vec& q, double lambda,
                                             double sigma);

/// tau * prox(tau*gamma, x/tau): the scaled-argument realization of the
/// metric prox for U = tau*Id. Exact for tau = 1. For indicator functions
/// with tau != 1 this can leave the constraint set; solver-facing box
/// resolvents use resolvent_box01 instead, which projects exactly.
Vec prox_with_metric(const Proximable& f, double gamma, double tau, const Vec& x);

/// J_{gamma B^{-1}} for B the subdifferential of g, via the Moreau
/// decomposition: x - gamma * prox(1/gamma, x/gamma) applied to g.
Vec resolvent_of_inverse(const Proximable& g, double gamma, const Vec& x);

/// Deterministic estimate of ||L|| = sqrt(lambda_max(L^T L)). Random start
/// from the given seed, Rayleigh-quotient stagnation stop at 1e-12 relative.
double power_iteration_norm(const LinearMap& l, int iters, std::uint64_t seed);

// Solver-facing resolvent factories (scalar metrics).
ResolventOperator resolvent_from_prox(Proximable f);        // A = subdifferential of f
ResolventOperator resolvent_box01();                        // exact [0,1]^n projection
ResolventOperator resolvent_from_conj_prox(Proximable gc);  // A = (subdiff g)^{-1}, gc = prox of g*
ResolventOperator resolvent_from_prox_of_inverse(Proximable g);  // same, via Moreau from prox of g

}  // namespace fbfx
