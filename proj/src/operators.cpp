#include "fbfx/operators.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

namespace fbfx {

LinearMap LinearMap::identity(int n) {
  LinearMap m;
  m.apply = [](const Vec& x) { return x; };
  m.adjoint = m.apply;
  m.in_dim = m.out_dim = n;
  m.norm_bound = 1.0;
  return m;
}

LinearMap LinearMap::scaled_identity(int n, double s) {
  LinearMap m;
  m.apply = [s](const Vec& x) { return Vec(s * x); };
  m.adjoint = m.apply;
  m.in_dim = m.out_dim = n;
  m.norm_bound = std::abs(s);
  return m;
}

LinearMap LinearMap::from_matrix(Eigen::MatrixXd a) {
  LinearMap m;
  m.in_dim = static_cast<int>(a.cols());
  m.out_dim = static_cast<int>(a.rows());
  m.norm_bound = a.size() == 0 ? 0.0 : Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
  auto mat = std::make_shared<Eigen::MatrixXd>(std::move(a));
  m.apply = [mat](const Vec& x) { return Vec(*mat * x); };
  m.adjoint = [mat](const Vec& y) { return Vec(mat->transpose() * y); };
  return m;
}

Vec LipschitzMap::operator()(const Vec& x) const {
  if (!apply) return Vec::Zero(x.size());
  return apply(x);
}

Vec ResolventOperator::operator()(double gamma, const Metric& u, const Vec& x) const {
  if (!resolve) return x;  // J of the zero operator
  return resolve(gamma, u, x);
}

Vec clamp(const Vec& x, double lo, double hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

Vec soft_threshold(const Vec& t, double gamma) {
  // sign(t) * max(|t| - gamma, 0), with sign(0) = 0 so ties resolve to 0
  Vec out(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double m = std::abs(t[i]) - gamma;
    out[i] = m > 0.0 ? (t[i] > 0.0 ? m : -m) : 0.0;
  }
  return out;
}

Vec prox_box01(const Vec& x) { return clamp(x, 0.0, 1.0); }

Vec prox_l1_conj(const Vec& p, double gamma, const Vec& b) {
  if (p.size() != b.size()) throw std::invalid_argument("prox_l1_conj: dimension mismatch");
  if (!(gamma > 0.0)) throw std::invalid_argument("prox_l1_conj: gamma must be positive");
  return clamp(p - gamma * b, -1.0, 1.0);
}

Vec prox_l1_translated(const Vec& y, double gamma, const Vec& b) {
  if (y.size() != b.size()) throw std::invalid_argument("prox_l1_translated: dimension mismatch");
  if (!(gamma > 0.0)) throw std::invalid_argument("prox_l1_translated: gamma must be positive");
  return b + soft_threshold(y - b, gamma);
}

Vec grad_quadratic(const Vec& x, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("grad_quadratic: lambda must be >= 0");
  return (2.0 * lambda) * x;
}

LipschitzMap quadratic_gradient_map(double lambda) {
  LipschitzMap m;
  m.lipschitz = 2.0 * lambda;
  m.apply = [lambda](const Vec& x) { return grad_quadratic(x, lambda); };
  return m;
}

std::pair<Vec, Vec> project_pair_ball(const Vec& p, const Vec& q, double lambda) {
  if (p.size() != q.size()) throw std::invalid_argument("project_pair_ball: dimension mismatch");
  if (!(lambda > 0.0)) throw std::invalid_argument("project_pair_ball: lambda must be positive");
  Vec po(p.size()), qo(q.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double mag = std::sqrt(p[i] * p[i] + q[i] * q[i]);
    const double den = std::max(lambda, mag);
    po[i] = lambda * p[i] / den;
    qo[i] = lambda * q[i] / den;
  }
  return {std::move(po), std::move(qo)};
}

std::pair<Vec, Vec> project_pair_ball_scaled(const Vec& p, const Vec& q, double lambda,
                                             double sigma) {
  if (p.size() != q.size())
    throw std::invalid_argument("project_pair_ball_scaled: dimension mismatch");
  Vec po(p.size()), qo(q.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double ps = p[i] / sigma;
    const double qs = q[i] / sigma;
    const double den = std::max(1.0, std::sqrt(ps * ps + qs * qs) / lambda);
    po[i] = p[i] / den;
    qo[i] = q[i] / den;
  }
  return {std::move(po), std::move(qo)};
}

Vec prox_with_metric(const Proximable& f, double gamma, double tau, const Vec& x) {
  if (!(gamma > 0.0) || !(tau > 0.0))
    throw std::invalid_argument("prox_with_metric: gamma and tau must be positive");
  if (tau == 1.0) return f.prox(gamma, x);
  return Vec(tau * f.prox(tau * gamma, x / tau));
}

Vec resolvent_of_inverse(const Proximable& g, double gamma, const Vec& x) {
  if (!(gamma > 0.0)) throw std::invalid_argument("resolvent_of_inverse: gamma must be positive");
  return x - gamma * g.prox(1.0 / gamma, x / gamma);
}

double power_iteration_norm(const LinearMap& l, int iters, std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("power_iteration_norm: iters must be >= 1");
  Rng rng(seed);
  Vec v = rng.uniform_vec(l.in_dim, -1.0, 1.0);
  const double nv = v.norm();
  if (nv == 0.0) return 0.0;
  v /= nv;
  double lam = 0.0;
  for (int k = 0; k < iters; ++k) {
    const Vec w = l.apply(v);
    const Vec s = l.adjoint(w);
    const double lam_next = v.dot(s);  // Rayleigh quotient of L^T L
    const double ns = s.norm();
    if (ns == 0.0) return 0.0;
    if (k > 0 && std::abs(lam_next - lam) <= 1e-12 * std::max(lam_next, 1.0)) {
      lam = lam_next;
      break;
    }
    lam = lam_next;
    v = s / ns;
  }
  return std::sqrt(std::max(lam, 0.0));
}

namespace {

double scalar_factor(const Metric& u, const char* who) {
  if (u.kind() != Metric::Kind::Scalar)
    throw std::invalid_argument(std::string(who) + ": only scalar metrics are supported");
  return u.scalar_value();
}

}  // namespace

ResolventOperator resolvent_from_prox(Proximable f) {
  ResolventOperator r;
  r.resolve = [f = std::move(f)](double gamma, const Metric& u, const Vec& x) {
    const double tau = scalar_factor(u, "resolvent_from_prox");
    return prox_with_metric(f, gamma, tau, x);
  };
  return r;
}

ResolventOperator resolvent_box01() {
  ResolventOperator r;
  // Projection of an indicator is metric-invariant for scalar and diagonal
  // metrics: the argmin over the box is separable.
  r.resolve = [](double, const Metric& u, const Vec& x) {
    if (u.kind() == Metric::Kind::Dense)
      throw std::invalid_argument("resolvent_box01: dense metrics are not supported");
    return prox_box01(x);
  };
  return r;
}

ResolventOperator resolvent_from_conj_prox(Proximable gc) {
  ResolventOperator r;
  r.resolve = [gc = std::move(gc)](double gamma, const Metric& u, const Vec& x) {
    const double sigma = scalar_factor(u, "resolvent_from_conj_prox");
    return prox_with_metric(gc, gamma, sigma, x);
  };
  return r;
}

ResolventOperator resolvent_from_prox_of_inverse(Proximable g) {
  Proximable gc;
  gc.prox = [g = std::move(g)](double gamma, const Vec& x) {
    return resolvent_of_inverse(g, gamma, x);
  };
  return resolvent_from_conj_prox(std::move(gc));
}

}  // namespace fbfx
