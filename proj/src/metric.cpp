#include "fbfx/metric.hpp"

#include <cmath>
#include <stdexcept>

namespace fbfx {

Metric Metric::scalar(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw std::invalid_argument("scalar metric factor must be positive");
  Metric m;
  m.kind_ = Kind::Scalar;
  m.dim_ = -1;
  m.tau_ = tau;
  m.alpha_ = tau;
  m.norm_bound_ = tau;
  return m;
}

Metric Metric::diagonal(Vec d) {
  if (d.size() == 0 || !(d.minCoeff() > 0.0) || !all_finite(d))
    throw std::invalid_argument("diagonal metric entries must be positive");
  Metric m;
  m.kind_ = Kind::Diagonal;
  m.dim_ = static_cast<int>(d.size());
  m.alpha_ = d.minCoeff();
  m.norm_bound_ = d.maxCoeff();
  m.diag_ = std::move(d);
  return m;
}

Metric Metric::dense(Eigen::MatrixXd mat, double alpha, double norm_bound) {
  if (mat.rows() != mat.cols()) throw std::invalid_argument("dense metric must be square");
  if (!(alpha > 0.0) || !(norm_bound >= alpha))
    throw std::invalid_argument("dense metric needs 0 < alpha <= norm_bound");
  Metric m;
  m.kind_ = Kind::Dense;
  m.dim_ = static_cast<int>(mat.rows());
  m.alpha_ = alpha;
  m.norm_bound_ = norm_bound;
  m.mat_ = std::move(mat);
  m.llt_ = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(m.mat_);
  if (m.llt_->info() != Eigen::Success)
    throw std::invalid_argument("dense metric is not positive definite");
  return m;
}

double Metric::scalar_value() const {
  if (kind_ != Kind::Scalar) throw std::logic_error("not a scalar metric");
  return tau_;
}

Vec Metric::apply(const Vec& x) const {
  switch (kind_) {
    case Kind::Scalar:
      return tau_ * x;
    case Kind::Diagonal:
      if (x.size() != diag_.size()) throw std::invalid_argument("metric/vector dimension mismatch");
      return diag_.cwiseProduct(x);
    case Kind::Dense:
      if (x.size() != mat_.rows()) throw std::invalid_argument("metric/vector dimension mismatch");
      return mat_ * x;
  }
  return x;
}

Vec Metric::apply_inverse(const Vec& x) const {
  switch (kind_) {
    case Kind::Scalar:
      return x / tau_;
    case Kind::Diagonal:
      if (x.size() != diag_.size()) throw std::invalid_argument("metric/vector dimension mismatch");
      return x.cwiseQuotient(diag_);
    case Kind::Dense:
      if (x.size() != mat_.rows()) throw std::invalid_argument("metric/vector dimension mismatch");
      return llt_->solve(x);
  }
  return x;
}

Vec Metric::diag_expanded(int n) const {
  switch (kind_) {
    case Kind::Scalar:
      return Vec::Constant(n, tau_);
    case Kind::Diagonal:
      if (n != diag_.size()) throw std::invalid_argument("metric/vector dimension mismatch");
      return diag_;
    case Kind::Dense:
      throw std::logic_error("dense metric has no diagonal expansion");
  }
  return Vec();
}

double weighted_inner(const Vec& x, const Vec& y, const Metric& U) {
  if (x.size() != y.size()) throw std::invalid_argument("weighted_inner: dimension mismatch");
  return U.apply(x).dot(y);
}

double weighted_norm(const Vec& x, const Metric& U) {
  return std::sqrt(weighted_inner(x, x, U));
}

double inv_weighted_norm(const Vec& x, const Metric& U) {
  return std::sqrt(U.apply_inverse(x).dot(x));
}

namespace {

bool loewner_structured(const Vec& d_next, const Vec& d, double eta) {
  return ((1.0 + eta) * d_next.array() >= d.array()).all();
}

Eigen::MatrixXd as_dense(const Metric& m, int n) {
  switch (m.kind()) {
    case Metric::Kind::Scalar:
      return m.scalar_value() * Eigen::MatrixXd::Identity(n, n);
    case Metric::Kind::Diagonal:
      return Eigen::MatrixXd(m.diag().asDiagonal());
    case Metric::Kind::Dense:
      return m.matrix();
  }
  return Eigen::MatrixXd();
}

}  // namespace

bool check_loewner_step(const Metric& U_next, const Metric& U, double eta) {
  if (eta < 0.0) throw std::invalid_argument("check_loewner_step: eta must be >= 0");
  const bool a_dense = U_next.kind() == Metric::Kind::Dense;
  const bool b_dense = U.kind() == Metric::Kind::Dense;

  if (!a_dense && !b_dense) {
    if (U_next.kind() == Metric::Kind::Scalar && U.kind() == Metric::Kind::Scalar)
      return (1.0 + eta) * U_next.scalar_value() >= U.scalar_value();
    // at least one diagonal fixes the dimension
    const int n = U_next.kind() == Metric::Kind::Diagonal ? U_next.dim() : U.dim();
    if (U_next.dim() > 0 && U.dim() > 0 && U_next.dim() != U.dim())
      throw std::invalid_argument("check_loewner_step: dimension mismatch");
    return loewner_structured(U_next.diag_expanded(n), U.diag_expanded(n), eta);
  }

  const int n = a_dense ? U_next.dim() : U.dim();
  if ((U_next.dim() > 0 && U_next.dim() != n) || (U.dim() > 0 && U.dim() != n))
    throw std::invalid_argument("check_loewner_step: dimension mismatch");
  const Eigen::MatrixXd gap = (1.0 + eta) * as_dense(U_next, n) - as_dense(U, n);
  const double scale = std::max(1.0, gap.cwiseAbs().maxCoeff());
  Rng rng(0x9e3779b97f4a7c15ULL);
  for (int k = 0; k < 64; ++k) {
    Vec v = rng.uniform_vec(n, -1.0, 1.0);
    const double nv = v.norm();
    if (nv == 0.0) continue;
    v /= nv;
    if (v.dot(gap * v) < -1e-12 * scale) return false;
  }
  return true;
}

MetricSchedule MetricSchedule::constant(Metric u) {
  MetricSchedule s;
  s.mu = u.norm_bound();
  s.eta_sum_bound = 0.0;
  s.metric_at = [u = std::move(u)](int) { return u; };
  s.eta_at = [](int) { return 0.0; };
  return s;
}

double ScheduleRule::at(int n) const {
  switch (kind) {
    case Kind::Const:
      return value;
    case Kind::OneMinusInvK:
      return 1.0 - 1.0 / static_cast<double>(n + 2);
    case Kind::OneMinusInvK2:
      return 1.0 - 1.0 / std::pow(static_cast<double>(n + 2), 2.0);
    case Kind::OneMinusInvK5:
      return 1.0 - 1.0 / std::pow(static_cast<double>(n + 2), 5.0);
    case Kind::OneMinusInvKK:
      return 1.0 - std::pow(static_cast<double>(n + 2), -static_cast<double>(n + 2));
    case Kind::KOverK1:
      return static_cast<double>(n + 1) / static_cast<double>(n + 2);
  }
  return 1.0;
}

MetricSchedule ScheduleRule::schedule() const {
  MetricSchedule s;
  s.mu = kind == Kind::Const ? value : 1.0;
  s.eta_sum_bound = 0.0;
  ScheduleRule rule = *this;
  s.metric_at = [rule](int n) { return Metric::scalar(rule.at(n)); };
  s.eta_at = [](int) { return 0.0; };
  return s;
}

std::string ScheduleRule::name() const {
  switch (kind) {
    case Kind::Const:
      return "const:" + std::to_string(value);
    case Kind::OneMinusInvK:
      return "one-minus-inv-k";
    case Kind::OneMinusInvK2:
      return "one-minus-inv-k2";
    case Kind::OneMinusInvK5:
      return "one-minus-inv-k5";
    case Kind::OneMinusInvKK:
      return "one-minus-inv-kk";
    case Kind::KOverK1:
      return "k-over-k1";
  }
  return "";
}

ScheduleRule ScheduleRule::parse(const std::string& text) {
  ScheduleRule r;
  if (text.rfind("const:", 0) == 0) {
    r.kind = Kind::Const;
    r.value = std::stod(text.substr(6));
    if (!(r.value > 0.0)) throw std::invalid_argument("const schedule must be positive: " + text);
    return r;
  }
  if (text == "one-minus-inv-k") r.kind = Kind::OneMinusInvK;
  else if (text == "one-minus-inv-k2") r.kind = Kind::OneMinusInvK2;
  else if (text == "one-minus-inv-k5") r.kind = Kind::OneMinusInvK5;
  else if (text == "one-minus-inv-kk") r.kind = Kind::OneMinusInvKK;
  else if (text == "k-over-k1") r.kind = Kind::KOverK1;
  else throw std::invalid_argument("unknown schedule rule: " + text);
  return r;
}

}  // namespace fbfx
