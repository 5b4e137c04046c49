#pragma once

#include <functional>
#include <memory>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "fbfx/vec.hpp"

namespace fbfx {

/// Symmetric positive definite operator U with a certified spectral window:
/// alpha * Id <= U and ||U|| <= norm_bound. Scalar and diagonal kinds are
/// exact; the dense kind carries caller-supplied bounds and a Cholesky
/// factorization computed once so apply_inverse is a cheap solve.
class Metric {
 public:
  enum class Kind { Scalar, Diagonal, Dense };

  static Metric scalar(double tau);
  static Metric diagonal(Vec d);
  static Metric dense(Eigen::MatrixXd m, double alpha, double norm_bound);
  static Metric identity() { return scalar(1.0); }

  Kind kind() const { return kind_; }
  // -1 for scalar metrics, which act on any dimension
  int dim() const { return dim_; }
  double alpha() const { return alpha_; }
  double norm_bound() const { return norm_bound_; }
  bool is_identity() const { return kind_ == Kind::Scalar && tau_ == 1.0; }

  double scalar_value() const;
  const Vec& diag() const { return diag_; }
  const Eigen::MatrixXd& matrix() const { return mat_; }

  Vec apply(const Vec& x) const;
  Vec apply_inverse(const Vec& x) const;

  // elementwise coefficients as a vector of length n (scalar kinds broadcast)
  Vec diag_expanded(int n) const;

 private:
  Kind kind_ = Kind::Scalar;
  int dim_ = -1;
  double tau_ = 1.0;
  Vec diag_;
  Eigen::MatrixXd mat_;
  std::shared_ptr<Eigen::LLT<Eigen::MatrixXd>> llt_;
  double alpha_ = 1.0;
  double norm_bound_ = 1.0;
};

double weighted_inner(const Vec& x, const Vec& y, const Metric& U);
double weighted_norm(const Vec& x, const Metric& U);
double inv_weighted_norm(const Vec& x, const Metric& U);  // ||x||_{U^{-1}}

/// Is (1+eta) * U_next - U positive semidefinite? Exact elementwise test for
/// scalar/diagonal kinds; when a dense metric is involved the test samples
/// randomized Rayleigh quotients (sound but incomplete: it can accept, never
/// wrongly reject beyond the probe tolerance).
bool check_loewner_step(const Metric& U_next, const Metric& U, double eta);

struct MetricSchedule {
  std::function<Metric(int)> metric_at;
  std::function<double(int)> eta_at;  // eta_n >= 0
  double mu = 1.0;                    // certified bound on sup_n ||U_n||
  double eta_sum_bound = 0.0;         // closed-form bound on sum_n eta_n

  static MetricSchedule constant(Metric u);
  static MetricSchedule identity() { return constant(Metric::identity()); }
};

/// Named scalar schedules used by the experiments. The one-minus family is
/// indexed from k = n+2 so every value stays strictly positive; all builtin
/// rules are nondecreasing, hence eta_n = 0 throughout.
struct ScheduleRule {
  enum class Kind {
    Const,
    OneMinusInvK,
    OneMinusInvK2,
    OneMinusInvK5,
    OneMinusInvKK,
    KOverK1,
  };

  Kind kind = Kind::Const;
  double value = 1.0;  // Const only

  double at(int n) const;
  MetricSchedule schedule() const;
  std::string name() const;

  // "const:<v>", "one-minus-inv-k", "one-minus-inv-k2", "one-minus-inv-k5",
  // "one-minus-inv-kk", "k-over-k1"
  static ScheduleRule parse(const std::string& text);
};

}  // namespace fbfx
