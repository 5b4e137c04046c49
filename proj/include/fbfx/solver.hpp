#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "fbfx/metric.hpp"
#include "fbfx/operators.hpp"
#include "fbfx/vec.hpp"

namespace fbfx {

/// 0 in A(x) + B(x): resolvent-defined maximal monotone A plus a monotone
/// Lipschitz single-valued B.
struct InclusionProblem {
  ResolventOperator A;
  LipschitzMap B;
  int dim = 0;
};

/// Absolutely summable perturbation sequences. Empty functions mean zero.
/// sum_bound_* are closed-form certificates for sum_n ||.||; runs with
/// non-finite certificates are rejected unless explicitly overridden.
struct ErrorSchedule {
  std::function<Vec(int)> a, b, c;
  double sum_bound_a = 0.0, sum_bound_b = 0.0, sum_bound_c = 0.0;

  bool any() const { return static_cast<bool>(a) || static_cast<bool>(b) || static_cast<bool>(c); }
  bool certified() const;
  static ErrorSchedule none() { return {}; }
};

enum class StopKind { StepNorm, FvalGap, DistToRef };

/// tol <= 0 disables the rule (run to the iteration budget).
struct StopRule {
  StopKind kind = StopKind::StepNorm;
  double tol = 0.0;
};

enum class StopReason { Budget, StepNorm, FvalGap, DistToRef };
std::string stop_reason_name(StopReason r);

struct TraceRecord {
  long n = 0;
  double step_norm = 0.0;  // ||x_n - x_{n+1}||, which equals ||y_n - q_n||
  double residual = 0.0;   // ||x_n - p_n||
  double fval = 0.0;
  bool has_fval = false;
  double aux = 0.0;  // caller-defined per-row metric (the deblur CLI logs ISNR)
  bool has_aux = false;
  double elapsed_s = 0.0;
};

struct SolverConfig {
  std::function<double(int)> gamma;  // step size gamma_n
  double lambda_cap = 0.0;           // declared sup_n gamma_n
  double gamma_min = 0.0;            // declared positive lower bound (liminf certificate)
  MetricSchedule metrics = MetricSchedule::identity();
  ErrorSchedule errors = ErrorSchedule::none();
  long max_iters = 0;
  StopRule stop;
  int trace_every = 1;
  bool allow_unsummable_errors = false;

  // FvalGap needs both; DistToRef needs dist_ref.
  std::function<double(const Vec&)> objective;
  double fval_ref = 0.0;
  Vec dist_ref;

  // recorded per traced row when set
  std::function<double(const Vec&)> aux_metric;

  // > 0 restricts stop/trace norms to the leading coordinates (the primal
  // block of a product-space problem); 0 uses the full vector.
  int norm_dim = 0;

  // skip the step-size gate (kept for experiments that deliberately pair a
  // rule with the wrong bound)
  bool allow_unsafe_stepsize = false;

  static SolverConfig constant_step(double gamma_value, long max_iters);
};

struct ValidationReport {
  bool ok = true;
  double bound = 0.0;
  double observed = 0.0;
  std::string message;
};

/// Step-size gate. With error terms the cap must satisfy
/// lambda < 1/(sqrt(10) mu beta); error-free runs only need
/// sup gamma_n < 1/(2 mu beta).
ValidationReport validate_stepsize(const SolverConfig& cfg, double beta, double mu,
                                   bool error_free);

/// Full config gate used by run(): step-size bound, positive gamma floor,
/// error summability certificates.
ValidationReport validate_config(const SolverConfig& cfg, double beta);

/// One iteration of the classical two-evaluation scheme:
/// y = J_{gamma A}(x - gamma Bx), then x+ = y + gamma (Bx - By).
Vec step_tseng_classic(const InclusionProblem& prob, const Vec& x, double gamma);

struct IterateState {
  Vec x;
  Vec p_prev;
  long n = 0;
  Vec b_at_p_prev;  // cached forward evaluation B(p_prev); empty => recompute
};

/// One iteration of the extrapolated variable-metric scheme with error terms:
///   y = x - gamma U (B(p_prev) + a)        [extrapolated forward step]
///   p = J_{gamma U A}(y) + b               [resolvent step]
///   q = p - gamma U (B(p) + c)             [forward correction]
///   x+ = x - y + q                         [iterate update]
/// The update is computed as q + gamma U (B(p_prev) + a), which is the same
/// quantity without the cancellation. Aborts with the offending line named if
/// an intermediate goes non-finite.
IterateState step_tseng_ep(const InclusionProblem& prob, IterateState state,
                           const SolverConfig& cfg);

/// p+ = J_{gamma A}(p - 2 gamma B(p) + gamma B(p_prev)), identity metric,
/// ordered to reproduce the extrapolated scheme's p-sequence bit for bit.
Vec step_ogda_direct(const InclusionProblem& prob, const Vec& p, const Vec& p_prev,
                     double gamma);

struct RunResult {
  Vec solution;  // final p_n
  std::vector<TraceRecord> trace;
  StopReason reason = StopReason::Budget;
  long iterations = 0;
  long fresh_forward_evals = 0;
  IterateState final_state;
};

RunResult run(const InclusionProblem& prob, const SolverConfig& cfg, Vec x0, Vec p_init);
/// p_{-1} defaults to x0.
RunResult run(const InclusionProblem& prob, const SolverConfig& cfg, Vec x0);

/// Classical two-evaluation loop under the same stop rules (identity metric,
/// no error terms; gate gamma * beta < 1).
RunResult run_classic(const InclusionProblem& prob, const SolverConfig& cfg, Vec x0);

/// Header: n,step_norm,residual,fval,elapsed_s. elapsed_s is zeroed unless
/// with_timing, keeping traces byte-identical across reruns.
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace,
                     bool with_timing = false);

}  // namespace fbfx
