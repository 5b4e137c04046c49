#include "fbfx/solver.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fbfx {

bool ErrorSchedule::certified() const {
  auto fin = [](double s) { return std::isfinite(s) && s >= 0.0; };
  return (!a || fin(sum_bound_a)) && (!b || fin(sum_bound_b)) && (!c || fin(sum_bound_c));
}

std::string stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::Budget:
      return "budget";
    case StopReason::StepNorm:
      return "step_norm";
    case StopReason::FvalGap:
      return "fval_gap";
    case StopReason::DistToRef:
      return "dist_to_ref";
  }
  return "";
}

SolverConfig SolverConfig::constant_step(double gamma_value, long max_iters) {
  SolverConfig cfg;
  cfg.gamma = [gamma_value](int) { return gamma_value; };
  cfg.lambda_cap = gamma_value;
  cfg.gamma_min = gamma_value;
  cfg.max_iters = max_iters;
  return cfg;
}

ValidationReport validate_stepsize(const SolverConfig& cfg, double beta, double mu,
                                   bool error_free) {
  if (!(beta > 0.0) || !(mu > 0.0))
    throw std::invalid_argument("validate_stepsize: beta and mu must be positive");
  ValidationReport rep;
  rep.observed = cfg.lambda_cap;
  rep.bound = error_free ? 1.0 / (2.0 * mu * beta) : 1.0 / (std::sqrt(10.0) * mu * beta);
  rep.ok = cfg.lambda_cap < rep.bound;
  if (!rep.ok) {
    std::ostringstream os;
    os << "step-size cap " << rep.observed << " violates the "
       << (error_free ? "error-free bound 1/(2*mu*beta) = " : "with-error bound 1/(sqrt(10)*mu*beta) = ")
       << rep.bound << " for mu = " << mu << ", beta = " << beta;
    rep.message = os.str();
  }
  return rep;
}

ValidationReport validate_config(const SolverConfig& cfg, double beta) {
  if (!cfg.gamma) return {false, 0.0, 0.0, "no step-size rule configured"};
  if (!(cfg.gamma_min > 0.0))
    return {false, 0.0, cfg.gamma_min,
            "a positive lower bound on gamma_n must be declared (liminf certificate)"};
  if (cfg.lambda_cap < cfg.gamma_min)
    return {false, cfg.gamma_min, cfg.lambda_cap, "lambda_cap is below the declared gamma floor"};
  if (cfg.trace_every < 1)
    return {false, 1.0, static_cast<double>(cfg.trace_every), "trace_every must be >= 1"};
  if (cfg.errors.any() && !cfg.errors.certified() && !cfg.allow_unsummable_errors)
    return {false, 0.0, 0.0,
            "error schedule lacks a finite summability certificate; "
            "set allow_unsummable_errors to override"};
  if (cfg.stop.tol > 0.0) {
    if (cfg.stop.kind == StopKind::FvalGap && !cfg.objective)
      return {false, 0.0, 0.0, "fval_gap stopping needs an objective callback"};
    if (cfg.stop.kind == StopKind::DistToRef && cfg.dist_ref.size() == 0)
      return {false, 0.0, 0.0, "dist_to_ref stopping needs a reference point"};
  }
  if (cfg.allow_unsafe_stepsize) return {};
  return validate_stepsize(cfg, beta, cfg.metrics.mu, !cfg.errors.any());
}

Vec step_tseng_classic(const InclusionProblem& prob, const Vec& x, double gamma) {
  if (!(gamma * prob.B.lipschitz < 1.0))
    throw std::invalid_argument("step_tseng_classic: gamma * beta must be < 1");
  const Metric id = Metric::identity();
  const Vec bx = prob.B(x);
  const Vec y = prob.A(gamma, id, x - gamma * bx);
  const Vec by = prob.B(y);
  return y + gamma * (bx - by);
}

namespace {

void require_finite(const Vec& v, const char* line, long n) {
  if (!all_finite(v)) {
    std::ostringstream os;
    os << "non-finite intermediate in " << line << " at iteration " << n;
    throw std::runtime_error(os.str());
  }
}

double sub_norm(const Vec& v, int d) {
  return d > 0 ? v.head(d).norm() : v.norm();
}

}  // namespace

IterateState step_tseng_ep(const InclusionProblem& prob, IterateState state,
                           const SolverConfig& cfg) {
  const int n = static_cast<int>(state.n);
  const double g = cfg.gamma(n);
  const Metric u = cfg.metrics.metric_at(n);

  if (state.b_at_p_prev.size() == 0) state.b_at_p_prev = prob.B(state.p_prev);

  // t = gamma * U * (B(p_prev) + a_n); reused for the iterate update below
  Vec t;
  if (cfg.errors.a) t = g * u.apply(state.b_at_p_prev + cfg.errors.a(n));
  else t = g * u.apply(state.b_at_p_prev);

  Vec y = state.x - t;
  require_finite(y, "the extrapolated forward step (y)", state.n);

  Vec p = prob.A(g, u, y);
  if (cfg.errors.b) p += cfg.errors.b(n);
  require_finite(p, "the resolvent step (p)", state.n);

  Vec bp = prob.B(p);
  Vec q;
  if (cfg.errors.c) q = p - g * u.apply(bp + cfg.errors.c(n));
  else q = p - g * u.apply(bp);
  require_finite(q, "the forward correction (q)", state.n);

  Vec x_next = q + t;  // == x - y + q
  require_finite(x_next, "the iterate update (x)", state.n);

  state.x = std::move(x_next);
  state.p_prev = std::move(p);
  state.b_at_p_prev = std::move(bp);
  state.n += 1;
  return state;
}

Vec step_ogda_direct(const InclusionProblem& prob, const Vec& p, const Vec& p_prev,
                     double gamma) {
  const Vec u = gamma * prob.B(p);
  const Vec t = gamma * prob.B(p_prev);
  const Vec arg = ((p - u) + t) - u;
  return prob.A(gamma, Metric::identity(), arg);
}

namespace {

struct StopEval {
  bool fired = false;
  StopReason reason = StopReason::Budget;
  double fval = 0.0;
  bool has_fval = false;
};

StopEval evaluate_stop(const SolverConfig& cfg, const Vec& x_prev, const Vec& x_next,
                       bool tracing_row) {
  StopEval ev;
  const bool fval_stop = cfg.stop.tol > 0.0 && cfg.stop.kind == StopKind::FvalGap;
  if (cfg.objective && (tracing_row || fval_stop)) {
    ev.fval = cfg.objective(x_next);
    ev.has_fval = true;
  }
  if (cfg.stop.tol <= 0.0) return ev;
  switch (cfg.stop.kind) {
    case StopKind::StepNorm:
      if (sub_norm(x_prev - x_next, cfg.norm_dim) < cfg.stop.tol) {
        ev.fired = true;
        ev.reason = StopReason::StepNorm;
      }
      break;
    case StopKind::FvalGap:
      if (ev.has_fval && std::abs(ev.fval - cfg.fval_ref) < cfg.stop.tol) {
        ev.fired = true;
        ev.reason = StopReason::FvalGap;
      }
      break;
    case StopKind::DistToRef:
      if (sub_norm(x_next - cfg.dist_ref, cfg.norm_dim) < cfg.stop.tol) {
        ev.fired = true;
        ev.reason = StopReason::DistToRef;
      }
      break;
  }
  return ev;
}

}  // namespace

RunResult run(const InclusionProblem& prob, const SolverConfig& cfg, Vec x0, Vec p_init) {
  const ValidationReport rep = validate_config(cfg, prob.B.lipschitz);
  if (!rep.ok) throw std::invalid_argument("run: invalid config: " + rep.message);

  RunResult res;
  res.solution = p_init;

  IterateState state;
  state.x = std::move(x0);
  state.p_prev = std::move(p_init);
  state.n = 0;

  const auto t0 = std::chrono::steady_clock::now();
  bool metric_checked_dense = false;
  for (long n = 0; n < cfg.max_iters; ++n) {
    const double g = cfg.gamma(static_cast<int>(n));
    if (!(g >= cfg.gamma_min) || !(g <= cfg.lambda_cap)) {
      std::ostringstream os;
      os << "gamma_" << n << " = " << g << " leaves the declared window ["
         << cfg.gamma_min << ", " << cfg.lambda_cap << "]";
      throw std::invalid_argument(os.str());
    }
    {
      const Metric u = cfg.metrics.metric_at(static_cast<int>(n));
      const Metric u_next = cfg.metrics.metric_at(static_cast<int>(n) + 1);
      const bool dense = u.kind() == Metric::Kind::Dense || u_next.kind() == Metric::Kind::Dense;
      if (!dense || !metric_checked_dense) {
        if (!check_loewner_step(u_next, u, cfg.metrics.eta_at(static_cast<int>(n)))) {
          std::ostringstream os;
          os << "metric schedule violates (1+eta_n) U_{n+1} >= U_n at n = " << n;
          throw std::invalid_argument(os.str());
        }
        if (dense) metric_checked_dense = true;
      }
    }

    const Vec x_before = state.x;
    const bool fresh_warmup = state.b_at_p_prev.size() == 0;
    state = step_tseng_ep(prob, std::move(state), cfg);
    res.fresh_forward_evals += fresh_warmup ? 2 : 1;

    const StopEval ev = evaluate_stop(cfg, x_before, state.x, n % cfg.trace_every == 0);
    if (n % cfg.trace_every == 0) {
      TraceRecord rec;
      rec.n = n;
      rec.step_norm = sub_norm(x_before - state.x, cfg.norm_dim);
      rec.residual = sub_norm(x_before - state.p_prev, cfg.norm_dim);
      rec.fval = ev.fval;
      rec.has_fval = ev.has_fval;
      if (cfg.aux_metric) {
        rec.aux = cfg.aux_metric(state.x);
        rec.has_aux = true;
      }
      rec.elapsed_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      res.trace.push_back(rec);
    }
    res.iterations = n + 1;
    if (ev.fired) {
      res.reason = ev.reason;
      break;
    }
  }

  res.solution = state.p_prev;
  res.final_state = std::move(state);
  return res;
}

RunResult run(const InclusionProblem& prob, const SolverConfig& cfg, Vec x0) {
  Vec p_init = x0;
  return run(prob, cfg, std::move(x0), std::move(p_init));
}

RunResult run_classic(const InclusionProblem& prob, const SolverConfig& cfg, Vec x0) {
  if (cfg.errors.any())
    throw std::invalid_argument("run_classic: error terms are not part of the classical scheme");
  if (!(cfg.lambda_cap * prob.B.lipschitz < 1.0))
    throw std::invalid_argument("run_classic: gamma * beta must be < 1");

  RunResult res;
  res.solution = x0;
  Vec x = std::move(x0);
  Vec y_last;
  const Metric id = Metric::identity();

  const auto t0 = std::chrono::steady_clock::now();
  for (long n = 0; n < cfg.max_iters; ++n) {
    const double g = cfg.gamma(static_cast<int>(n));
    const Vec bx = prob.B(x);
    const Vec y = prob.A(g, id, x - g * bx);
    const Vec by = prob.B(y);
    Vec x_next = y + g * (bx - by);
    require_finite(x_next, "the classical update", n);
    res.fresh_forward_evals += 2;

    const StopEval ev = evaluate_stop(cfg, x, x_next, n % cfg.trace_every == 0);
    if (n % cfg.trace_every == 0) {
      TraceRecord rec;
      rec.n = n;
      rec.step_norm = sub_norm(x - x_next, cfg.norm_dim);
      rec.residual = sub_norm(x - y, cfg.norm_dim);
      rec.fval = ev.fval;
      rec.has_fval = ev.has_fval;
      if (cfg.aux_metric) {
        rec.aux = cfg.aux_metric(x_next);
        rec.has_aux = true;
      }
      rec.elapsed_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      res.trace.push_back(rec);
    }
    res.iterations = n + 1;
    x = std::move(x_next);
    y_last = y;
    if (ev.fired) {
      res.reason = ev.reason;
      break;
    }
  }

  res.solution = y_last.size() ? y_last : x;
  return res;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace,
                     bool with_timing) {
  out << "n,step_norm,residual,fval,elapsed_s\n";
  char buf[160];
  for (const auto& r : trace) {
    if (r.has_fval)
      std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g\n", r.n, r.step_norm,
                    r.residual, r.fval, with_timing ? r.elapsed_s : 0.0);
    else
      std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,,%.17g\n", r.n, r.step_norm, r.residual,
                    with_timing ? r.elapsed_s : 0.0);
    out << buf;
  }
}

}  // namespace fbfx
