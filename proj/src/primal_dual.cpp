#include "fbfx/primal_dual.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fbfx {

double PrimalDualProblem::common_mu() const {
  double mu = primal_metrics.mu;
  for (const auto& b : blocks) mu = std::max(mu, b.metrics.mu);
  return mu;
}

bool PrimalDualProblem::any_errors() const {
  if (primal_errors.any()) return true;
  for (const auto& b : blocks)
    if (b.errors.any()) return true;
  return false;
}

double lipschitz_aggregate(const PrimalDualProblem& prob) {
  double s = 0.0;
  for (const auto& b : prob.blocks) s += b.L.norm_bound * b.L.norm_bound;
  return prob.C.lipschitz + std::sqrt(s);
}

ProductState initial_product_state(const PrimalDualProblem& prob, Vec x0, std::vector<Vec> v0,
                                   Vec p1_init, std::vector<Vec> p2_init) {
  if (x0.size() != prob.dim || p1_init.size() != prob.dim)
    throw std::invalid_argument("initial_product_state: primal dimension mismatch");
  if (v0.size() != prob.blocks.size() || p2_init.size() != prob.blocks.size())
    throw std::invalid_argument("initial_product_state: block count mismatch");
  for (size_t i = 0; i < prob.blocks.size(); ++i)
    if (v0[i].size() != prob.blocks[i].L.out_dim || p2_init[i].size() != prob.blocks[i].L.out_dim)
      throw std::invalid_argument("initial_product_state: dual dimension mismatch");
  ProductState st;
  st.x = std::move(x0);
  st.v = std::move(v0);
  st.p1_prev = std::move(p1_init);
  st.p2_prev = std::move(p2_init);
  return st;
}

int ProductInclusion::total_dim() const {
  int t = primal_dim;
  for (int d : dual_dims) t += d;
  return t;
}

Vec ProductInclusion::pack(const Vec& x, const std::vector<Vec>& v) const {
  Vec w(total_dim());
  w.head(primal_dim) = x;
  int off = primal_dim;
  for (size_t i = 0; i < v.size(); ++i) {
    w.segment(off, dual_dims[i]) = v[i];
    off += dual_dims[i];
  }
  return w;
}

void ProductInclusion::unpack(const Vec& w, Vec& x, std::vector<Vec>& v) const {
  x = w.head(primal_dim);
  v.resize(dual_dims.size());
  int off = primal_dim;
  for (size_t i = 0; i < dual_dims.size(); ++i) {
    v[i] = w.segment(off, dual_dims[i]);
    off += dual_dims[i];
  }
}

SolverConfig ProductInclusion::configure(const SolverConfig& base) const {
  SolverConfig cfg = base;
  cfg.metrics = metrics;
  cfg.errors = errors;
  return cfg;
}

namespace {

// slice of a product metric: scalar metrics broadcast, diagonal segments
// collapse back to scalar when constant (the blockwise-scalar layout)
Metric metric_part(const Metric& u, int off, int len) {
  if (u.kind() == Metric::Kind::Scalar) return u;
  if (u.kind() == Metric::Kind::Diagonal) {
    Vec seg = u.diag().segment(off, len);
    if (seg.minCoeff() == seg.maxCoeff()) return Metric::scalar(seg[0]);
    return Metric::diagonal(std::move(seg));
  }
  throw std::invalid_argument("product metrics must be scalar or diagonal");
}

void require_finite_pd(const Vec& v, const char* line, int block, long n) {
  if (!all_finite(v)) {
    std::ostringstream os;
    os << "non-finite intermediate in " << line;
    if (block >= 0) os << " of block " << (block + 1);
    os << " at iteration " << n;
    throw std::runtime_error(os.str());
  }
}

}  // namespace

ProductInclusion build_product_inclusion(const PrimalDualProblem& prob) {
  ProductInclusion pi;
  pi.primal_dim = prob.dim;
  for (const auto& b : prob.blocks) {
    if (b.L.in_dim != prob.dim)
      throw std::invalid_argument("build_product_inclusion: block input dimension mismatch");
    pi.dual_dims.push_back(b.L.out_dim);
  }
  const int total = pi.total_dim();
  const int m = static_cast<int>(prob.blocks.size());
  const int pdim = pi.primal_dim;
  const auto dual_dims = pi.dual_dims;

  auto blocks = std::make_shared<std::vector<Block>>(prob.blocks);
  auto cmap = std::make_shared<LipschitzMap>(prob.C);
  auto primal_res = std::make_shared<ResolventOperator>(prob.primal_resolvent);
  auto zshift = std::make_shared<Vec>(prob.z);

  pi.flat.dim = total;
  pi.flat.B.lipschitz = lipschitz_aggregate(prob);
  pi.flat.B.apply = [blocks, cmap, pdim, dual_dims, total, m](const Vec& w) {
    Vec out(total);
    const auto head = w.head(pdim);
    Vec acc = Vec::Zero(pdim);
    if (!cmap->is_zero()) acc += cmap->apply(head);
    int off = pdim;
    for (int i = 0; i < m; ++i) {
      acc += (*blocks)[i].L.adjoint(w.segment(off, dual_dims[i]));
      off += dual_dims[i];
    }
    out.head(pdim) = acc;
    off = pdim;
    for (int i = 0; i < m; ++i) {
      out.segment(off, dual_dims[i]) = -(*blocks)[i].L.apply(head);
      off += dual_dims[i];
    }
    return out;
  };

  pi.flat.A.resolve = [blocks, primal_res, zshift, pdim, dual_dims, total,
                       m](double g, const Metric& u, const Vec& w) {
    Vec out(total);
    {
      const Metric up = metric_part(u, 0, pdim);
      Vec arg;
      if (zshift->size())
        arg = w.head(pdim) + g * up.apply(*zshift);
      else
        arg = w.head(pdim);
      out.head(pdim) = (*primal_res)(g, up, arg);
    }
    int off = pdim;
    for (int i = 0; i < m; ++i) {
      const Block& b = (*blocks)[i];
      const Metric ui = metric_part(u, off, dual_dims[i]);
      Vec arg;
      if (b.r.size())
        arg = w.segment(off, dual_dims[i]) - g * ui.apply(b.r);
      else
        arg = w.segment(off, dual_dims[i]);
      out.segment(off, dual_dims[i]) = b.dual_resolvent(g, ui, arg);
      off += dual_dims[i];
    }
    return out;
  };

  // blockwise diagonal metric; eta_n is the max across parts
  {
    MetricSchedule ms;
    auto pm = prob.primal_metrics;
    auto bm = std::make_shared<std::vector<MetricSchedule>>();
    for (const auto& b : prob.blocks) bm->push_back(b.metrics);
    ms.mu = prob.common_mu();
    ms.eta_sum_bound = pm.eta_sum_bound;
    for (const auto& s : *bm) ms.eta_sum_bound += s.eta_sum_bound;
    ms.metric_at = [pm, bm, pdim, dual_dims, total](int n) {
      Vec d(total);
      d.head(pdim) = pm.metric_at(n).diag_expanded(pdim);
      int off = pdim;
      for (size_t i = 0; i < bm->size(); ++i) {
        d.segment(off, dual_dims[i]) = (*bm)[i].metric_at(n).diag_expanded(dual_dims[i]);
        off += dual_dims[i];
      }
      return Metric::diagonal(std::move(d));
    };
    ms.eta_at = [pm, bm](int n) {
      double e = pm.eta_at(n);
      for (const auto& s : *bm) e = std::max(e, s.eta_at(n));
      return e;
    };
    pi.metrics = ms;
  }

  // concatenated error schedules; the dual a/c parts enter the skew map with
  // their sign flipped so the flat run reproduces the block lines exactly
  {
    bool any_a = static_cast<bool>(prob.primal_errors.a);
    bool any_b = static_cast<bool>(prob.primal_errors.b);
    bool any_c = static_cast<bool>(prob.primal_errors.c);
    for (const auto& b : prob.blocks) {
      any_a = any_a || static_cast<bool>(b.errors.a);
      any_b = any_b || static_cast<bool>(b.errors.b);
      any_c = any_c || static_cast<bool>(b.errors.c);
    }
    auto pe = std::make_shared<ErrorSchedule>(prob.primal_errors);
    auto be = std::make_shared<std::vector<ErrorSchedule>>();
    for (const auto& b : prob.blocks) be->push_back(b.errors);

    auto concat = [pe, be, pdim, dual_dims, total](int n, int which, bool flip_dual) {
      Vec out = Vec::Zero(total);
      auto pick = [&](const ErrorSchedule& e) -> const std::function<Vec(int)>& {
        return which == 0 ? e.a : (which == 1 ? e.b : e.c);
      };
      if (pick(*pe)) out.head(pdim) = pick(*pe)(n);
      int off = pdim;
      for (size_t i = 0; i < be->size(); ++i) {
        if (pick((*be)[i]))
          out.segment(off, dual_dims[i]) = flip_dual ? Vec(-pick((*be)[i])(n)) : pick((*be)[i])(n);
        off += dual_dims[i];
      }
      return out;
    };

    ErrorSchedule es;
    if (any_a) es.a = [concat](int n) { return concat(n, 0, true); };
    if (any_b) es.b = [concat](int n) { return concat(n, 1, false); };
    if (any_c) es.c = [concat](int n) { return concat(n, 2, true); };
    es.sum_bound_a = prob.primal_errors.sum_bound_a;
    es.sum_bound_b = prob.primal_errors.sum_bound_b;
    es.sum_bound_c = prob.primal_errors.sum_bound_c;
    for (const auto& b : prob.blocks) {
      es.sum_bound_a += b.errors.sum_bound_a;
      es.sum_bound_b += b.errors.sum_bound_b;
      es.sum_bound_c += b.errors.sum_bound_c;
    }
    pi.errors = es;
  }

  return pi;
}

ProductState step_blocks(const PrimalDualProblem& prob, ProductState st, const SolverConfig& cfg) {
  const int n = static_cast<int>(st.n);
  const int m = static_cast<int>(prob.blocks.size());
  const double g = cfg.gamma(n);
  const Metric u0 = prob.primal_metrics.metric_at(n);

  std::vector<Metric> ui;
  ui.reserve(m);
  for (int i = 0; i < m; ++i) ui.push_back(prob.blocks[i].metrics.metric_at(n));

  if (!st.fwd_cached) {
    st.c_at_p1 = prob.C.is_zero() ? Vec() : Vec(prob.C(st.p1_prev));
    st.l_at_p1.resize(m);
    st.lt_at_p2.resize(m);
    for (int i = 0; i < m; ++i) {
      st.l_at_p1[i] = prob.blocks[i].L.apply(st.p1_prev);
      st.lt_at_p2[i] = prob.blocks[i].L.adjoint(st.p2_prev[i]);
    }
    st.fwd_cached = true;
  }

  // y_1 = x - gamma U0 (C p1 + sum_i L_i^* p2_i + a_1)
  Vec acc = Vec::Zero(prob.dim);
  if (!prob.C.is_zero()) acc += st.c_at_p1;
  for (int i = 0; i < m; ++i) acc += st.lt_at_p2[i];
  if (prob.primal_errors.a) acc += prob.primal_errors.a(n);
  const Vec t1 = g * u0.apply(acc);
  Vec y1 = st.x - t1;
  require_finite_pd(y1, "the extrapolated primal step (y_1)", -1, st.n);

  // per-block dual forward and resolvent
  std::vector<Vec> t2(m), y2(m), p2(m);
  for (int i = 0; i < m; ++i) {
    const Block& b = prob.blocks[i];
    if (b.errors.a)
      t2[i] = g * ui[i].apply(st.l_at_p1[i] + b.errors.a(n));
    else
      t2[i] = g * ui[i].apply(st.l_at_p1[i]);
    y2[i] = st.v[i] + t2[i];
    require_finite_pd(y2[i], "the extrapolated dual step (y_2)", i, st.n);
    Vec arg;
    if (b.r.size())
      arg = y2[i] - g * ui[i].apply(b.r);
    else
      arg = y2[i];
    p2[i] = b.dual_resolvent(g, ui[i], arg);
    if (b.errors.b) p2[i] += b.errors.b(n);
    require_finite_pd(p2[i], "the dual resolvent (p_2)", i, st.n);
  }

  // p_1 = J_{gamma U0 A}(y_1 + gamma U0 z) + b_1
  Vec parg;
  if (prob.z.size())
    parg = y1 + g * u0.apply(prob.z);
  else
    parg = y1;
  Vec p1 = prob.primal_resolvent(g, u0, parg);
  if (prob.primal_errors.b) p1 += prob.primal_errors.b(n);
  require_finite_pd(p1, "the primal resolvent (p_1)", -1, st.n);

  // fresh forward pieces at (p_1, p_2)
  Vec c_new = prob.C.is_zero() ? Vec() : Vec(prob.C(p1));
  std::vector<Vec> l_new(m), lt_new(m);
  for (int i = 0; i < m; ++i) {
    l_new[i] = prob.blocks[i].L.apply(p1);
    lt_new[i] = prob.blocks[i].L.adjoint(p2[i]);
  }

  // dual corrections and updates: v+ = v - y_2 + q_2 = q_2 - t_2
  for (int i = 0; i < m; ++i) {
    const Block& b = prob.blocks[i];
    Vec q2;
    if (b.errors.c)
      q2 = p2[i] + g * ui[i].apply(l_new[i] + b.errors.c(n));
    else
      q2 = p2[i] + g * ui[i].apply(l_new[i]);
    require_finite_pd(q2, "the dual correction (q_2)", i, st.n);
    st.v[i] = q2 - t2[i];
    require_finite_pd(st.v[i], "the dual update (v)", i, st.n);
  }

  // q_1 and the primal update: x+ = x - y_1 + q_1 = q_1 + t_1
  Vec acc2 = Vec::Zero(prob.dim);
  if (!prob.C.is_zero()) acc2 += c_new;
  for (int i = 0; i < m; ++i) acc2 += lt_new[i];
  if (prob.primal_errors.c) acc2 += prob.primal_errors.c(n);
  Vec q1 = p1 - g * u0.apply(acc2);
  require_finite_pd(q1, "the primal correction (q_1)", -1, st.n);
  st.x = q1 + t1;
  require_finite_pd(st.x, "the primal update (x)", -1, st.n);

  st.p1_prev = std::move(p1);
  st.p2_prev = std::move(p2);
  st.c_at_p1 = std::move(c_new);
  st.l_at_p1 = std::move(l_new);
  st.lt_at_p2 = std::move(lt_new);
  st.n += 1;
  return st;
}

BlockRunResult run_blocks(const PrimalDualProblem& prob, const SolverConfig& cfg,
                          ProductState st) {
  SolverConfig gate = cfg;
  gate.metrics.mu = prob.common_mu();
  {
    ErrorSchedule agg;
    if (prob.any_errors()) {
      agg.a = [](int) { return Vec(); };  // presence marker for the gate
      agg.sum_bound_a = prob.primal_errors.sum_bound_a;
      agg.sum_bound_b = prob.primal_errors.sum_bound_b;
      agg.sum_bound_c = prob.primal_errors.sum_bound_c;
      for (const auto& b : prob.blocks) {
        agg.sum_bound_a += b.errors.sum_bound_a;
        agg.sum_bound_b += b.errors.sum_bound_b;
        agg.sum_bound_c += b.errors.sum_bound_c;
      }
    }
    gate.errors = agg;
  }
  const ValidationReport rep = validate_config(gate, lipschitz_aggregate(prob));
  if (!rep.ok) throw std::invalid_argument("run_blocks: invalid config: " + rep.message);

  BlockRunResult res;
  res.primal = st.p1_prev;
  res.duals = st.p2_prev;

  const auto t0 = std::chrono::steady_clock::now();
  for (long n = 0; n < cfg.max_iters; ++n) {
    const Vec x_before = st.x;
    const bool warm = !st.fwd_cached;
    st = step_blocks(prob, std::move(st), cfg);
    res.fresh_forward_evals += warm ? 2 : 1;

    const bool tracing_row = n % cfg.trace_every == 0;
    const bool fval_stop = cfg.stop.tol > 0.0 && cfg.stop.kind == StopKind::FvalGap;
    double fval = 0.0;
    bool has_fval = false;
    if (cfg.objective && (tracing_row || fval_stop)) {
      fval = cfg.objective(st.x);
      has_fval = true;
    }
    bool fired = false;
    StopReason reason = StopReason::Budget;
    if (cfg.stop.tol > 0.0) {
      switch (cfg.stop.kind) {
        case StopKind::StepNorm:
          fired = (x_before - st.x).norm() < cfg.stop.tol;
          reason = StopReason::StepNorm;
          break;
        case StopKind::FvalGap:
          fired = has_fval && std::abs(fval - cfg.fval_ref) < cfg.stop.tol;
          reason = StopReason::FvalGap;
          break;
        case StopKind::DistToRef:
          fired = (st.x - cfg.dist_ref).norm() < cfg.stop.tol;
          reason = StopReason::DistToRef;
          break;
      }
    }

    if (tracing_row) {
      TraceRecord rec;
      rec.n = n;
      rec.step_norm = (x_before - st.x).norm();
      rec.residual = (x_before - st.p1_prev).norm();
      rec.fval = fval;
      rec.has_fval = has_fval;
      if (cfg.aux_metric) {
        rec.aux = cfg.aux_metric(st.x);
        rec.has_aux = true;
      }
      rec.elapsed_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      res.trace.push_back(rec);
    }
    res.iterations = n + 1;
    if (fired) {
      res.reason = reason;
      break;
    }
  }

  res.primal = st.p1_prev;
  res.duals = st.p2_prev;
  res.final_state = std::move(st);
  return res;
}

double CertificateReport::max_residual() const {
  double r = primal_residual;
  for (double d : dual_residuals) r = std::max(r, d);
  return r;
}

CertificateReport recover_certificates(const PrimalDualProblem& prob, const ProductState& st) {
  const Metric id = Metric::identity();
  const Vec& xbar = st.p1_prev;
  CertificateReport rep;

  Vec u = prob.z.size() ? Vec(prob.z) : Vec(Vec::Zero(prob.dim));
  for (size_t i = 0; i < prob.blocks.size(); ++i)
    u -= prob.blocks[i].L.adjoint(st.p2_prev[i]);
  if (!prob.C.is_zero()) u -= prob.C(xbar);
  rep.primal_residual = (xbar - prob.primal_resolvent(1.0, id, xbar + u)).norm();

  for (size_t i = 0; i < prob.blocks.size(); ++i) {
    const Block& b = prob.blocks[i];
    Vec w = b.L.apply(xbar);
    if (b.r.size()) w -= b.r;
    const Vec& vbar = st.p2_prev[i];
    rep.dual_residuals.push_back((vbar - b.dual_resolvent(1.0, id, vbar + w)).norm());
  }
  return rep;
}

}  // namespace fbfx
