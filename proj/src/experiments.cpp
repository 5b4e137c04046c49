#include "fbfx/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;

namespace fbfx {

ToyProblem make_toy(const std::string& name) {
  ToyProblem toy;
  toy.name = name;
  if (name == "stationary") {
    toy.prob = {ResolventOperator::identity(), LipschitzMap::zero(), 1};
    toy.prob.B.lipschitz = 1.0;  // harmless cap for the gate
    toy.x0 = Vec::Constant(1, 1.0);
    toy.p_init = toy.x0;
    toy.solution = toy.x0;
    return toy;
  }
  if (name == "l1quad") {
    Proximable l1;
    l1.prox = [](double g, const Vec& x) { return soft_threshold(x, g); };
    LipschitzMap b;
    b.lipschitz = 1.0;
    b.apply = [](const Vec& x) { return Vec(x.array() - 1.0); };
    toy.prob = {resolvent_from_prox(std::move(l1)), std::move(b), 1};
    toy.x0 = Vec::Constant(1, 1.0);
    toy.p_init = toy.x0;
    toy.solution = Vec::Zero(1);
    return toy;
  }
  if (name == "bilinear") {
    LipschitzMap b;
    b.lipschitz = 1.0;
    b.apply = [](const Vec& w) {
      Vec out(2);
      out[0] = w[1];
      out[1] = -w[0];
      return out;
    };
    toy.prob = {ResolventOperator::identity(), std::move(b), 2};
    toy.x0 = Vec::Constant(2, 1.0);
    toy.p_init = toy.x0;
    toy.solution = Vec::Zero(2);
    return toy;
  }
  throw std::invalid_argument("unknown toy problem: " + name);
}

StopRule parse_stop_rule(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("stop rule must look like kind:tol, got " + text);
  const std::string kind = text.substr(0, colon);
  StopRule r;
  r.tol = std::stod(text.substr(colon + 1));
  if (!(r.tol > 0.0)) throw std::invalid_argument("stop tolerance must be positive: " + text);
  if (kind == "step") r.kind = StopKind::StepNorm;
  else if (kind == "fval") r.kind = StopKind::FvalGap;
  else if (kind == "dist") r.kind = StopKind::DistToRef;
  else throw std::invalid_argument("unknown stop kind: " + kind);
  return r;
}

std::string stop_rule_name(const StopRule& rule) {
  std::ostringstream os;
  switch (rule.kind) {
    case StopKind::StepNorm:
      os << "step";
      break;
    case StopKind::FvalGap:
      os << "fval";
      break;
    case StopKind::DistToRef:
      os << "dist";
      break;
  }
  os << ":" << rule.tol;
  return os.str();
}

std::string RunReport::to_json_line() const {
  nlohmann::json j;
  j["mode"] = mode;
  if (!algorithm.empty()) j["algorithm"] = algorithm;
  if (!stop_criterion.empty()) j["stop_criterion"] = stop_criterion;
  j["iterations"] = iterations;
  if (has_isnr) j["final_isnr"] = final_isnr;
  if (has_fval) j["final_fval"] = final_fval;
  if (has_distance) j["distance_to_solution"] = distance_to_solution;
  j["cpu_seconds"] = cpu_seconds;
  j["fresh_forward_evals"] = fresh_forward_evals;
  j["stop_reason"] = stop_reason;
  if (!trace_path.empty()) j["trace"] = trace_path;
  if (!output_image_path.empty()) j["image"] = output_image_path;
  if (!reference_path.empty()) j["reference"] = reference_path;
  return j.dump();
}

ImageGrid load_experiment_image(const std::string& source) {
  if (source.rfind("synthetic:", 0) == 0) {
    const int n = std::stoi(source.substr(10));
    return synthetic_phantom(n);
  }
  if (!fs::exists(source)) throw std::runtime_error("input image not found: " + source);
  return read_pgm(source);
}

namespace {

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string canonical_spec_string(const ExperimentSpec& spec) {
  const DeblurConfig& d = spec.deblur;
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "img=%s;lambda=%.17g;ks=%d;ksig=%.17g;nsig=%.17g;seed=%llu;tau=%s;s1=%s;s2=%s;"
                "gamma=%s;err=%s;init=%.17g;ref_iters=%ld",
                spec.image_source.c_str(), d.lambda_reg, d.kernel_size, d.kernel_sigma,
                d.noise_sigma, static_cast<unsigned long long>(d.noise_seed),
                d.tau_schedule.name().c_str(), d.sigma1_schedule.name().c_str(),
                d.sigma2_schedule.name().c_str(),
                d.gamma_rule == GammaRule::ErrorFree ? "error-free" : "with-error",
                error_rule_name(d.error_rule).c_str(), d.init_scalar, spec.ref_iters);
  return buf;
}

void require_seed_for_noise(const ExperimentSpec& spec) {
  if (spec.deblur.noise_sigma > 0.0 && !spec.seed_set)
    throw std::invalid_argument("--seed is required for noisy runs (noise_sigma > 0)");
}

DeblurSetup assemble_from_spec(const ExperimentSpec& spec, const ImageGrid& img) {
  DeblurConfig cfg = spec.deblur;
  if (spec.seed_set) cfg.noise_seed = spec.seed;
  return assemble_deblur(img, cfg);
}

void gate_stepsize(const ExperimentSpec& spec, const DeblurSetup& setup) {
  SolverConfig probe = SolverConfig::constant_step(setup.gamma, 1);
  const bool error_free = spec.deblur.error_rule == ErrorRule::None;
  const ValidationReport rep = validate_stepsize(probe, setup.beta, setup.mu, error_free);
  if (!rep.ok && !spec.allow_unsafe_stepsize)
    throw std::invalid_argument("refusing to run: " + rep.message +
                                " (pass --allow-unsafe-stepsize to override)");
}

SolverConfig deblur_solver_config(const ExperimentSpec& spec, const DeblurSetup& setup) {
  SolverConfig cfg = SolverConfig::constant_step(setup.gamma, spec.max_iters);
  cfg.trace_every = spec.trace_every;
  cfg.allow_unsafe_stepsize = spec.allow_unsafe_stepsize;
  cfg.objective = setup.objective_callback();
  if (!spec.stops.empty()) cfg.stop = spec.stops.front();
  return cfg;
}

void write_deblur_trace(const std::string& path, const std::vector<TraceRecord>& trace,
                        bool with_timing) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace: " + path);
  out << "n,step_norm,residual,fval,isnr,elapsed_s\n";
  char buf[200];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,", r.n, r.step_norm, r.residual);
    out << buf;
    if (r.has_fval) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.fval);
      out << buf;
    }
    out << ",";
    if (r.has_aux) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.aux);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g\n", with_timing ? r.elapsed_s : 0.0);
    out << buf;
  }
}

std::string reference_key(const ExperimentSpec& spec) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_spec_string(spec))));
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

ReferenceSolution ensure_reference(const ExperimentSpec& spec) {
  if (!spec.reference_path.empty()) return load_reference(spec.reference_path);
  ExperimentSpec ref_spec = spec;
  ref_spec.stops.clear();
  return load_reference(cmd_reference(ref_spec));
}

bool needs_reference(const std::vector<StopRule>& stops) {
  for (const auto& s : stops)
    if (s.kind == StopKind::FvalGap || s.kind == StopKind::DistToRef) return true;
  return false;
}

}  // namespace

ReferenceSolution load_reference(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot open reference: " + json_path);
  nlohmann::json j;
  in >> j;
  ReferenceSolution ref;
  ref.fval = j.at("fval").get<double>();
  ref.iterations = j.at("iterations").get<long>();
  ref.path = json_path;
  const std::string bin =
      (fs::path(json_path).parent_path() / j.at("bin").get<std::string>()).string();
  std::ifstream raw(bin, std::ios::binary);
  if (!raw) throw std::runtime_error("cannot open reference data: " + bin);
  const long count = j.at("dim").get<long>();
  ref.x.resize(count);
  raw.read(reinterpret_cast<char*>(ref.x.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
  if (raw.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
    throw std::runtime_error("truncated reference data: " + bin);
  return ref;
}

std::string cmd_reference(const ExperimentSpec& spec) {
  require_seed_for_noise(spec);
  const ImageGrid img = load_experiment_image(spec.image_source);
  const DeblurSetup setup = assemble_from_spec(spec, img);
  gate_stepsize(spec, setup);

  fs::create_directories(spec.output_dir);
  const std::string key = reference_key(spec);
  const std::string json_path = (fs::path(spec.output_dir) / ("ref_" + key + ".json")).string();
  const std::string bin_name = "ref_" + key + ".bin";
  if (fs::exists(json_path)) return json_path;

  SolverConfig cfg = SolverConfig::constant_step(setup.gamma, spec.ref_iters);
  cfg.trace_every = static_cast<int>(std::max(1L, spec.ref_iters / 100));
  cfg.allow_unsafe_stepsize = spec.allow_unsafe_stepsize;
  BlockRunResult res = run_blocks(setup.problem, cfg, setup.initial_state(spec.deblur.init_scalar));

  const Vec& xref = res.primal;
  const double fval = setup.objective_finite(xref);

  std::string bytes(reinterpret_cast<const char*>(xref.data()), xref.size() * sizeof(double));
  write_file_atomic((fs::path(spec.output_dir) / bin_name).string(), bytes);

  nlohmann::json j;
  j["key"] = key;
  j["spec"] = canonical_spec_string(spec);
  j["iterations"] = res.iterations;
  j["dim"] = static_cast<long>(xref.size());
  j["rows"] = setup.rows;
  j["cols"] = setup.cols;
  j["fval"] = fval;
  j["bin"] = bin_name;
  write_file_atomic(json_path, j.dump(2) + "\n");
  return json_path;
}

RunReport cmd_deblur(const ExperimentSpec& spec) {
  require_seed_for_noise(spec);
  const ImageGrid img = load_experiment_image(spec.image_source);
  const DeblurSetup setup = assemble_from_spec(spec, img);
  gate_stepsize(spec, setup);

  SolverConfig cfg = deblur_solver_config(spec, setup);
  ReferenceSolution ref;
  if (needs_reference(spec.stops)) {
    ref = ensure_reference(spec);
    cfg.fval_ref = ref.fval;
    cfg.dist_ref = ref.x;
  }
  {
    const ImageGrid& orig = setup.original;
    const ImageGrid& obs = setup.observed;
    const int r = setup.rows, c = setup.cols;
    cfg.aux_metric = [orig, obs, r, c](const Vec& x) {
      return isnr(orig, obs, ImageGrid{r, c, x});
    };
  }

  const auto t0 = std::chrono::steady_clock::now();
  BlockRunResult res = run_blocks(setup.problem, cfg, setup.initial_state(spec.deblur.init_scalar));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(spec.output_dir);
  RunReport rep;
  rep.mode = "deblur";
  rep.algorithm = "tseng-ep";
  if (!spec.stops.empty()) rep.stop_criterion = stop_rule_name(spec.stops.front());
  rep.iterations = res.iterations;
  rep.cpu_seconds = secs;
  rep.fresh_forward_evals = res.fresh_forward_evals;
  rep.stop_reason = stop_reason_name(res.reason);
  rep.reference_path = ref.path;

  const ImageGrid sol{setup.rows, setup.cols, res.primal};
  rep.final_isnr = isnr(setup.original, setup.observed, sol);
  rep.has_isnr = true;
  rep.final_fval = setup.objective_finite(sol.px);
  rep.has_fval = true;

  rep.trace_path = (fs::path(spec.output_dir) / "deblur_trace.csv").string();
  write_deblur_trace(rep.trace_path, res.trace, spec.timing_in_trace);
  rep.output_image_path = (fs::path(spec.output_dir) / "deblur_result.pgm").string();
  write_pgm(rep.output_image_path, sol);
  write_pgm((fs::path(spec.output_dir) / "deblur_observed.pgm").string(), setup.observed);
  return rep;
}

std::vector<RunReport> cmd_bench(const ExperimentSpec& spec) {
  std::vector<RunReport> reports;
  if (spec.stops.empty()) return reports;

  require_seed_for_noise(spec);
  const ImageGrid img = load_experiment_image(spec.image_source);
  const DeblurSetup setup = assemble_from_spec(spec, img);
  gate_stepsize(spec, setup);

  ReferenceSolution ref;
  if (needs_reference(spec.stops)) ref = ensure_reference(spec);

  const ProductInclusion pi = build_product_inclusion(setup.problem);
  const ProductState init = setup.initial_state(spec.deblur.init_scalar);
  const Vec x0 = pi.pack(init.x, init.v);
  const Vec p0 = pi.pack(init.p1_prev, init.p2_prev);
  const int n = setup.rows * setup.cols;

  fs::create_directories(spec.output_dir);
  for (const StopRule& stop : spec.stops) {
    for (const bool classic : {true, false}) {
      SolverConfig cfg = pi.configure(SolverConfig::constant_step(setup.gamma, spec.max_iters));
      if (classic) {
        cfg.metrics = MetricSchedule::identity();
        cfg.errors = ErrorSchedule::none();
      }
      cfg.trace_every = spec.trace_every;
      cfg.allow_unsafe_stepsize = spec.allow_unsafe_stepsize;
      cfg.stop = stop;
      cfg.norm_dim = n;  // criteria act on the image iterate
      const auto obj = setup.objective_callback();
      cfg.objective = [obj, n](const Vec& w) { return obj(w.head(n)); };
      cfg.fval_ref = ref.fval;
      if (ref.x.size()) {
        cfg.dist_ref = Vec::Zero(pi.total_dim());
        cfg.dist_ref.head(n) = ref.x;
      }

      const auto t0 = std::chrono::steady_clock::now();
      const RunResult res = classic ? run_classic(pi.flat, cfg, x0) : run(pi.flat, cfg, x0, p0);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      RunReport rep;
      rep.mode = "bench";
      rep.algorithm = classic ? "tseng-classic" : "tseng-ep";
      rep.stop_criterion = stop_rule_name(stop);
      rep.iterations = res.iterations;
      rep.cpu_seconds = secs;
      rep.fresh_forward_evals = res.fresh_forward_evals;
      rep.stop_reason = stop_reason_name(res.reason);
      rep.reference_path = ref.path;

      const ImageGrid sol{setup.rows, setup.cols, res.solution.head(n)};
      rep.final_isnr = isnr(setup.original, setup.observed, sol);
      rep.has_isnr = true;
      rep.final_fval = setup.objective_finite(sol.px);
      rep.has_fval = true;

      std::ostringstream name;
      name << "bench_" << (classic ? "classic" : "ep") << "_"
           << (stop.kind == StopKind::StepNorm ? "step"
                                               : stop.kind == StopKind::FvalGap ? "fval" : "dist")
           << ".csv";
      rep.trace_path = (fs::path(spec.output_dir) / name.str()).string();
      std::ofstream out(rep.trace_path);
      write_trace_csv(out, res.trace, spec.timing_in_trace);
      reports.push_back(std::move(rep));
    }
  }
  return reports;
}

RunReport cmd_toy(const ExperimentSpec& spec) {
  const ToyProblem toy = make_toy(spec.toy_name);
  SolverConfig cfg = SolverConfig::constant_step(toy.gamma, spec.max_iters);
  cfg.trace_every = spec.trace_every;
  if (!spec.stops.empty()) cfg.stop = spec.stops.front();

  const auto t0 = std::chrono::steady_clock::now();
  const RunResult res = run(toy.prob, cfg, toy.x0, toy.p_init);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(spec.output_dir);
  RunReport rep;
  rep.mode = "toy:" + toy.name;
  rep.algorithm = "tseng-ep";
  rep.iterations = res.iterations;
  rep.cpu_seconds = secs;
  rep.fresh_forward_evals = res.fresh_forward_evals;
  rep.stop_reason = stop_reason_name(res.reason);
  rep.distance_to_solution = (res.solution - toy.solution).norm();
  rep.has_distance = true;
  rep.trace_path = (fs::path(spec.output_dir) / ("toy_" + toy.name + ".csv")).string();
  std::ofstream out(rep.trace_path);
  write_trace_csv(out, res.trace, spec.timing_in_trace);
  return rep;
}

}  // namespace fbfx
