#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fbfx/imaging.hpp"
#include "fbfx/pgm.hpp"
#include "fbfx/solver.hpp"

namespace fbfx {

/// Desk-scale problems with known zeros, shared by the CLI and the tests.
struct ToyProblem {
  std::string name;
  InclusionProblem prob;
  Vec x0;
  Vec p_init;
  Vec solution;
  double gamma = 0.3;
};

ToyProblem make_toy(const std::string& name);  // stationary | l1quad | bilinear

struct ExperimentSpec {
  enum class Mode { Deblur, Bench, Toy };
  Mode mode = Mode::Deblur;

  std::string image_source = "synthetic:64";  // path or "synthetic:<N>"
  DeblurConfig deblur;
  long max_iters = 1000;
  long ref_iters = 10000;
  int trace_every = 1;
  std::vector<StopRule> stops;  // deblur uses the first; bench runs each
  std::string reference_path;   // cached reference (computed when needed)
  std::string output_dir = "out";
  std::string toy_name = "bilinear";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool allow_unsafe_stepsize = false;
  bool timing_in_trace = false;
};

StopRule parse_stop_rule(const std::string& text);  // "step:1e-2" | "fval:..." | "dist:..."
std::string stop_rule_name(const StopRule& rule);

struct RunReport {
  std::string mode;
  std::string algorithm;  // tseng-ep | tseng-classic
  std::string stop_criterion;
  long iterations = 0;
  double final_isnr = 0.0;
  bool has_isnr = false;
  double final_fval = 0.0;
  bool has_fval = false;
  double distance_to_solution = 0.0;
  bool has_distance = false;
  double cpu_seconds = 0.0;
  long fresh_forward_evals = 0;
  std::string stop_reason;
  std::string trace_path;
  std::string output_image_path;
  std::string reference_path;

  std::string to_json_line() const;
};

ImageGrid load_experiment_image(const std::string& source);

RunReport cmd_deblur(const ExperimentSpec& spec);
std::vector<RunReport> cmd_bench(const ExperimentSpec& spec);
std::string cmd_reference(const ExperimentSpec& spec);
RunReport cmd_toy(const ExperimentSpec& spec);

struct ReferenceSolution {
  Vec x;
  double fval = 0.0;
  long iterations = 0;
  std::string path;
};

ReferenceSolution load_reference(const std::string& json_path);

}  // namespace fbfx
