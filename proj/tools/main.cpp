#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fbfx/experiments.hpp"

namespace {

struct CliOptions {
  fbfx::ExperimentSpec spec;
  std::string tau = "const:1";
  std::string sigma1 = "const:1";
  std::string sigma2 = "const:1";
  std::string gamma_rule = "error-free";
  std::string errors = "none";
  std::vector<std::string> stops;
};

// Flat key=value config ('#' comments). Keys are the long option names
// without the leading dashes; command-line flags override file values.
void apply_config_file(CliOptions& opt, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    if (strip(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = strip(line.substr(0, eq));
    const std::string val = strip(line.substr(eq + 1));

    if (key == "image") opt.spec.image_source = val;
    else if (key == "lambda") opt.spec.deblur.lambda_reg = std::stod(val);
    else if (key == "kernel-size") opt.spec.deblur.kernel_size = std::stoi(val);
    else if (key == "kernel-sigma") opt.spec.deblur.kernel_sigma = std::stod(val);
    else if (key == "noise-sigma") opt.spec.deblur.noise_sigma = std::stod(val);
    else if (key == "init") opt.spec.deblur.init_scalar = std::stod(val);
    else if (key == "gamma-rule") opt.gamma_rule = val;
    else if (key == "tau") opt.tau = val;
    else if (key == "sigma1") opt.sigma1 = val;
    else if (key == "sigma2") opt.sigma2 = val;
    else if (key == "errors") opt.errors = val;
    else if (key == "stop") opt.stops.push_back(val);
    else if (key == "max-iters") opt.spec.max_iters = std::stol(val);
    else if (key == "ref-iters") opt.spec.ref_iters = std::stol(val);
    else if (key == "trace-every") opt.spec.trace_every = std::stoi(val);
    else if (key == "reference") opt.spec.reference_path = val;
    else if (key == "out") opt.spec.output_dir = val;
    else if (key == "name") opt.spec.toy_name = val;
    else if (key == "seed") {
      opt.spec.seed = std::stoull(val);
      opt.spec.seed_set = true;
    } else if (key == "allow-unsafe-stepsize") {
      opt.spec.allow_unsafe_stepsize = val == "1" || val == "true";
    } else if (key == "timing") {
      opt.spec.timing_in_trace = val == "1" || val == "true";
    } else {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown key '" + key +
                               "'");
    }
  }
}

void add_common_options(CLI::App* cmd, CliOptions& opt, std::string& config_path) {
  cmd->add_option("--config", config_path, "flat key=value config file (flags override)");
  cmd->add_option("--image", opt.spec.image_source, "input image path or synthetic:<N>");
  cmd->add_option("--lambda", opt.spec.deblur.lambda_reg, "regularization weight");
  cmd->add_option("--kernel-size", opt.spec.deblur.kernel_size, "blur kernel size (odd)");
  cmd->add_option("--kernel-sigma", opt.spec.deblur.kernel_sigma, "blur kernel std dev");
  cmd->add_option("--noise-sigma", opt.spec.deblur.noise_sigma, "additive noise std dev");
  cmd->add_option("--init", opt.spec.deblur.init_scalar, "initial fill value for x and p");
  cmd->add_option("--gamma-rule", opt.gamma_rule, "step rule: error-free | with-error");
  cmd->add_option("--tau", opt.tau, "primal metric schedule");
  cmd->add_option("--sigma1", opt.sigma1, "data-block dual metric schedule");
  cmd->add_option("--sigma2", opt.sigma2, "TV-block dual metric schedule");
  cmd->add_option("--errors", opt.errors, "error rule: none|inv-k2|inv-k5|inv-kk|half-k");
  cmd->add_option("--stop", opt.stops, "stop rule(s) kind:tol with kind in {step,fval,dist}");
  cmd->add_option("--max-iters", opt.spec.max_iters, "iteration budget");
  cmd->add_option("--ref-iters", opt.spec.ref_iters, "reference run length");
  cmd->add_option("--trace-every", opt.spec.trace_every, "trace stride");
  cmd->add_option("--reference", opt.spec.reference_path, "cached reference solution (json)");
  cmd->add_option("--out", opt.spec.output_dir, "output directory");
  cmd->add_flag("--allow-unsafe-stepsize", opt.spec.allow_unsafe_stepsize,
                "run even when the step size violates its bound");
  cmd->add_flag("--timing", opt.spec.timing_in_trace, "write wall time into trace CSVs");
  auto* seed = cmd->add_option("--seed", opt.spec.seed, "noise seed (required for noisy runs)");
  cmd->callback([&opt, seed] {
    if (seed->count() > 0) opt.spec.seed_set = true;
    opt.spec.deblur.tau_schedule = fbfx::ScheduleRule::parse(opt.tau);
    opt.spec.deblur.sigma1_schedule = fbfx::ScheduleRule::parse(opt.sigma1);
    opt.spec.deblur.sigma2_schedule = fbfx::ScheduleRule::parse(opt.sigma2);
    opt.spec.deblur.error_rule = fbfx::parse_error_rule(opt.errors);
    if (opt.gamma_rule == "error-free") opt.spec.deblur.gamma_rule = fbfx::GammaRule::ErrorFree;
    else if (opt.gamma_rule == "with-error") opt.spec.deblur.gamma_rule = fbfx::GammaRule::WithError;
    else throw CLI::ValidationError("--gamma-rule", "must be error-free or with-error");
    opt.spec.stops.clear();
    for (const auto& s : opt.stops) opt.spec.stops.push_back(fbfx::parse_stop_rule(s));
  });
}

// the config file must apply before CLI11 writes flag values, so --config is
// located with a light pre-scan of argv
std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Operator-splitting solvers and the TV deblurring experiment"};
  app.require_subcommand(1);

  CliOptions deblur_opt, bench_opt, ref_opt, toy_opt;
  std::string config_path;
  auto* deblur = app.add_subcommand("deblur", "run the deblurring experiment");
  add_common_options(deblur, deblur_opt, config_path);
  auto* bench = app.add_subcommand("bench", "compare the classical and extrapolated schemes");
  add_common_options(bench, bench_opt, config_path);
  auto* reference =
      app.add_subcommand("reference", "compute and cache the long-run reference solution");
  add_common_options(reference, ref_opt, config_path);
  auto* toy = app.add_subcommand("toy", "run a desk-scale problem with a known zero");
  add_common_options(toy, toy_opt, config_path);
  toy->add_option("--name", toy_opt.spec.toy_name, "stationary | l1quad | bilinear");

  try {
    const std::string cfg = find_config_arg(argc, argv);
    if (!cfg.empty())
      for (CliOptions* opt : {&deblur_opt, &bench_opt, &ref_opt, &toy_opt})
        apply_config_file(*opt, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (deblur->parsed()) {
      deblur_opt.spec.mode = fbfx::ExperimentSpec::Mode::Deblur;
      std::cout << fbfx::cmd_deblur(deblur_opt.spec).to_json_line() << "\n";
    } else if (bench->parsed()) {
      bench_opt.spec.mode = fbfx::ExperimentSpec::Mode::Bench;
      for (const auto& rep : fbfx::cmd_bench(bench_opt.spec))
        std::cout << rep.to_json_line() << "\n";
    } else if (reference->parsed()) {
      std::cout << fbfx::cmd_reference(ref_opt.spec) << "\n";
    } else if (toy->parsed()) {
      toy_opt.spec.mode = fbfx::ExperimentSpec::Mode::Toy;
      std::cout << fbfx::cmd_toy(toy_opt.spec).to_json_line() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
