#pragma once

#include <cstdint>
#include <string>

#include "fbfx/primal_dual.hpp"

namespace fbfx {

/// Grayscale image, row-major, pixel values normalized to [0,1] for problem
/// inputs and outputs.
struct ImageGrid {
  int rows = 0, cols = 0;
  Vec px;

  double& at(int i, int j) { return px[i * cols + j]; }
  double at(int i, int j) const { return px[i * cols + j]; }
  int size() const { return rows * cols; }

  static ImageGrid constant(int rows, int cols, double v);
  static ImageGrid from_vec(int rows, int cols, Vec v);
};

/// Forward-difference field: per pixel the pair (p, q) of vertical and
/// horizontal differences, stored as two row-major planes.
struct GradientField {
  int rows = 0, cols = 0;
  Vec p, q;

  Vec packed() const;  // [p; q]
  static GradientField from_packed(int rows, int cols, const Vec& w);
};

/// Forward differences with a zero last row/column (Neumann convention).
GradientField discrete_gradient(const ImageGrid& img);
/// Negative discrete divergence matching discrete_gradient's boundary
/// convention, so that <Lx, w> = <x, L*w> exactly.
ImageGrid gradient_adjoint(const GradientField& w);
/// The same pair as a LinearMap on packed vectors; norm_bound = sqrt(8).
LinearMap gradient_map(int rows, int cols);

double cross_norm(const GradientField& w);  // sum of per-pixel magnitudes
double tv_iso(const ImageGrid& img);

GradientField project_tv_dual_ball(const GradientField& w, double lambda);

/// 2-D convolution with a normalized truncated Gaussian kernel under
/// symmetric (reflexive) boundary extension. The kernel is even and the
/// extension half-sample symmetric, which makes the operator self-adjoint;
/// rows sum to one, so norm_bound = 1 and constant images are fixed points.
LinearMap gaussian_blur(int rows, int cols, int kernel_size, double kernel_sigma);

/// 10 log10(||x - b||^2 / ||x - x_n||^2); +inf signals exact recovery.
double isnr(const ImageGrid& original, const ImageGrid& observed, const ImageGrid& current);

/// Deterministic piecewise-constant test image (values in [0,1]).
ImageGrid synthetic_phantom(int n);

enum class GammaRule { ErrorFree, WithError };
enum class ErrorRule { None, InvK2, InvK5, InvKK, HalfPowK };

double error_sequence(ErrorRule rule, int k);  // k >= 1
double error_tail_bound(ErrorRule rule);       // sum_{k>=1} of the scalar rule
ErrorRule parse_error_rule(const std::string& text);
std::string error_rule_name(ErrorRule rule);

struct DeblurConfig {
  double lambda_reg = 0.003;
  int kernel_size = 9;
  double kernel_sigma = 4.0;
  double noise_sigma = 1e-3;
  std::uint64_t noise_seed = 0;
  ScheduleRule tau_schedule;     // primal metric U_n = tau_n Id
  ScheduleRule sigma1_schedule;  // blur/l1 dual metric
  ScheduleRule sigma2_schedule;  // TV dual metric
  GammaRule gamma_rule = GammaRule::ErrorFree;
  ErrorRule error_rule = ErrorRule::None;
  double init_scalar = 0.4660;
};

/// The assembled problem: block 1 carries the blur with the l1-conjugate
/// prox (clamp of p - gamma*b to [-1,1]), block 2 the discrete gradient with
/// the TV dual-ball projection, the primal part the box projection, and the
/// smooth part the gradient of lambda*||x||^2. r_i and z are zero.
struct DeblurSetup {
  PrimalDualProblem problem;
  ImageGrid original;
  ImageGrid observed;
  LinearMap blur;
  int rows = 0, cols = 0;
  double lambda_reg = 0.0;
  double beta = 0.0;   // lipschitz_aggregate of the problem
  double mu = 0.0;     // common metric bound
  double gamma = 0.0;  // step from the configured rule

  ProductState initial_state(double init_scalar) const;
  /// ||Ax - b||_1 + lambda (TV_iso(x) + ||x||^2), no box indicator
  double objective_finite(const Vec& x) const;
  std::function<double(const Vec&)> objective_callback() const;
};

DeblurSetup assemble_deblur(const ImageGrid& original, const DeblurConfig& cfg);

/// The full objective with the box constraint: +inf outside [0,1]^n.
double objective_value(const DeblurSetup& setup, const ImageGrid& x);

}  // namespace fbfx
