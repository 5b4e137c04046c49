#include "fbfx/imaging.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fbfx {

ImageGrid ImageGrid::constant(int rows, int cols, double v) {
  return {rows, cols, Vec::Constant(rows * cols, v)};
}

ImageGrid ImageGrid::from_vec(int rows, int cols, Vec v) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols)
    throw std::invalid_argument("ImageGrid::from_vec: size mismatch");
  return {rows, cols, std::move(v)};
}

Vec GradientField::packed() const {
  Vec w(2 * p.size());
  w.head(p.size()) = p;
  w.tail(q.size()) = q;
  return w;
}

GradientField GradientField::from_packed(int rows, int cols, const Vec& w) {
  const int n = rows * cols;
  if (w.size() != 2 * n) throw std::invalid_argument("GradientField::from_packed: size mismatch");
  GradientField f{rows, cols, w.head(n), w.tail(n)};
  return f;
}

GradientField discrete_gradient(const ImageGrid& img) {
  const int m = img.rows, n = img.cols;
  GradientField f{m, n, Vec::Zero(m * n), Vec::Zero(m * n)};
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      if (i + 1 < m) f.p[i * n + j] = img.at(i + 1, j) - img.at(i, j);
      if (j + 1 < n) f.q[i * n + j] = img.at(i, j + 1) - img.at(i, j);
    }
  return f;
}

ImageGrid gradient_adjoint(const GradientField& w) {
  const int m = w.rows, n = w.cols;
  ImageGrid out = ImageGrid::constant(m, n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      if (i > 0) s += w.p[(i - 1) * n + j];
      if (i + 1 < m) s -= w.p[i * n + j];
      if (j > 0) s += w.q[i * n + (j - 1)];
      if (j + 1 < n) s -= w.q[i * n + j];
      out.at(i, j) = s;
    }
  return out;
}

LinearMap gradient_map(int rows, int cols) {
  LinearMap l;
  l.in_dim = rows * cols;
  l.out_dim = 2 * rows * cols;
  l.norm_bound = std::sqrt(8.0);
  l.apply = [rows, cols](const Vec& x) {
    return discrete_gradient(ImageGrid{rows, cols, x}).packed();
  };
  l.adjoint = [rows, cols](const Vec& w) {
    return gradient_adjoint(GradientField::from_packed(rows, cols, w)).px;
  };
  return l;
}

double cross_norm(const GradientField& w) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < w.p.size(); ++k)
    s += std::sqrt(w.p[k] * w.p[k] + w.q[k] * w.q[k]);
  return s;
}

double tv_iso(const ImageGrid& img) {
  const int m = img.rows, n = img.cols;
  double s = 0.0;
  for (int i = 0; i + 1 < m; ++i)
    for (int j = 0; j + 1 < n; ++j) {
      const double dv = img.at(i + 1, j) - img.at(i, j);
      const double dh = img.at(i, j + 1) - img.at(i, j);
      s += std::sqrt(dv * dv + dh * dh);
    }
  for (int i = 0; i + 1 < m; ++i) s += std::abs(img.at(i + 1, n - 1) - img.at(i, n - 1));
  for (int j = 0; j + 1 < n; ++j) s += std::abs(img.at(m - 1, j + 1) - img.at(m - 1, j));
  return s;
}

GradientField project_tv_dual_ball(const GradientField& w, double lambda) {
  auto [p, q] = project_pair_ball(w.p, w.q, lambda);
  return GradientField{w.rows, w.cols, std::move(p), std::move(q)};
}

namespace {

int reflect_index(int t, int m) {
  // half-sample symmetric extension: ..., x1, x0 | x0, x1, ...
  while (t < 0 || t >= m) {
    if (t < 0) t = -t - 1;
    if (t >= m) t = 2 * m - 1 - t;
  }
  return t;
}

}  // namespace

LinearMap gaussian_blur(int rows, int cols, int kernel_size, double kernel_sigma) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw std::invalid_argument("gaussian_blur: kernel size must be odd and >= 1");
  const int h = kernel_size / 2;
  Eigen::MatrixXd k(kernel_size, kernel_size);
  if (kernel_size == 1) {
    k(0, 0) = 1.0;
  } else {
    if (!(kernel_sigma > 0.0))
      throw std::invalid_argument("gaussian_blur: kernel sigma must be positive");
    for (int di = -h; di <= h; ++di)
      for (int dj = -h; dj <= h; ++dj)
        k(di + h, dj + h) = std::exp(-(di * di + dj * dj) / (2.0 * kernel_sigma * kernel_sigma));
    k /= k.sum();
  }

  auto kern = std::make_shared<Eigen::MatrixXd>(std::move(k));
  LinearMap l;
  l.in_dim = l.out_dim = rows * cols;
  l.norm_bound = 1.0;
  l.apply = [kern, rows, cols, h](const Vec& x) {
    Vec out(rows * cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        double s = 0.0;
        for (int di = -h; di <= h; ++di) {
          const int ii = reflect_index(i + di, rows);
          for (int dj = -h; dj <= h; ++dj) {
            const int jj = reflect_index(j + dj, cols);
            s += (*kern)(di + h, dj + h) * x[ii * cols + jj];
          }
        }
        out[i * cols + j] = s;
      }
    return out;
  };
  l.adjoint = l.apply;  // even kernel + symmetric extension
  return l;
}

double isnr(const ImageGrid& original, const ImageGrid& observed, const ImageGrid& current) {
  const double num = (original.px - observed.px).squaredNorm();
  const double den = (original.px - current.px).squaredNorm();
  if (den == 0.0) return std::numeric_limits<double>::infinity();  // exact recovery
  return 10.0 * std::log10(num / den);
}

ImageGrid synthetic_phantom(int n) {
  if (n < 2) throw std::invalid_argument("synthetic_phantom: size must be >= 2");
  ImageGrid img = ImageGrid::constant(n, n, 0.15);
  const auto lo = [n](double f) { return static_cast<int>(f * n); };
  for (int i = lo(0.20); i < lo(0.60); ++i)
    for (int j = lo(0.12); j < lo(0.48); ++j) img.at(i, j) = 0.85;
  const double cx = 0.64 * n, cy = 0.62 * n, rad = 0.20 * n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if ((i - cy) * (i - cy) + (j - cx) * (j - cx) <= rad * rad) img.at(i, j) = 0.55;
  for (int i = lo(0.08); i < lo(0.20); ++i)
    for (int j = lo(0.62); j < lo(0.86); ++j) img.at(i, j) = 1.0;
  return img;
}

double error_sequence(ErrorRule rule, int k) {
  if (k < 1) throw std::invalid_argument("error_sequence: k must be >= 1");
  const double kd = static_cast<double>(k);
  switch (rule) {
    case ErrorRule::None:
      return 0.0;
    case ErrorRule::InvK2:
      return 1.0 / (kd * kd);
    case ErrorRule::InvK5:
      return 1.0 / std::pow(kd, 5.0);
    case ErrorRule::InvKK:
      return std::pow(kd, -kd);
    case ErrorRule::HalfPowK:
      return std::pow(0.5, kd);
  }
  return 0.0;
}

double error_tail_bound(ErrorRule rule) {
  switch (rule) {
    case ErrorRule::None:
      return 0.0;
    case ErrorRule::InvK2:
      return M_PI * M_PI / 6.0;
    case ErrorRule::InvK5:
      return 1.0369277551433699;  // zeta(5)
    case ErrorRule::InvKK:
      return 1.2912859970626636;  // sum k^-k
    case ErrorRule::HalfPowK:
      return 1.0;
  }
  return 0.0;
}

ErrorRule parse_error_rule(const std::string& text) {
  if (text == "none") return ErrorRule::None;
  if (text == "inv-k2") return ErrorRule::InvK2;
  if (text == "inv-k5") return ErrorRule::InvK5;
  if (text == "inv-kk") return ErrorRule::InvKK;
  if (text == "half-k") return ErrorRule::HalfPowK;
  throw std::invalid_argument("unknown error rule: " + text);
}

std::string error_rule_name(ErrorRule rule) {
  switch (rule) {
    case ErrorRule::None:
      return "none";
    case ErrorRule::InvK2:
      return "inv-k2";
    case ErrorRule::InvK5:
      return "inv-k5";
    case ErrorRule::InvKK:
      return "inv-kk";
    case ErrorRule::HalfPowK:
      return "half-k";
  }
  return "";
}

namespace {

ErrorSchedule constant_vector_errors(ErrorRule rule, int dim) {
  ErrorSchedule e;
  if (rule == ErrorRule::None) return e;
  auto seq = [rule, dim](int n) { return Vec::Constant(dim, error_sequence(rule, n + 1)); };
  e.a = seq;
  e.b = seq;
  e.c = seq;
  const double bound = std::sqrt(static_cast<double>(dim)) * error_tail_bound(rule);
  e.sum_bound_a = e.sum_bound_b = e.sum_bound_c = bound;
  return e;
}

}  // namespace

ProductState DeblurSetup::initial_state(double init_scalar) const {
  const int n = rows * cols;
  Vec x0 = Vec::Constant(n, init_scalar);
  std::vector<Vec> v0 = {Vec::Zero(n), Vec::Zero(2 * n)};
  Vec p1 = Vec::Constant(n, init_scalar);
  std::vector<Vec> p2 = {Vec::Constant(n, init_scalar), Vec::Constant(2 * n, init_scalar)};
  return initial_product_state(problem, std::move(x0), std::move(v0), std::move(p1),
                               std::move(p2));
}

double DeblurSetup::objective_finite(const Vec& x) const {
  const double data = (blur.apply(x) - observed.px).lpNorm<1>();
  const ImageGrid img{rows, cols, x};
  return data + lambda_reg * (tv_iso(img) + x.squaredNorm());
}

std::function<double(const Vec&)> DeblurSetup::objective_callback() const {
  const LinearMap a = blur;
  const Vec b = observed.px;
  const double lam = lambda_reg;
  const int r = rows, c = cols;
  return [a, b, lam, r, c](const Vec& x) {
    const double data = (a.apply(x) - b).lpNorm<1>();
    return data + lam * (tv_iso(ImageGrid{r, c, x}) + x.squaredNorm());
  };
}

DeblurSetup assemble_deblur(const ImageGrid& original, const DeblurConfig& cfg) {
  if (!(cfg.lambda_reg > 0.0)) throw std::invalid_argument("assemble_deblur: lambda must be > 0");
  DeblurSetup s;
  s.rows = original.rows;
  s.cols = original.cols;
  s.original = original;
  s.lambda_reg = cfg.lambda_reg;
  const int n = s.rows * s.cols;

  s.blur = gaussian_blur(s.rows, s.cols, cfg.kernel_size, cfg.kernel_sigma);
  Vec degraded = s.blur.apply(original.px);
  if (cfg.noise_sigma > 0.0) {
    Rng rng(cfg.noise_seed);
    for (int i = 0; i < n; ++i) degraded[i] += cfg.noise_sigma * rng.normal();
  }
  s.observed = ImageGrid::from_vec(s.rows, s.cols, clamp(degraded, 0.0, 1.0));

  PrimalDualProblem prob;
  prob.dim = n;
  prob.primal_resolvent = resolvent_box01();
  prob.C = quadratic_gradient_map(cfg.lambda_reg);
  prob.primal_metrics = cfg.tau_schedule.schedule();
  prob.primal_errors = constant_vector_errors(cfg.error_rule, n);

  {
    Block data_block;
    data_block.L = s.blur;
    Proximable l1conj;
    const Vec b = s.observed.px;
    l1conj.prox = [b](double g, const Vec& p) { return prox_l1_conj(p, g, b); };
    data_block.dual_resolvent = resolvent_from_conj_prox(std::move(l1conj));
    data_block.metrics = cfg.sigma1_schedule.schedule();
    data_block.errors = constant_vector_errors(cfg.error_rule, n);
    prob.blocks.push_back(std::move(data_block));
  }
  {
    Block tv_block;
    tv_block.L = gradient_map(s.rows, s.cols);
    const double lam = cfg.lambda_reg;
    const int half = n;
    tv_block.dual_resolvent.resolve = [lam, half](double, const Metric& u, const Vec& w) {
      const double sigma = u.scalar_value();
      const auto p = w.head(half);
      const auto q = w.tail(half);
      auto [po, qo] = sigma == 1.0 ? project_pair_ball(p, q, lam)
                                   : project_pair_ball_scaled(p, q, lam, sigma);
      Vec out(2 * half);
      out.head(half) = po;
      out.tail(half) = qo;
      return out;
    };
    tv_block.metrics = cfg.sigma2_schedule.schedule();
    tv_block.errors = constant_vector_errors(cfg.error_rule, 2 * n);
    prob.blocks.push_back(std::move(tv_block));
  }

  s.beta = lipschitz_aggregate(prob);
  s.mu = prob.common_mu();
  s.gamma = cfg.gamma_rule == GammaRule::ErrorFree
                ? 1.0 / (2.0 * s.beta + 0.1)
                : 1.0 / (std::sqrt(10.0) * s.mu * (s.beta + 1.0));
  s.problem = std::move(prob);
  return s;
}

double objective_value(const DeblurSetup& setup, const ImageGrid& x) {
  if (x.px.size() == 0 || x.px.minCoeff() < 0.0 || x.px.maxCoeff() > 1.0)
    return std::numeric_limits<double>::infinity();
  return setup.objective_finite(x.px);
}

}  // namespace fbfx
