#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <Eigen/Dense>

#include "fbfx/imaging.hpp"
#include "fbfx/pgm.hpp"
#include "oracles.hpp"

using namespace fbfx;

namespace {

ImageGrid random_image(int rows, int cols, Rng& rng) {
  return ImageGrid::from_vec(rows, cols, rng.uniform_vec(rows * cols, 0.0, 1.0));
}

}  // namespace

TEST_CASE("discrete gradient") {
  const ImageGrid flat = ImageGrid::constant(4, 5, 0.7);
  const GradientField g0 = discrete_gradient(flat);
  CHECK(g0.p.norm() == doctest::Approx(0.0));
  CHECK(g0.q.norm() == doctest::Approx(0.0));

  // 2x2 image [[0,1],[0,1]]: vertical differences vanish, horizontal are 1
  ImageGrid img = ImageGrid::constant(2, 2, 0.0);
  img.at(0, 1) = 1.0;
  img.at(1, 1) = 1.0;
  const GradientField g = discrete_gradient(img);
  CHECK(g.p.norm() == doctest::Approx(0.0));
  CHECK(g.q[0] == doctest::Approx(1.0));
  CHECK(g.q[1] == doctest::Approx(0.0));  // last column
  CHECK(g.q[2] == doctest::Approx(1.0));
  CHECK(g.q[3] == doctest::Approx(0.0));
}

TEST_CASE("gradient adjoint identity") {
  Rng rng(3);
  for (const int size : {4, 8, 13}) {
    const LinearMap l = gradient_map(size, size + 1);
    for (int t = 0; t < 100; ++t) {
      const Vec x = rng.uniform_vec(l.in_dim, -1, 1);
      const Vec w = rng.uniform_vec(l.out_dim, -1, 1);
      const double lhs = l.apply(x).dot(w);
      const double rhs = x.dot(l.adjoint(w));
      CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + x.norm() * w.norm()));
    }
  }

  const GradientField zero{3, 3, Vec::Zero(9), Vec::Zero(9)};
  CHECK(gradient_adjoint(zero).px.norm() == doctest::Approx(0.0));

  // dense transpose oracle at 4x4
  const LinearMap l = gradient_map(4, 4);
  const Eigen::MatrixXd a = oracle::materialize(l);
  Eigen::MatrixXd adj(l.in_dim, l.out_dim);
  for (int j = 0; j < l.out_dim; ++j) {
    Vec e = Vec::Zero(l.out_dim);
    e[j] = 1.0;
    adj.col(j) = l.adjoint(e);
  }
  CHECK((adj - a.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("gradient norm bound") {
  for (const int size : {4, 16, 64}) {
    const LinearMap l = gradient_map(size, size);
    const double est = power_iteration_norm(l, 600, 7);
    CHECK(est * est <= 8.0 + 1e-9);
  }
  // dense singular value oracle at 16x16
  const LinearMap l = gradient_map(16, 16);
  const Eigen::MatrixXd a = oracle::materialize(l);
  const double svd_norm = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
  const double est = power_iteration_norm(l, 2000, 7);
  CHECK(std::abs(est - svd_norm) <= 1e-3);
  CHECK(svd_norm <= std::sqrt(8.0) + 1e-12);
}

TEST_CASE("isotropic TV") {
  CHECK(tv_iso(ImageGrid::constant(5, 7, 0.3)) == doctest::Approx(0.0));

  ImageGrid img = ImageGrid::constant(2, 2, 0.0);
  img.at(0, 1) = 1.0;
  img.at(1, 1) = 1.0;
  CHECK(tv_iso(img) == doctest::Approx(2.0));

  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    const ImageGrid x = random_image(8, 8, rng);
    CHECK(std::abs(tv_iso(x) - cross_norm(discrete_gradient(x))) <= 1e-12);
  }
}

TEST_CASE("TV dual ball projection on fields") {
  GradientField w{1, 1, Vec::Constant(1, 3.0), Vec::Constant(1, 4.0)};
  const GradientField out = project_tv_dual_ball(w, 1.0);
  CHECK(out.p[0] == doctest::Approx(0.6));
  CHECK(out.q[0] == doctest::Approx(0.8));
}

TEST_CASE("gaussian blur operator") {
  // kernel size 1 is the identity
  const LinearMap id = gaussian_blur(4, 4, 1, 4.0);
  Rng rng(13);
  const Vec x = rng.uniform_vec(16, 0, 1);
  CHECK((id.apply(x) - x).norm() == doctest::Approx(0.0));

  // constant images are fixed points (kernel sums to one)
  const LinearMap blur = gaussian_blur(8, 8, 5, 2.0);
  const Vec c = Vec::Constant(64, 0.42);
  CHECK((blur.apply(c) - c).cwiseAbs().maxCoeff() <= 1e-12);

  // self-adjointness on random pairs at 16x16
  const LinearMap blur9 = gaussian_blur(16, 16, 9, 4.0);
  for (int t = 0; t < 50; ++t) {
    const Vec a = rng.uniform_vec(256, -1, 1);
    const Vec b = rng.uniform_vec(256, -1, 1);
    CHECK(std::abs(blur9.apply(a).dot(b) - a.dot(blur9.adjoint(b))) <=
          1e-10 * (1.0 + a.norm() * b.norm()));
  }

  // operator norm stays within the certified bound
  const double est = power_iteration_norm(blur9, 400, 5);
  CHECK(est <= 1.0 + 1e-9);
}

TEST_CASE("isnr") {
  const ImageGrid orig = ImageGrid::constant(2, 2, 0.5);
  ImageGrid obs = orig;
  obs.at(0, 0) = 0.9;
  CHECK(isnr(orig, obs, obs) == doctest::Approx(0.0));

  // ||x-b||^2 = 10 ||x-x_n||^2 -> 10 dB
  ImageGrid cur = orig;
  cur.at(0, 0) = 0.5 + 0.4 / std::sqrt(10.0);
  CHECK(isnr(orig, obs, cur) == doctest::Approx(10.0));

  // ratio 4 -> 10 log10 4
  ImageGrid obs2 = orig, cur2 = orig;
  obs2.at(0, 0) = 0.5 + 10.0;
  cur2.at(0, 0) = 0.5 + 5.0;
  CHECK(isnr(orig, obs2, cur2) == doctest::Approx(10.0 * std::log10(4.0)));

  CHECK(std::isinf(isnr(orig, obs, orig)));  // exact recovery
}

TEST_CASE("error sequences") {
  CHECK(error_sequence(ErrorRule::InvK2, 2) == doctest::Approx(0.25));
  CHECK(error_sequence(ErrorRule::HalfPowK, 3) == doctest::Approx(0.125));
  CHECK(error_sequence(ErrorRule::InvKK, 4) == doctest::Approx(1.0 / 256.0));
  CHECK_THROWS_AS(error_sequence(ErrorRule::InvK2, 0), std::invalid_argument);

  for (const ErrorRule rule :
       {ErrorRule::InvK2, ErrorRule::InvK5, ErrorRule::InvKK, ErrorRule::HalfPowK}) {
    double partial = 0.0;
    for (int k = 1; k <= 200000; ++k) partial += error_sequence(rule, k);
    CHECK(partial <= error_tail_bound(rule) + 1e-9);
  }
}

TEST_CASE("assembled deblurring constants") {
  DeblurConfig cfg;
  cfg.noise_sigma = 0.0;
  const DeblurSetup s = assemble_deblur(synthetic_phantom(16), cfg);
  CHECK(s.beta == doctest::Approx(3.006).epsilon(1e-15));
  CHECK(s.gamma == doctest::Approx(1.0 / 6.112).epsilon(1e-12));

  DeblurConfig cfg2 = cfg;
  cfg2.gamma_rule = GammaRule::WithError;
  const DeblurSetup s2 = assemble_deblur(synthetic_phantom(16), cfg2);
  CHECK(s2.gamma == doctest::Approx(1.0 / (std::sqrt(10.0) * 4.006)).epsilon(1e-12));
  CHECK(s2.gamma == doctest::Approx(0.078926).epsilon(1e-4));
}

TEST_CASE("degenerate blur keeps the original") {
  DeblurConfig cfg;
  cfg.kernel_size = 1;
  cfg.noise_sigma = 0.0;
  const ImageGrid orig = synthetic_phantom(8);
  const DeblurSetup s = assemble_deblur(orig, cfg);
  CHECK((s.observed.px - orig.px).norm() == doctest::Approx(0.0));

  // objective at the original: l1 term vanishes
  const double want = cfg.lambda_reg * (tv_iso(orig) + orig.px.squaredNorm());
  CHECK(objective_value(s, orig) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("objective value") {
  DeblurConfig cfg;
  cfg.kernel_size = 1;
  cfg.noise_sigma = 0.0;
  cfg.lambda_reg = 0.5;
  const ImageGrid zero = ImageGrid::constant(2, 2, 0.0);
  const DeblurSetup s = assemble_deblur(zero, cfg);
  CHECK(objective_value(s, zero) == doctest::Approx(0.0));

  // x=[[0,1],[0,1]], b=0, A=Id, lambda=0.5: ||x||_1 = 2, TV = 2, ||x||^2 = 2
  ImageGrid x = zero;
  x.at(0, 1) = 1.0;
  x.at(1, 1) = 1.0;
  CHECK(objective_value(s, x) == doctest::Approx(2.0 + 0.5 * (2.0 + 2.0)));

  ImageGrid outside = zero;
  outside.at(0, 0) = 1.5;
  CHECK(std::isinf(objective_value(s, outside)));
}

TEST_CASE("noise synthesis is seeded and reproducible") {
  DeblurConfig cfg;
  cfg.noise_seed = 42;
  const ImageGrid orig = synthetic_phantom(12);
  const DeblurSetup a = assemble_deblur(orig, cfg);
  const DeblurSetup b = assemble_deblur(orig, cfg);
  CHECK((a.observed.px - b.observed.px).cwiseAbs().maxCoeff() == 0.0);

  DeblurConfig cfg2 = cfg;
  cfg2.noise_seed = 43;
  const DeblurSetup c = assemble_deblur(orig, cfg2);
  CHECK((a.observed.px - c.observed.px).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.observed.px.minCoeff() >= 0.0);
  CHECK(a.observed.px.maxCoeff() <= 1.0);
}

TEST_CASE("phantom is deterministic and in range") {
  const ImageGrid a = synthetic_phantom(32);
  const ImageGrid b = synthetic_phantom(32);
  CHECK((a.px - b.px).norm() == doctest::Approx(0.0));
  CHECK(a.px.minCoeff() >= 0.0);
  CHECK(a.px.maxCoeff() <= 1.0);
  CHECK(tv_iso(a) > 0.0);  // piecewise constant with real edges
}

TEST_CASE("pgm round trips") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fbfx_pgm_test";
  fs::create_directories(dir);

  Rng rng(17);
  const ImageGrid img = ImageGrid::from_vec(5, 7, rng.uniform_vec(35, 0.0, 1.0));

  // 16-bit binary keeps values to within half a level
  const std::string p16 = (dir / "a16.pgm").string();
  write_pgm(p16, img, 65535, true);
  const ImageGrid r16 = read_pgm(p16);
  CHECK(r16.rows == 5);
  CHECK(r16.cols == 7);
  CHECK((r16.px - img.px).cwiseAbs().maxCoeff() <= 0.5 / 65535.0 + 1e-12);

  // ascii 8-bit
  const std::string p2 = (dir / "a8.pgm").string();
  write_pgm(p2, img, 255, false);
  const ImageGrid r8 = read_pgm(p2);
  CHECK((r8.px - img.px).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-12);

  // written bytes are deterministic
  write_pgm((dir / "b.pgm").string(), img);
  write_pgm((dir / "c.pgm").string(), img);
  std::ifstream fb((dir / "b.pgm").string(), std::ios::binary);
  std::ifstream fc((dir / "c.pgm").string(), std::ios::binary);
  const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  const std::string sc((std::istreambuf_iterator<char>(fc)), std::istreambuf_iterator<char>());
  CHECK(sb == sc);

  CHECK_THROWS(read_pgm((dir / "missing.pgm").string()));
  fs::remove_all(dir);
}

TEST_CASE("TV dual iterates stay inside the lambda ball") {
  DeblurConfig cfg;
  cfg.noise_seed = 9;
  const DeblurSetup s = assemble_deblur(synthetic_phantom(16), cfg);
  SolverConfig rcfg = SolverConfig::constant_step(s.gamma, 100);
  const BlockRunResult res = run_blocks(s.problem, rcfg, s.initial_state(cfg.init_scalar));
  const Vec& dual = res.final_state.p2_prev[1];
  const int n = 16 * 16;
  for (int i = 0; i < n; ++i) {
    const double mag = std::sqrt(dual[i] * dual[i] + dual[n + i] * dual[n + i]);
    CHECK(mag <= cfg.lambda_reg + 1e-12);
  }
}

TEST_CASE("blur rejects even kernel sizes") {
  CHECK_THROWS_AS(gaussian_blur(8, 8, 4, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_blur(8, 8, 3, 0.0), std::invalid_argument);
}

TEST_CASE("error schedules honor their summability certificates") {
  DeblurConfig cfg;
  cfg.error_rule = ErrorRule::InvK2;
  cfg.noise_sigma = 0.0;
  const DeblurSetup s = assemble_deblur(synthetic_phantom(6), cfg);
  const ErrorSchedule& e = s.problem.primal_errors;
  REQUIRE(static_cast<bool>(e.a));
  double partial = 0.0;
  for (int n = 0; n < 5000; ++n) partial += e.a(n).norm();
  CHECK(partial <= e.sum_bound_a + 1e-9);
}

TEST_CASE("reconstruction beats the observed image early on") {
  DeblurConfig cfg;
  cfg.noise_seed = 3;
  const DeblurSetup s = assemble_deblur(synthetic_phantom(64), cfg);
  SolverConfig rcfg = SolverConfig::constant_step(s.gamma, 300);
  const ImageGrid orig = s.original, obs = s.observed;
  rcfg.aux_metric = [&](const Vec& x) { return isnr(orig, obs, ImageGrid{64, 64, x}); };
  const BlockRunResult res = run_blocks(s.problem, rcfg, s.initial_state(cfg.init_scalar));
  for (const auto& r : res.trace)
    if (r.n >= 50) CHECK(r.aux > 0.0);

  // the run improves the objective over the constant starting point
  const Vec x0 = Vec::Constant(64 * 64, cfg.init_scalar);
  CHECK(s.objective_finite(res.primal) < s.objective_finite(x0));
}

TEST_CASE("sigma-scaled TV dual formula agrees with its closed form") {
  // sigma * P_S((p,q)/sigma) written out as (p,q)/max{1, sqrt((p/s)^2+(q/s)^2)/lambda}
  Rng rng(19);
  const double lam = 0.003;
  for (const double sigma : {0.1, 0.9, 1.5}) {
    const Vec p = rng.uniform_vec(8, -0.05, 0.05);
    const Vec q = rng.uniform_vec(8, -0.05, 0.05);
    auto [po, qo] = project_pair_ball_scaled(p, q, lam, sigma);
    auto [pr, qr] = project_pair_ball(p / sigma, q / sigma, lam);
    CHECK((po - sigma * pr).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((qo - sigma * qr).cwiseAbs().maxCoeff() <= 1e-15);
  }
}
