#include <doctest.h>

#include <cmath>

#include "fbfx/operators.hpp"
#include "oracles.hpp"

using namespace fbfx;

TEST_CASE("box projection") {
  Vec x(3);
  x << -0.5, 0.3, 1.7;
  Vec want(3);
  want << 0, 0.3, 1;
  CHECK((prox_box01(x) - want).norm() == doctest::Approx(0.0));

  Vec in(3);
  in << 0.1, 0.5, 1.0;
  CHECK((prox_box01(in) - in).norm() == doctest::Approx(0.0));
  CHECK((prox_box01(prox_box01(x)) - prox_box01(x)).norm() == doctest::Approx(0.0));

  // 1-D brute force of the projection objective
  const double y = oracle::prox_1d([](double) { return 0.0; }, 1.0, 0.5, 0.0, 1.0);
  CHECK(prox_box01(Vec::Constant(1, 0.5))[0] == doctest::Approx(y).epsilon(1e-4));
}

TEST_CASE("l1 conjugate prox") {
  {
    Vec p(2), b(2);
    p << 2, -3;
    b << 0, 0;
    Vec want(2);
    want << 1, -1;
    CHECK((prox_l1_conj(p, 1.0, b) - want).norm() == doctest::Approx(0.0));
  }
  {
    Vec p(1), b(1);
    p << 0.5;
    b << 1.0;
    CHECK(prox_l1_conj(p, 0.2, b)[0] == doctest::Approx(0.3));
  }
  // Moreau decomposition against the translated-l1 prox
  Rng rng(17);
  for (int t = 0; t < 100; ++t) {
    const Vec p = rng.uniform_vec(4, -3, 3);
    const Vec b = rng.uniform_vec(4, -1, 1);
    const double g = 0.1 + 2.0 * rng.uniform();
    const Vec direct = prox_l1_conj(p, g, b);
    const Vec via_moreau = p - g * prox_l1_translated(p / g, 1.0 / g, b);
    CHECK((direct - via_moreau).norm() <= 1e-10);
  }
  CHECK_THROWS_AS(prox_l1_conj(Vec::Zero(2), 1.0, Vec::Zero(3)), std::invalid_argument);
}

TEST_CASE("translated l1 prox") {
  Vec b0 = Vec::Zero(1);
  CHECK(prox_l1_translated(Vec::Constant(1, 2.5), 1.0, b0)[0] == doctest::Approx(1.5));
  CHECK(prox_l1_translated(Vec::Constant(1, -0.5), 1.0, b0)[0] == doctest::Approx(0.0));

  Vec b(2);
  b << 0.7, -0.2;
  CHECK((prox_l1_translated(b, 0.3, b) - b).norm() == doctest::Approx(0.0));

  // 1-D brute force of |t| + (t - y)^2 / 2
  const double t = oracle::prox_1d([](double v) { return std::abs(v); }, 1.0, 2.5, -5, 5);
  CHECK(t == doctest::Approx(1.5).epsilon(1e-3));
  const double t2 = oracle::prox_1d([](double v) { return std::abs(v); }, 1.0, -0.5, -5, 5);
  CHECK(std::abs(t2) <= 1e-4);
}

TEST_CASE("pairwise dual-ball projection") {
  Vec p(1), q(1);
  p << 3;
  q << 4;
  {
    auto [po, qo] = project_pair_ball(p, q, 1.0);
    CHECK(po[0] == doctest::Approx(0.6));
    CHECK(qo[0] == doctest::Approx(0.8));
  }
  {
    Vec ps(1), qs(1);
    ps << 0.3;
    qs << 0.4;
    auto [po, qo] = project_pair_ball(ps, qs, 1.0);
    CHECK(po[0] == doctest::Approx(0.3));
    CHECK(qo[0] == doctest::Approx(0.4));
  }
  {
    auto [po, qo] = project_pair_ball(p, q, 5.0);  // boundary: max{5,5} = 5
    CHECK(po[0] == doctest::Approx(3.0));
    CHECK(qo[0] == doctest::Approx(4.0));
  }
  // output magnitude never exceeds lambda
  Rng rng(23);
  for (int t = 0; t < 200; ++t) {
    Vec pp = rng.uniform_vec(6, -4, 4), qq = rng.uniform_vec(6, -4, 4);
    auto [po, qo] = project_pair_ball(pp, qq, 0.7);
    for (int i = 0; i < 6; ++i) CHECK(std::sqrt(po[i] * po[i] + qo[i] * qo[i]) <= 0.7 + 1e-12);
  }
}

TEST_CASE("quadratic gradient") {
  Vec x(2);
  x << 1, -2;
  const Vec g = grad_quadratic(x, 0.003);
  CHECK(g[0] == doctest::Approx(0.006));
  CHECK(g[1] == doctest::Approx(-0.012));
  CHECK(grad_quadratic(Vec::Zero(3), 0.5).norm() == doctest::Approx(0.0));

  // central differences of lambda ||x||^2
  Rng rng(29);
  const double lam = 0.37;
  const auto f = [lam](const Vec& v) { return lam * v.squaredNorm(); };
  const Vec xr = rng.uniform_vec(5, -2, 2);
  const Vec gr = grad_quadratic(xr, lam);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(gr[i] - oracle::central_diff(f, xr, i)) <= 1e-6);

  const LipschitzMap m = quadratic_gradient_map(0.003);
  CHECK(m.lipschitz == doctest::Approx(0.006));
}

TEST_CASE("scaled-argument metric prox") {
  Proximable l1;
  l1.prox = [](double g, const Vec& v) { return soft_threshold(v, g); };

  // tau = 1 is bit-identical to the plain prox
  Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    const Vec x = rng.uniform_vec(4, -3, 3);
    const double g = 0.1 + rng.uniform();
    const Vec a = prox_with_metric(l1, g, 1.0, x);
    const Vec b = l1.prox(g, x);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }

  // 1-D value against the brute force of the scaled objective
  const Vec out = prox_with_metric(l1, 1.0, 2.0, Vec::Constant(1, 6.0));
  CHECK(out[0] == doctest::Approx(2.0));
  const double brute = oracle::scaled_metric_prox_1d([](double v) { return std::abs(v); }, 1.0,
                                                     2.0, 6.0, -10, 10);
  CHECK(out[0] == doctest::Approx(brute).epsilon(1e-3));

  // indicator case: the scaled formula leaves the box, the exact metric prox
  // does not; resolvent_box01 follows the exact one
  Proximable box;
  box.prox = [](double, const Vec& v) { return prox_box01(v); };
  const Vec scaled = prox_with_metric(box, 1.0, 2.0, Vec::Constant(1, 3.0));
  CHECK(scaled[0] == doctest::Approx(2.0));  // outside [0,1]
  const double exact =
      oracle::metric_prox_1d([](double v) { return (v < 0 || v > 1) ? 1e9 : 0.0; }, 1.0, 2.0,
                             3.0, -0.5, 1.5);
  CHECK(exact == doctest::Approx(1.0).epsilon(1e-3));
  const Vec viares = resolvent_box01()(1.0, Metric::scalar(2.0), Vec::Constant(1, 3.0));
  CHECK(viares[0] == doctest::Approx(1.0));
}

TEST_CASE("resolvent of the inverse subdifferential") {
  Proximable l1;
  l1.prox = [](double g, const Vec& v) { return soft_threshold(v, g); };

  CHECK(resolvent_of_inverse(l1, 1.0, Vec::Constant(1, 0.5))[0] == doctest::Approx(0.5));
  CHECK(resolvent_of_inverse(l1, 1.0, Vec::Constant(1, 2.0))[0] == doctest::Approx(1.0));

  // Moreau reconstruction on random inputs
  Rng rng(37);
  for (int t = 0; t < 100; ++t) {
    const Vec x = rng.uniform_vec(5, -4, 4);
    const double g = 0.2 + 2.0 * rng.uniform();
    const Vec rebuilt = l1.prox(g, x) + g * resolvent_of_inverse(l1, 1.0 / g, x / g);
    CHECK((rebuilt - x).norm() <= 1e-10);
  }
}

TEST_CASE("identity-metric resolvents reproduce the prox") {
  Proximable l1;
  l1.prox = [](double g, const Vec& v) { return soft_threshold(v, g); };
  const ResolventOperator r = resolvent_from_prox(l1);
  Rng rng(53);
  for (int t = 0; t < 100; ++t) {
    const Vec x = rng.uniform_vec(5, -3, 3);
    const double g = 0.1 + rng.uniform();
    CHECK((r(g, Metric::identity(), x) - l1.prox(g, x)).norm() <= 1e-10);
  }
}

TEST_CASE("proximables are firmly nonexpansive") {
  Proximable l1;
  l1.prox = [](double g, const Vec& v) { return soft_threshold(v, g); };
  Proximable box;
  box.prox = [](double, const Vec& v) { return prox_box01(v); };
  Vec b(6);
  Rng rng(41);
  b = rng.uniform_vec(6, -1, 1);
  Proximable l1c;
  l1c.prox = [b](double g, const Vec& v) { return prox_l1_conj(v, g, b); };

  for (const Proximable& f : {l1, box, l1c}) {
    for (int t = 0; t < 200; ++t) {
      const Vec x = rng.uniform_vec(6, -3, 3);
      const Vec y = rng.uniform_vec(6, -3, 3);
      const double g = 0.1 + rng.uniform();
      const Vec px = f.prox(g, x);
      const Vec py = f.prox(g, y);
      CHECK((px - py).squaredNorm() <= (px - py).dot(x - y) + 1e-10);
    }
  }
}

TEST_CASE("power iteration norm") {
  CHECK(power_iteration_norm(LinearMap::scaled_identity(4, 3.0), 50, 1) ==
        doctest::Approx(3.0).epsilon(1e-9));

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 1;
  d(1, 1) = 5;
  CHECK(power_iteration_norm(LinearMap::from_matrix(d), 100, 1) ==
        doctest::Approx(5.0).epsilon(1e-6));

  LinearMap zero;
  zero.in_dim = zero.out_dim = 3;
  zero.apply = [](const Vec& v) { return Vec(Vec::Zero(v.size())); };
  zero.adjoint = zero.apply;
  CHECK(power_iteration_norm(zero, 10, 1) == doctest::Approx(0.0));

  // deterministic given the seed, nondecreasing in iters
  Rng rng(43);
  Eigen::MatrixXd a(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) a(i, j) = rng.uniform() - 0.5;
  const LinearMap l = LinearMap::from_matrix(a);
  const double e1 = power_iteration_norm(l, 7, 99);
  const double e2 = power_iteration_norm(l, 7, 99);
  CHECK(e1 == e2);
  double prev = 0.0;
  for (int it : {1, 2, 4, 8, 16, 32}) {
    const double e = power_iteration_norm(l, it, 99);
    CHECK(e >= prev - 1e-12);
    prev = e;
  }
  CHECK(prev <= l.norm_bound + 1e-9);
}

TEST_CASE("adjoint consistency of matrix maps") {
  Rng rng(47);
  Eigen::MatrixXd a(4, 6);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) a(i, j) = rng.uniform() - 0.5;
  const LinearMap l = LinearMap::from_matrix(a);
  for (int t = 0; t < 100; ++t) {
    const Vec x = rng.uniform_vec(6, -2, 2);
    const Vec y = rng.uniform_vec(4, -2, 2);
    const double lhs = l.apply(x).dot(y);
    const double rhs = x.dot(l.adjoint(y));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + x.norm() * y.norm()));
  }
}
