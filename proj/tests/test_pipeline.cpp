#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ddpq/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace ddpq;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

// Hand-built chain: knots at 0, 1, 2; one response each; N = 2, J = 1.
PosteriorDraws synthetic_chain(int B, bool vary = false) {
  PosteriorDraws pd;
  pd.data = Dataset::from_pairs(std::vector<double>{0.0, 1.0, 2.0},
                                std::vector<Vec>{v2(1, 0), v2(3, 1), v2(9, 4)});
  pd.hyper.N = 2;
  pd.hyper.J = 1;
  for (int b = 0; b < B; ++b) {
    StoredDraw d;
    const double s = vary ? 0.1 * b : 0.0;
    d.alpha = {v2(1.0 + s, 0.5), v2(-2.0, 3.0)};
    d.beta = {{v2(0.0, 0.0), v2(2.0, 0.5), v2(4.0, 1.0)}, {v2(1.0, 1.0), v2(1.0, 1.0), v2(1.0, 1.0)}};
    d.W = {1.0, 0.0};
    d.L = {0, 0, 0};
    d.p = {1.0};
    d.eta = {v2(0.25, -0.5)};
    d.sigma2 = {0.3};
    d.M1 = d.M2 = 1.0;
    pd.draws.push_back(d);
  }
  return pd;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

TEST_CASE("percentile uses linear interpolation between order statistics") {
  CHECK(percentile({4, 1, 3, 2}, 0.3) == doctest::Approx(1.9));
  CHECK(percentile({5}, 0.7) == 5.0);
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  CHECK(percentile(v, 0.025) == doctest::Approx(3.475));
  CHECK(percentile(v, 0.975) == doctest::Approx(97.525));
  CHECK_THROWS_AS(percentile({}, 0.5), std::invalid_argument);
}

TEST_CASE("summarize: point is the mean and the interval uses the percentile rule") {
  std::vector<Vec> per;
  for (int i = 1; i <= 100; ++i) per.push_back(v2(i, 0.0));
  const auto est = summarize(per, 0.95);
  CHECK(est.point[0] == doctest::Approx(50.5));
  CHECK(est.ci_lower[0] == doctest::Approx(3.475));
  CHECK(est.ci_upper[0] == doctest::Approx(97.525));
  CHECK(est.ci_lower[1] == 0.0);
  CHECK(est.per_draw.size() == 100);
}

TEST_CASE("default smoothing width") {
  CHECK(default_delta(100) == doctest::Approx(0.2154).epsilon(1e-3));
  CHECK(default_delta(8) == doctest::Approx(0.5));
}

TEST_CASE("kde with the silverman bandwidth") {
  const auto d = kde_fit({0.0, 1.0});
  CHECK(d.bandwidth() == doctest::Approx(1.06 * std::sqrt(0.5) * std::pow(2.0, -0.2)));
  CHECK(d.pdf(0.5 - 0.3) == doctest::Approx(d.pdf(0.5 + 0.3)));
  Rng rng(3);
  std::vector<double> sample;
  for (int i = 0; i < 40; ++i) sample.push_back(30.0 + 12.0 * rng.normal());
  const auto k = kde_fit(sample);
  double integral = 0.0;
  for (double x = -50.0; x <= 110.0; x += 0.01) integral += k.pdf(x) * 0.01;
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
  for (double x : {20.0, 31.5, 47.0}) {
    double direct = 0.0;
    for (double s : sample) {
      const double z = (x - s) / k.bandwidth();
      direct += std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    }
    direct /= 40.0 * k.bandwidth();
    CHECK(k.pdf(x) == doctest::Approx(direct).epsilon(1e-12));
  }
  CHECK_THROWS_AS(kde_fit({1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(kde_fit({1.0}), std::invalid_argument);
}

TEST_CASE("truncated covariate draws stay in the window and follow the truncated law") {
  const auto d = CovariateDensity::normal(0.0, 1.0);
  Rng rng(4);
  const double lo = 0.3, hi = 1.1;
  std::vector<double> xs;
  for (int i = 0; i < 5000; ++i) {
    const double x = d.sample_truncated(lo, hi, rng);
    REQUIRE(x >= lo);
    REQUIRE(x <= hi);
    xs.push_back(x);
  }
  std::sort(xs.begin(), xs.end());
  const double flo = normal_cdf(lo), fhi = normal_cdf(hi);
  double ks = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double F = (normal_cdf(xs[i]) - flo) / (fhi - flo);
    ks = std::max({ks, std::abs(F - static_cast<double>(i) / xs.size()),
                   std::abs(F - static_cast<double>(i + 1) / xs.size())});
  }
  CHECK(ks < 1.63 / std::sqrt(5000.0));  // 1% critical value
  // far tail: rejection gives up, the inverse-cdf fallback still lands inside
  for (int i = 0; i < 20; ++i) {
    const double x = d.sample_truncated(6.0, 6.2, rng, 10);
    CHECK(x >= 6.0);
    CHECK(x <= 6.2);
  }
  CHECK_THROWS_AS(d.sample_truncated(50.0, 50.1, rng), std::runtime_error);
}

TEST_CASE("location at an observed covariate is the allocated cluster's value") {
  const auto pd = synthetic_chain(3);
  Rng rng(1);
  const Vec v = location_draw_at(pd, 1, 1.0, rng);
  CHECK((v - v2(3.0, 1.0)).norm() == 0.0);
  // the new-x path at a knot interpolates with zero variance
  const Vec w = cluster_location_at(pd, 1, 0, 1.0, rng);
  CHECK((w - v).norm() <= 1e-6);
}

TEST_CASE("location between knots: repeated draws match the conditional moments") {
  const auto pd = synthetic_chain(1);
  const auto& h = pd.hyper;
  const double x = 0.37;
  const auto cond = gp_conditional(gp_cov(pd.data.xs, h.gamma, h.lambda), pd.draws[0].beta[0], h.c1, x);
  Rng rng(12);
  const int T = 10000;
  Vec mean = Vec::Zero(2);
  for (int t = 0; t < T; ++t) mean += location_draw_at(pd, 0, x, rng);
  mean /= T;
  const Vec expect = pd.draws[0].alpha[0] + cond.mean;
  const double se = std::sqrt(cond.variance / T);
  CHECK(std::abs(mean[0] - expect[0]) <= 3.0 * se);
  CHECK(std::abs(mean[1] - expect[1]) <= 3.0 * se);
}

TEST_CASE("error quantile per draw: single component and symmetric mixtures") {
  auto pd = synthetic_chain(3);
  ErrorQuantileSettings s;
  s.solver.mc_samples = 20000;
  for (const auto& q : error_quantile_per_draw(pd, Direction::zero(2), s)) CHECK((q - v2(0.25, -0.5)).norm() <= 0.02);
  // symmetric two-component mixture about m = (1, 1)
  for (auto& d : pd.draws) {
    d.p = {0.5, 0.5};
    d.eta = {v2(0.0, 0.0), v2(2.0, 2.0)};
    d.sigma2 = {0.5, 0.5};
  }
  s.method = ErrorQuantileMethod::polar;
  for (const auto& q : error_quantile_per_draw(pd, Direction::zero(2), s)) CHECK((q - v2(1.0, 1.0)).norm() <= 2e-3);
}

TEST_CASE("error quantile per draw matches a grid-scan oracle") {
  auto pd = synthetic_chain(3);
  Rng rng(2);
  for (auto& d : pd.draws) {
    d.p = {0.3, 0.7};
    d.eta = {v2(rng.normal(), rng.normal()), v2(rng.normal(), rng.normal())};
    d.sigma2 = {0.5 + rng.uniform(), 0.5 + rng.uniform()};
  }
  Vec u(2);
  u << 0.3, -0.2;
  ErrorQuantileSettings s;
  s.solver.mc_samples = 50000;
  s.seed = 8;
  const auto q = error_quantile_per_draw(pd, Direction(u), s);
  for (std::size_t b = 0; b < pd.size(); ++b) {
    const auto& d = pd.draws[b];
    MixtureSpec mix{d.p, d.eta, d.sigma2};
    // independent oracle: dense scan of the polar-reduced objective
    Vec best(2);
    double best_v = INFINITY;
    for (double a = -3.0; a <= 4.0; a += 0.04)
      for (double c = -3.0; c <= 4.0; c += 0.04) {
        const double v = mixture_objective_polar(mix, u, v2(a, c), 12.0, 401);
        if (v < best_v) {
          best_v = v;
          best = v2(a, c);
        }
      }
    CHECK((q[b] - best).norm() <= 0.05);
  }
}

TEST_CASE("degenerate chain: point equals the draw and the interval collapses") {
  const auto pd = synthetic_chain(20);
  QuantileQuery q;
  q.x = 2.0;
  const std::vector<Vec> eq(20, v2(0.25, -0.5));
  const auto est = conditional_quantile(pd, q, eq);
  CHECK((est.point - v2(5.25, 1.0)).norm() <= 1e-12);
  CHECK((est.ci_upper - est.ci_lower).norm() == 0.0);
  CHECK(est.per_draw.size() == 20);
}

TEST_CASE("smoothing collapses to the unsmoothed quantile as delta shrinks") {
  const auto pd = synthetic_chain(50);
  const std::vector<Vec> eq(50, v2(0.25, -0.5));
  QuantileQuery q;
  q.x = 1.0;
  const auto plain = conditional_quantile(pd, q, eq);
  q.delta = 1e-9;
  const auto smooth = delta_smoothed_quantile(pd, q, CovariateDensity::normal(0.0, 1.0), eq);
  CHECK((plain.point - smooth.point).norm() <= 1e-3);
  q.delta = 0.0;
  CHECK_THROWS_AS(delta_smoothed_quantile(pd, q, CovariateDensity::normal(0.0, 1.0), eq), std::invalid_argument);
}

TEST_CASE("point is exactly the mean of per-draw values and within their range") {
  const auto pd = synthetic_chain(30, true);
  const std::vector<Vec> eq(30, v2(0.0, 0.0));
  QuantileQuery q;
  q.x = 0.6;
  q.delta = 0.2;
  const auto est = delta_smoothed_quantile(pd, q, CovariateDensity::normal(0.0, 1.0), eq);
  Vec mean = Vec::Zero(2);
  for (const auto& v : est.per_draw) mean += v;
  mean /= 30.0;
  CHECK(est.point == mean);
  for (int c = 0; c < 2; ++c) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& v : est.per_draw) {
      lo = std::min(lo, v[c]);
      hi = std::max(hi, v[c]);
    }
    CHECK(est.ci_lower[c] <= est.ci_upper[c]);
    CHECK(est.point[c] >= lo);
    CHECK(est.point[c] <= hi);
  }
}

TEST_CASE("seeded queries are reproducible") {
  const auto pd = synthetic_chain(10, true);
  const std::vector<Vec> eq(10, v2(0.0, 0.0));
  QuantileQuery q;
  q.x = 0.6;
  q.delta = 0.2;
  q.seed = 5;
  const auto a = delta_smoothed_quantile(pd, q, CovariateDensity::normal(0.0, 1.0), eq);
  const auto b = delta_smoothed_quantile(pd, q, CovariateDensity::normal(0.0, 1.0), eq);
  CHECK(a.point == b.point);
}

TEST_CASE("query validation") {
  QuantileQuery q;
  q.level = 1.0;
  CHECK_THROWS_AS(q.validate(), std::invalid_argument);
  q = {};
  q.delta = -0.1;
  CHECK_THROWS_AS(q.validate(), std::invalid_argument);
  q = {};
  q.smoothing_samples = 0;
  CHECK_THROWS_AS(q.validate(), std::invalid_argument);
}

TEST_CASE("quantile csv layout") {
  QuantileRow row{1.5, v2(0.0, 0.1), summarize({v2(1, 2), v2(3, 4)}, 0.9)};
  std::ostringstream out;
  write_quantile_csv(out, {row}, 6);
  CHECK(out.str() == "x,u1,u2,point1,point2,lo1,lo2,hi1,hi2\n1.5,0,0.1,2,3,1.1,2.1,2.9,3.9\n");
}

TEST_CASE("property: translation consistency of fitted quantiles") {
  Rng gen(31);
  std::vector<double> x;
  std::vector<Vec> y, y_shift;
  const Vec shift = v2(5.0, -3.0);
  for (int i = 0; i < 30; ++i) {
    x.push_back(gen.normal());
    y.push_back(v2(1.0 + 2.0 * x.back(), x.back()) + 0.3 * v2(gen.normal(), gen.normal()));
    y_shift.push_back(y.back() + shift);
  }
  Hyperparams h;
  Hyperparams hs = h;
  hs.c0 += shift;
  McmcSettings mc;
  mc.n_draws = 300;
  mc.burn_in = 100;
  mc.seed = 7;
  const auto a = run_chain(Dataset::from_pairs(x, y), h, mc);
  const auto b = run_chain(Dataset::from_pairs(x, y_shift), hs, mc);
  ErrorQuantileSettings es;
  es.solver.mc_samples = 500;
  QuantileQuery q;
  q.x = x[3];
  q.seed = 2;
  const auto qa = conditional_quantile(a, q, es);
  const auto qb = conditional_quantile(b, q, es);
  const double width = (qa.ci_upper - qa.ci_lower).maxCoeff();
  CHECK((qb.point - qa.point - shift).norm() <= width);
  CHECK((qb.point - qa.point - shift).norm() <= 1e-6);
}

TEST_CASE("property: credible intervals cover the truth at a knot in most runs") {
  int covered = 0;
  const int runs = 20;
  for (int seed = 1; seed <= runs; ++seed) {
    Rng gen(1000 + seed);
    std::vector<double> x;
    std::vector<Vec> y;
    for (int i = 0; i < 30; ++i) {
      x.push_back(gen.normal());
      y.push_back(v2(1.0 + 2.0 * x.back(), x.back()) + 0.5 * v2(gen.normal(), gen.normal()));
    }
    McmcSettings mc;
    mc.n_draws = 400;
    mc.burn_in = 200;
    mc.seed = seed;
    const auto pd = run_chain(Dataset::from_pairs(x, y), Hyperparams{}, mc);
    ErrorQuantileSettings es;
    es.solver.mc_samples = 500;
    QuantileQuery q;
    q.x = x[0];
    const auto est = conditional_quantile(pd, q, es);
    const Vec truth = v2(1.0 + 2.0 * x[0], x[0]);
    bool ok = true;
    for (int c = 0; c < 2; ++c) ok = ok && est.ci_lower[c] <= truth[c] && truth[c] <= est.ci_upper[c];
    covered += ok;
  }
  MESSAGE("covered " << covered << " of " << runs);
  CHECK(covered >= 16);
}
