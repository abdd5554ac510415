#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ddpq/gibbs.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace ddpq;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

// Two distinct covariates with one response each.
Dataset micro_data() {
  const std::vector<double> x{-0.5, 0.8};
  const std::vector<Vec> y{v2(1.0, -0.3), v2(2.5, 0.7)};
  return Dataset::from_pairs(x, y);
}

Hyperparams micro_hyper() {
  Hyperparams h;
  h.N = 2;
  h.J = 2;
  return h;
}

ChainState micro_state(const GibbsModel& m) {
  Rng rng(1);
  ChainState s = initial_state(m, rng);
  s.alpha = {v2(0.5, 0.2), v2(-1.0, 1.0)};
  s.beta = {{v2(-1.0, -0.25), v2(1.6, 0.4)}, {v2(0.3, 0.1), v2(-0.2, 0.0)}};
  s.eta = {v2(0.2, -0.1), v2(-0.5, 0.3)};
  s.sigma2 = {0.7, 1.8};
  s.L = {0, 0};
  s.Z = {{0}, {1}};
  return s;
}

struct Moments {
  double mean = 0.0, var = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(v.size() - 1);
  return m;
}

}  // namespace

TEST_CASE("stick weight update matches the beta posterior means") {
  const std::vector<int> counts{3, 0, 5, 2};
  const double M = 1.5;
  Rng rng(2);
  std::vector<std::vector<double>> vs(3);
  for (int t = 0; t < 40000; ++t) {
    auto [V, W] = update_stick_weights(counts, M, 4, rng);
    CHECK(V[3] == 1.0);
    for (int l = 0; l < 3; ++l) vs[l].push_back(V[l]);
  }
  // V_l ~ Be(1 + U_l, M + sum_{r>l} U_r)
  const double tails[3] = {7, 7, 2};
  for (int l = 0; l < 3; ++l) {
    const double a = 1.0 + counts[l], b = M + tails[l];
    const double mean = a / (a + b);
    const double var = a * b / ((a + b) * (a + b) * (a + b + 1));
    const auto m = moments(vs[l]);
    CAPTURE(l);
    CHECK(std::abs(m.mean - mean) <= 4.0 * std::sqrt(var / 40000.0));
    CHECK(m.var == doctest::Approx(var).epsilon(0.03));
  }
}

TEST_CASE("concentration update follows the stated gamma") {
  Rng rng(3);
  std::vector<double> draws;
  for (int t = 0; t < 50000; ++t) draws.push_back(update_concentration(1.0, 1.0, std::exp(-1.0), 20, rng));
  // Ga(21, 2)
  const auto m = moments(draws);
  CHECK(m.mean == doctest::Approx(10.5).epsilon(0.01));
  CHECK(m.var == doctest::Approx(21.0 / 4.0).epsilon(0.03));
  std::vector<double> d2;
  for (int t = 0; t < 50000; ++t) d2.push_back(update_concentration(2.0, 3.0, std::exp(-2.0), 5, rng));
  // Ga(7, 5)
  CHECK(moments(d2).mean == doctest::Approx(7.0 / 5.0).epsilon(0.01));
  CHECK_NOTHROW(update_concentration(1.0, 1.0, 0.0, 20, rng));
  CHECK_THROWS_AS(update_concentration(1.0, 1.0, -0.1, 20, rng), std::invalid_argument);
}

TEST_CASE("allocation weights match a direct computation") {
  const GibbsModel m(micro_data(), micro_hyper());
  ChainState s = micro_state(m);
  s.W = {0.3, 0.7};
  for (std::size_t i = 0; i < 2; ++i) {
    const auto lw = allocation_log_weights(s, m, i);
    const auto y = m.data().ys[i][0];
    const auto j = static_cast<std::size_t>(s.Z[i][0]);
    for (std::size_t l = 0; l < 2; ++l) {
      const Vec r = y - s.alpha[l] - s.beta[l][i] - s.eta[j];
      const double direct = std::log(s.W[l]) - std::log(2.0 * std::numbers::pi * s.sigma2[j]) -
                            0.5 * r.squaredNorm() / s.sigma2[j];
      CHECK(lw[l] == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("error allocation with identical components is a fair coin") {
  const GibbsModel m(micro_data(), micro_hyper());
  ChainState s = micro_state(m);
  s.eta = {v2(0.1, 0.1), v2(0.1, 0.1)};
  s.sigma2 = {1.0, 1.0};
  s.p = {0.5, 0.5};
  const auto probs = softmax_probs(error_allocation_log_weights(s, m, 0, 0));
  CHECK(probs[0] == doctest::Approx(0.5));
  s.p = {1.0 - 1e-9, 1e-9};
  CHECK(softmax_probs(error_allocation_log_weights(s, m, 0, 0))[0] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("beta update: one occupied knot matches the two-step gaussian oracle") {
  // cluster 0 owns x_1 only; beta at x_2 is then redrawn from the GP bridge
  const GibbsModel m(micro_data(), micro_hyper());
  const auto& h = m.hyper();
  ChainState base = micro_state(m);
  base.L = {0, 1};
  const double g = h.gamma, rho = std::exp(-h.lambda * 1.3);
  const double x1 = -0.5, x2 = 0.8;
  const auto y1 = m.data().ys[0][0];

  Rng rng(5);
  const int T = 60000;
  std::vector<double> a0, b0;
  for (int t = 0; t < T; ++t) {
    ChainState s = base;
    update_gp_blocks_beta(s, m, rng);
    a0.push_back(s.beta[0][0][0]);
    b0.push_back(s.beta[0][1][0]);
  }
  // coordinate 0, cluster 0
  const double mu1 = h.c1[0] * x1, mu2 = h.c1[0] * x2;
  const double cv = g * (1.0 - rho * rho);
  const double prior_mean = mu1 + rho * (base.beta[0][1][0] - mu2);
  const double tau = 1.0 / base.sigma2[0];
  const double bres = (y1 - base.alpha[0] - base.eta[0])[0] * tau;
  const double prec = 1.0 / cv + tau;
  const double post_mean = (prior_mean / cv + bres) / prec;
  const double post_var = 1.0 / prec;
  const auto ma = moments(a0);
  CHECK(std::abs(ma.mean - post_mean) <= 4.0 * std::sqrt(post_var / T));
  CHECK(ma.var == doctest::Approx(post_var).epsilon(0.03));
  const auto mb = moments(b0);
  const double u_mean = mu2 + rho * (post_mean - mu1);
  const double u_var = cv + rho * rho * post_var;
  CHECK(std::abs(mb.mean - u_mean) <= 4.0 * std::sqrt(u_var / T));
  CHECK(mb.var == doctest::Approx(u_var).epsilon(0.03));
}

TEST_CASE("beta update: both knots occupied gives the joint gaussian posterior") {
  const GibbsModel m(micro_data(), micro_hyper());
  const auto& h = m.hyper();
  ChainState base = micro_state(m);
  base.L = {0, 0};
  const double g = h.gamma, rho = std::exp(-h.lambda * 1.3);
  const double xs[2] = {-0.5, 0.8};
  // prior precision of the 2x2 kernel, by hand
  const double det = g * g * (1.0 - rho * rho);
  const double Q[2][2] = {{g / det, -g * rho / det}, {-g * rho / det, g / det}};
  const int c = 1;
  double tau[2], b[2], mu[2];
  for (int i = 0; i < 2; ++i) {
    const std::size_t j = static_cast<std::size_t>(base.Z[i][0]);
    tau[i] = 1.0 / base.sigma2[j];
    b[i] = (m.data().ys[i][0] - base.alpha[0] - base.eta[j])[c] * tau[i];
    mu[i] = h.c1[c] * xs[i];
  }
  const double P[2][2] = {{Q[0][0] + tau[0], Q[0][1]}, {Q[1][0], Q[1][1] + tau[1]}};
  const double pdet = P[0][0] * P[1][1] - P[0][1] * P[1][0];
  const double S[2][2] = {{P[1][1] / pdet, -P[0][1] / pdet}, {-P[1][0] / pdet, P[0][0] / pdet}};
  const double rhs[2] = {Q[0][0] * mu[0] + Q[0][1] * mu[1] + b[0], Q[1][0] * mu[0] + Q[1][1] * mu[1] + b[1]};
  const double mean[2] = {S[0][0] * rhs[0] + S[0][1] * rhs[1], S[1][0] * rhs[0] + S[1][1] * rhs[1]};

  Rng rng(6);
  const int T = 60000;
  std::vector<double> d0, d1;
  double cross = 0.0;
  for (int t = 0; t < T; ++t) {
    ChainState s = base;
    update_gp_blocks_beta(s, m, rng);
    d0.push_back(s.beta[0][0][c]);
    d1.push_back(s.beta[0][1][c]);
  }
  const auto m0 = moments(d0), m1 = moments(d1);
  for (int t = 0; t < T; ++t) cross += (d0[t] - m0.mean) * (d1[t] - m1.mean);
  cross /= T - 1;
  CHECK(std::abs(m0.mean - mean[0]) <= 4.0 * std::sqrt(S[0][0] / T));
  CHECK(std::abs(m1.mean - mean[1]) <= 4.0 * std::sqrt(S[1][1] / T));
  CHECK(m0.var == doctest::Approx(S[0][0]).epsilon(0.03));
  CHECK(m1.var == doctest::Approx(S[1][1]).epsilon(0.03));
  // sample covariance has standard error sqrt((S00 S11 + S01^2) / T)
  CHECK(std::abs(cross - S[0][1]) <= 4.0 * std::sqrt((S[0][0] * S[1][1] + S[0][1] * S[0][1]) / T));
}

TEST_CASE("unoccupied clusters are redrawn from their priors") {
  const GibbsModel m(micro_data(), micro_hyper());
  ChainState base = micro_state(m);
  Rng rng(7);
  std::vector<double> a, e;
  for (int t = 0; t < 40000; ++t) {
    ChainState s = base;
    update_locations_alpha(s, m, rng);
    a.push_back(s.alpha[1][0]);
    s.Z = {{0}, {0}};
    update_error_means_eta(s, m, rng);
    e.push_back(s.eta[1][1]);
  }
  CHECK(moments(a).mean == doctest::Approx(1.0).epsilon(0.05));
  CHECK(moments(a).var == doctest::Approx(10.0).epsilon(0.03));
  CHECK(std::abs(moments(e).mean) <= 0.07);
  CHECK(moments(e).var == doctest::Approx(10.0).epsilon(0.03));
}

TEST_CASE("single cluster, single component: sigma2 draws follow the normal-inverse-gamma conditional") {
  // N = J = 1 collapses the model to y = alpha + beta(x) + eta + N(0, sigma2 I)
  const GibbsModel m(micro_data(), micro_hyper());
  ChainState s = micro_state(m);
  s.Z = {{1}, {1}};
  Rng rng(9);
  const auto& h = m.hyper();
  double ss = 0.0;
  for (std::size_t i = 0; i < 2; ++i) ss += (m.data().ys[i][0] - s.alpha[0] - s.beta[0][i] - s.eta[1]).squaredNorm();
  const double shape = h.a + 0.5 * 2 * 2, rate = h.b + 0.5 * ss;
  std::vector<double> inv;
  for (int t = 0; t < 50000; ++t) {
    ChainState c = s;
    update_error_vars_sigma2(c, m, rng);
    inv.push_back(1.0 / c.sigma2[1]);
  }
  // 1/sigma2 ~ Ga(shape, rate)
  CHECK(moments(inv).mean == doctest::Approx(shape / rate).epsilon(0.01));
  CHECK(moments(inv).var == doctest::Approx(shape / (rate * rate)).epsilon(0.03));
}

TEST_CASE("property: invariants hold after every sweep") {
  Rng gen(11);
  std::vector<double> x;
  std::vector<Vec> y;
  for (int i = 0; i < 40; ++i) {
    const double xi = gen.normal();
    x.push_back(i % 5 == 0 && i > 0 ? x.back() : xi);  // some replicates
    y.push_back(v2(1.0 + 2.0 * x.back() * x.back() + gen.normal(), x.back() * x.back() + gen.normal()));
  }
  Hyperparams h;
  h.N = 8;
  h.J = 6;
  const GibbsModel m(Dataset::from_pairs(x, y), h);
  SamplerStreams streams(21);
  ChainState s = initial_state(m, streams.init);
  for (int sweep = 0; sweep < 300; ++sweep) {
    gibbs_sweep(s, m, streams);
    REQUIRE_NOTHROW(s.check_invariants(m.data(), h));
    double sw = 0.0, sp = 0.0;
    for (double w : s.W) sw += w;
    for (double p : s.p) sp += p;
    REQUIRE(sw == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(sp == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(s.M1 > 0.0);
    REQUIRE(s.M2 > 0.0);
    for (double v : s.sigma2) REQUIRE(v > 0.0);
    const auto W2 = stick_break(s.V, s.V.size());
    for (std::size_t l = 0; l < W2.size(); ++l) REQUIRE(W2[l] == doctest::Approx(s.W[l]).epsilon(1e-12));
  }
}

TEST_CASE("invariant checker catches broken states") {
  const GibbsModel m(micro_data(), micro_hyper());
  ChainState s = micro_state(m);
  CHECK_NOTHROW(s.check_invariants(m.data(), m.hyper()));
  ChainState bad = s;
  bad.W[0] += 0.1;
  CHECK_THROWS_AS(bad.check_invariants(m.data(), m.hyper()), std::logic_error);
  bad = s;
  bad.sigma2[1] = -1.0;
  CHECK_THROWS_AS(bad.check_invariants(m.data(), m.hyper()), std::logic_error);
  bad = s;
  bad.L[0] = 5;
  CHECK_THROWS_AS(bad.check_invariants(m.data(), m.hyper()), std::logic_error);
}

TEST_CASE("run_chain bookkeeping and determinism") {
  McmcSettings mc;
  mc.n_draws = 10;
  mc.burn_in = 5;
  mc.seed = 3;
  const auto a = run_chain(micro_data(), micro_hyper(), mc);
  CHECK(a.size() == 10);
  const auto b = run_chain(micro_data(), micro_hyper(), mc);
  std::ostringstream sa, sb;
  write_draws_jsonl(sa, a);
  write_draws_jsonl(sb, b);
  CHECK(sa.str() == sb.str());
  mc.thin = 3;
  CHECK(run_chain(micro_data(), micro_hyper(), mc).size() == 10);
  mc.seed = 4;
  mc.thin = 1;
  std::ostringstream sc;
  write_draws_jsonl(sc, run_chain(micro_data(), micro_hyper(), mc));
  CHECK(sc.str() != sa.str());
}

TEST_CASE("chain file round trip is exact") {
  McmcSettings mc;
  mc.n_draws = 4;
  mc.burn_in = 2;
  const auto a = run_chain(micro_data(), micro_hyper(), mc);
  std::stringstream ss;
  write_draws_jsonl(ss, a);
  const auto b = read_draws_jsonl(ss);
  REQUIRE(b.size() == a.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(b.draws[t].L == a.draws[t].L);
    CHECK(b.draws[t].W == a.draws[t].W);
    CHECK(b.draws[t].sigma2 == a.draws[t].sigma2);
    CHECK(b.draws[t].alpha[0] == a.draws[t].alpha[0]);
    CHECK(b.draws[t].beta[1][1] == a.draws[t].beta[1][1]);
  }
  CHECK(b.data.xs == a.data.xs);
  CHECK(b.hyper.N == a.hyper.N);
  CHECK(b.mcmc.seed == a.mcmc.seed);
  std::stringstream again;
  write_draws_jsonl(again, b);
  std::stringstream first;
  write_draws_jsonl(first, a);
  CHECK(again.str() == first.str());
}

TEST_CASE("mcmc settings validation") {
  McmcSettings mc;
  mc.n_draws = 0;
  CHECK_THROWS_AS(mc.validate(), std::invalid_argument);
  mc = {};
  mc.thin = 0;
  CHECK_THROWS_AS(mc.validate(), std::invalid_argument);
  mc = {};
  mc.burn_in = -1;
  CHECK_THROWS_AS(mc.validate(), std::invalid_argument);
}
