#include "ddpq/gibbs.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

namespace ddpq {

void McmcSettings::validate() const {
  if (n_draws < 1) throw std::invalid_argument("mcmc: n_draws must be >= 1");
  if (burn_in < 0) throw std::invalid_argument("mcmc: burn_in must be >= 0");
  if (thin < 1) throw std::invalid_argument("mcmc: thin must be >= 1");
}

void to_json(nlohmann::json& j, const McmcSettings& m) {
  j = nlohmann::json{{"n_draws", m.n_draws}, {"burn_in", m.burn_in}, {"thin", m.thin}, {"seed", m.seed}};
}

void from_json(const nlohmann::json& j, McmcSettings& m) {
  if (j.contains("n_draws")) m.n_draws = j.at("n_draws").get<int>();
  if (j.contains("burn_in")) m.burn_in = j.at("burn_in").get<int>();
  if (j.contains("thin")) m.thin = j.at("thin").get<int>();
  if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
}

GibbsModel::GibbsModel(Dataset data, Hyperparams hyper) : data_(std::move(data)), hyper_(std::move(hyper)) {
  data_.validate();
  hyper_.validate();
  if (data_.dim() != hyper_.k) throw std::invalid_argument("model: response dimension differs from k");
  kernel_ = gp_cov(data_.xs, hyper_.gamma, hyper_.lambda);
  Eigen::LLT<Mat> llt(hyper_.Sigma0);
  sigma0_chol_ = llt.matrixL();
  sigma0_inv_ = llt.solve(Mat::Identity(hyper_.k, hyper_.k));
  sigma0_inv_ = 0.5 * (sigma0_inv_ + sigma0_inv_.transpose()).eval();
}

SamplerStreams::SamplerStreams(std::uint64_t seed)
    : init(derive_seed(seed, 0)),
      alpha(derive_seed(seed, 1)),
      beta(derive_seed(seed, 2)),
      weights(derive_seed(seed, 3)),
      L(derive_seed(seed, 4)),
      eta(derive_seed(seed, 5)),
      sigma2(derive_seed(seed, 6)),
      Z(derive_seed(seed, 7)),
      p(derive_seed(seed, 8)),
      M1(derive_seed(seed, 9)),
      M2(derive_seed(seed, 10)) {}

namespace {

Vec std_normal_vec(Eigen::Index n, Rng& rng) {
  Vec z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
  return z;
}

Vec draw_alpha_prior(const GibbsModel& m, Rng& rng) {
  return m.hyper().c0 + m.sigma0_chol() * std_normal_vec(m.hyper().k, rng);
}

Vec draw_eta_prior(const Hyperparams& h, Rng& rng) {
  return h.c_eta + std::sqrt(h.s_eta2) * std_normal_vec(h.k, rng);
}

// beta_l at every knot from the GP prior
std::vector<Vec> draw_beta_prior(const GibbsModel& m, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(m.data().distinct());
  const int k = m.hyper().k;
  std::vector<Vec> out(static_cast<std::size_t>(d), Vec(k));
  for (int c = 0; c < k; ++c) {
    const Vec z = m.kernel().chol * std_normal_vec(d, rng);
    for (Eigen::Index i = 0; i < d; ++i) {
      out[static_cast<std::size_t>(i)][c] = m.hyper().c1[c] * m.data().xs[static_cast<std::size_t>(i)] + z[i];
    }
  }
  return out;
}

double log_normal_iso(const Vec& resid, double var) {
  const double k = static_cast<double>(resid.size());
  return -0.5 * k * std::log(2.0 * std::numbers::pi * var) - 0.5 * resid.squaredNorm() / var;
}

}  // namespace

ChainState initial_state(const GibbsModel& model, Rng& rng) {
  const auto& h = model.hyper();
  const auto& data = model.data();
  const auto N = static_cast<std::size_t>(h.N);
  const auto J = static_cast<std::size_t>(h.J);
  ChainState s;
  s.alpha.resize(N);
  s.beta.resize(N);
  for (std::size_t l = 0; l < N; ++l) s.alpha[l] = draw_alpha_prior(model, rng);
  for (std::size_t l = 0; l < N; ++l) s.beta[l] = draw_beta_prior(model, rng);
  s.eta.resize(J);
  for (std::size_t j = 0; j < J; ++j) s.eta[j] = draw_eta_prior(h, rng);
  s.sigma2.assign(J, 1.0);
  s.V.assign(N, 0.5);
  s.V[N - 1] = 1.0;
  s.W = stick_break(s.V, N);
  s.q.assign(J, 0.5);
  s.q[J - 1] = 1.0;
  s.p = stick_break(s.q, J);
  s.L.resize(data.distinct());
  s.Z.resize(data.distinct());
  std::size_t flat = 0;
  for (std::size_t i = 0; i < data.distinct(); ++i) {
    s.L[i] = static_cast<int>(i % N);
    s.Z[i].resize(data.count(i));
    for (auto& z : s.Z[i]) z = static_cast<int>(flat++ % J);
  }
  s.M1 = h.a_M1 / h.b_M1;
  s.M2 = h.a_M2 / h.b_M2;
  return s;
}

// ---------------------------------------------------------------------------
// alpha_l | - : prior N(c0, Sigma0) times prod exp(-|w - alpha|^2 / 2 sigma2) over the
// residuals w = Y_ir - beta_l(X_i) - eta_{Z_ir} of sites allocated to l. Completing
// the square gives precision Sigma0^{-1} + T I, T = sum 1/sigma2, and mean
// P^{-1} (Sigma0^{-1} c0 + sum w / sigma2).

void update_locations_alpha(ChainState& s, const GibbsModel& model, Rng& rng) {
  const auto& h = model.hyper();
  const auto& data = model.data();
  const auto N = static_cast<std::size_t>(h.N);
  std::vector<double> T(N, 0.0);
  std::vector<Vec> bsum(N, Vec::Zero(h.k));
  for (std::size_t i = 0; i < data.distinct(); ++i) {
    const auto l = static_cast<std::size_t>(s.L[i]);
    for (std::size_t r = 0; r < data.count(i); ++r) {
      const auto j = static_cast<std::size_t>(s.Z[i][r]);
      const double inv = 1.0 / s.sigma2[j];
      T[l] += inv;
      bsum[l] += inv * (data.ys[i][r] - s.beta[l][i] - s.eta[j]);
    }
  }
  const Vec prior_h = model.sigma0_inv() * h.c0;
  for (std::size_t l = 0; l < N; ++l) {
    if (T[l] == 0.0) {
      s.alpha[l] = draw_alpha_prior(model, rng);
      continue;
    }
    Mat P = model.sigma0_inv();
    P.diagonal().array() += T[l];
    Eigen::LLT<Mat> llt(P);
    const Vec mean = llt.solve(prior_h + bsum[l]);
    s.alpha[l] = mean + llt.matrixU().solve(std_normal_vec(h.k, rng));
  }
}

// ---------------------------------------------------------------------------
// beta_l for a used cluster, coordinate c, with A the allocated sites and U the rest.
// With Q = K^{-1} partitioned over (A, U) and prior mean mu = c1[c] x:
//   beta_A | beta_U, - : precision Q_AA + diag(tau),
//                        mean (Q_AA + diag tau)^{-1} (Q_AA mu_A - Q_AU (beta_U - mu_U) + b_A)
//   beta_U | beta_A    : precision Q_UU, mean mu_U - Q_UU^{-1} Q_UA (beta_A - mu_A)
// where tau_i = sum_r 1/sigma2 and b_i = sum_r (Y_ir - alpha_l - eta_{Z_ir})[c] / sigma2.

void update_gp_blocks_beta(ChainState& s, const GibbsModel& model, Rng& rng) {
  const auto& h = model.hyper();
  const auto& data = model.data();
  const auto N = static_cast<std::size_t>(h.N);
  const std::size_t d = data.distinct();
  const Mat& Q = model.kernel().precision;

  std::vector<std::vector<Eigen::Index>> members(N);
  for (std::size_t i = 0; i < d; ++i) members[static_cast<std::size_t>(s.L[i])].push_back(static_cast<Eigen::Index>(i));

  for (std::size_t l = 0; l < N; ++l) {
    const auto& A = members[l];
    if (A.empty()) {
      s.beta[l] = draw_beta_prior(model, rng);
      continue;
    }
    std::vector<Eigen::Index> U;
    U.reserve(d - A.size());
    for (std::size_t i = 0, a = 0; i < d; ++i) {
      if (a < A.size() && A[a] == static_cast<Eigen::Index>(i)) {
        ++a;
      } else {
        U.push_back(static_cast<Eigen::Index>(i));
      }
    }
    const auto na = static_cast<Eigen::Index>(A.size());
    const auto nu = static_cast<Eigen::Index>(U.size());

    Vec tau = Vec::Zero(na);
    Mat b = Mat::Zero(na, h.k);
    for (Eigen::Index a = 0; a < na; ++a) {
      const auto i = static_cast<std::size_t>(A[static_cast<std::size_t>(a)]);
      for (std::size_t r = 0; r < data.count(i); ++r) {
        const auto j = static_cast<std::size_t>(s.Z[i][r]);
        const double inv = 1.0 / s.sigma2[j];
        tau[a] += inv;
        b.row(a) += inv * (data.ys[i][r] - s.alpha[l] - s.eta[j]).transpose();
      }
    }

    const Mat Q_AA = Q(A, A);
    const Mat Q_AU = Q(A, U);
    Mat P = Q_AA;
    P.diagonal() += tau;
    Eigen::LLT<Mat> llt_a(P);
    if (llt_a.info() != Eigen::Success) throw std::runtime_error("beta update: factorization failed");

    Eigen::LLT<Mat> llt_u;
    if (nu > 0) {
      llt_u.compute(Q(U, U));
      if (llt_u.info() != Eigen::Success) throw std::runtime_error("beta update: factorization failed");
    }

    for (int c = 0; c < h.k; ++c) {
      Vec mu_A(na), mu_U(nu), beta_U(nu);
      for (Eigen::Index a = 0; a < na; ++a) mu_A[a] = h.c1[c] * data.xs[static_cast<std::size_t>(A[static_cast<std::size_t>(a)])];
      for (Eigen::Index u = 0; u < nu; ++u) {
        const auto i = static_cast<std::size_t>(U[static_cast<std::size_t>(u)]);
        mu_U[u] = h.c1[c] * data.xs[i];
        beta_U[u] = s.beta[l][i][c];
      }
      Vec rhs = Q_AA * mu_A + b.col(c);
      if (nu > 0) rhs -= Q_AU * (beta_U - mu_U);
      const Vec beta_A = llt_a.solve(rhs) + llt_a.matrixU().solve(std_normal_vec(na, rng));
      for (Eigen::Index a = 0; a < na; ++a) s.beta[l][static_cast<std::size_t>(A[static_cast<std::size_t>(a)])][c] = beta_A[a];

      if (nu > 0) {
        const Vec mean_U = mu_U - llt_u.solve(Q_AU.transpose() * (beta_A - mu_A));
        const Vec draw_U = mean_U + llt_u.matrixU().solve(std_normal_vec(nu, rng));
        for (Eigen::Index u = 0; u < nu; ++u) s.beta[l][static_cast<std::size_t>(U[static_cast<std::size_t>(u)])][c] = draw_U[u];
      }
    }
  }
}

// ---------------------------------------------------------------------------

std::pair<std::vector<double>, std::vector<double>> update_stick_weights(std::span<const int> counts, double M,
                                                                          std::size_t m, Rng& rng) {
  if (counts.size() != m) throw std::invalid_argument("stick update: counts must have length m");
  std::vector<double> V(m, 1.0);
  long tail = 0;
  for (int c : counts) {
    if (c < 0) throw std::invalid_argument("stick update: negative count");
    tail += c;
  }
  for (std::size_t l = 0; l + 1 < m; ++l) {
    tail -= counts[l];
    V[l] = rng.beta(1.0 + counts[l], M + static_cast<double>(tail));
  }
  auto W = stick_break(V, m);
  return {std::move(V), std::move(W)};
}

std::vector<int> cluster_counts(const ChainState& s, std::size_t N) {
  std::vector<int> u(N, 0);
  for (int l : s.L) ++u[static_cast<std::size_t>(l)];
  return u;
}

std::vector<int> error_counts(const ChainState& s, std::size_t J) {
  std::vector<int> u(J, 0);
  for (const auto& row : s.Z) {
    for (int j : row) ++u[static_cast<std::size_t>(j)];
  }
  return u;
}

std::vector<double> allocation_log_weights(const ChainState& s, const GibbsModel& model, std::size_t i) {
  const auto& data = model.data();
  const auto N = static_cast<std::size_t>(model.hyper().N);
  std::vector<double> lw(N);
  for (std::size_t l = 0; l < N; ++l) {
    if (!(s.W[l] > 0.0)) {
      lw[l] = -std::numeric_limits<double>::infinity();
      continue;
    }
    double acc = std::log(s.W[l]);
    const Vec loc = s.alpha[l] + s.beta[l][i];
    for (std::size_t r = 0; r < data.count(i); ++r) {
      const auto j = static_cast<std::size_t>(s.Z[i][r]);
      acc += log_normal_iso(data.ys[i][r] - loc - s.eta[j], s.sigma2[j]);
    }
    lw[l] = acc;
  }
  return lw;
}

void update_allocations_L(ChainState& s, const GibbsModel& model, Rng& rng) {
  for (std::size_t i = 0; i < model.data().distinct(); ++i) {
    const auto probs = softmax_probs(allocation_log_weights(s, model, i));
    s.L[i] = static_cast<int>(rng.categorical(probs));
  }
}

// ---------------------------------------------------------------------------

namespace {

// residuals Y_ir - alpha_{L_i} - beta_{L_i}(X_i) grouped by error component
struct ErrorResiduals {
  std::vector<int> count;
  std::vector<Vec> sum;
};

ErrorResiduals error_residuals(const ChainState& s, const GibbsModel& model) {
  const auto& data = model.data();
  const auto J = static_cast<std::size_t>(model.hyper().J);
  ErrorResiduals out{std::vector<int>(J, 0), std::vector<Vec>(J, Vec::Zero(model.hyper().k))};
  for (std::size_t i = 0; i < data.distinct(); ++i) {
    const auto l = static_cast<std::size_t>(s.L[i]);
    const Vec loc = s.alpha[l] + s.beta[l][i];
    for (std::size_t r = 0; r < data.count(i); ++r) {
      const auto j = static_cast<std::size_t>(s.Z[i][r]);
      ++out.count[j];
      out.sum[j] += data.ys[i][r] - loc;
    }
  }
  return out;
}

}  // namespace

void update_error_means_eta(ChainState& s, const GibbsModel& model, Rng& rng) {
  const auto& h = model.hyper();
  const auto res = error_residuals(s, model);
  for (std::size_t j = 0; j < static_cast<std::size_t>(h.J); ++j) {
    if (res.count[j] == 0) {
      s.eta[j] = draw_eta_prior(h, rng);
      continue;
    }
    const double prec = 1.0 / h.s_eta2 + res.count[j] / s.sigma2[j];
    const Vec mean = (h.c_eta / h.s_eta2 + res.sum[j] / s.sigma2[j]) / prec;
    s.eta[j] = mean + std_normal_vec(h.k, rng) / std::sqrt(prec);
  }
}

void update_error_vars_sigma2(ChainState& s, const GibbsModel& model, Rng& rng) {
  const auto& h = model.hyper();
  const auto& data = model.data();
  const auto J = static_cast<std::size_t>(h.J);
  std::vector<int> count(J, 0);
  std::vector<double> ss(J, 0.0);
  for (std::size_t i = 0; i < data.distinct(); ++i) {
    const auto l = static_cast<std::size_t>(s.L[i]);
    const Vec loc = s.alpha[l] + s.beta[l][i];
    for (std::size_t r = 0; r < data.count(i); ++r) {
      const auto j = static_cast<std::size_t>(s.Z[i][r]);
      ++count[j];
      ss[j] += (data.ys[i][r] - loc - s.eta[j]).squaredNorm();
    }
  }
  for (std::size_t j = 0; j < J; ++j) {
    const double shape = h.a + 0.5 * h.k * count[j];
    const double rate = h.b + 0.5 * ss[j];
    s.sigma2[j] = rng.inv_gamma(shape, rate);
  }
}

std::vector<double> error_allocation_log_weights(const ChainState& s, const GibbsModel& model, std::size_t i,
                                                 std::size_t r) {
  const auto J = static_cast<std::size_t>(model.hyper().J);
  const auto l = static_cast<std::size_t>(s.L[i]);
  const Vec resid = model.data().ys[i][r] - s.alpha[l] - s.beta[l][i];
  std::vector<double> lw(J);
  for (std::size_t j = 0; j < J; ++j) {
    lw[j] = s.p[j] > 0.0 ? std::log(s.p[j]) + log_normal_iso(resid - s.eta[j], s.sigma2[j])
                         : -std::numeric_limits<double>::infinity();
  }
  return lw;
}

void update_error_allocations_Z(ChainState& s, const GibbsModel& model, Rng& rng) {
  const auto& data = model.data();
  for (std::size_t i = 0; i < data.distinct(); ++i) {
    for (std::size_t r = 0; r < data.count(i); ++r) {
      const auto probs = softmax_probs(error_allocation_log_weights(s, model, i, r));
      s.Z[i][r] = static_cast<int>(rng.categorical(probs));
    }
  }
}

double update_concentration(double a0, double b0, double last_weight, std::size_t m, Rng& rng) {
  if (!(last_weight <= 1.0) || last_weight < 0.0 || std::isnan(last_weight)) {
    throw std::invalid_argument("concentration update: last weight must lie in (0,1]");
  }
  const double w = std::max(last_weight, 1e-300);
  return rng.gamma(a0 + static_cast<double>(m), b0 - std::log(w));
}

void gibbs_sweep(ChainState& s, const GibbsModel& model, SamplerStreams& streams) {
  const auto& h = model.hyper();
  const auto N = static_cast<std::size_t>(h.N);
  const auto J = static_cast<std::size_t>(h.J);
  update_locations_alpha(s, model, streams.alpha);
  update_gp_blocks_beta(s, model, streams.beta);
  {
    auto [V, W] = update_stick_weights(cluster_counts(s, N), s.M1, N, streams.weights);
    s.V = std::move(V);
    s.W = std::move(W);
  }
  update_allocations_L(s, model, streams.L);
  update_error_means_eta(s, model, streams.eta);
  update_error_vars_sigma2(s, model, streams.sigma2);
  update_error_allocations_Z(s, model, streams.Z);
  {
    auto [q, p] = update_stick_weights(error_counts(s, J), s.M2, J, streams.p);
    s.q = std::move(q);
    s.p = std::move(p);
  }
  s.M1 = update_concentration(h.a_M1, h.b_M1, s.W[N - 1], N, streams.M1);
  s.M2 = update_concentration(h.a_M2, h.b_M2, s.p[J - 1], J, streams.M2);
}

double log_likelihood(const ChainState& s, const GibbsModel& model) {
  const auto& data = model.data();
  const auto J = static_cast<std::size_t>(model.hyper().J);
  double total = 0.0;
  std::vector<double> lw(J);
  for (std::size_t i = 0; i < data.distinct(); ++i) {
    const auto l = static_cast<std::size_t>(s.L[i]);
    const Vec loc = s.alpha[l] + s.beta[l][i];
    for (std::size_t r = 0; r < data.count(i); ++r) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < J; ++j) {
        lw[j] = s.p[j] > 0.0 ? std::log(s.p[j]) + log_normal_iso(data.ys[i][r] - loc - s.eta[j], s.sigma2[j])
                             : -std::numeric_limits<double>::infinity();
        mx = std::max(mx, lw[j]);
      }
      double acc = 0.0;
      for (double v : lw) acc += std::exp(v - mx);
      total += mx + std::log(acc);
    }
  }
  return total;
}

StoredDraw StoredDraw::from_state(const ChainState& s, double loglik) {
  return StoredDraw{s.alpha, s.beta, s.W, s.L, s.p, s.eta, s.sigma2, s.M1, s.M2, loglik};
}

void PosteriorDraws::validate() const {
  if (draws.empty()) throw std::invalid_argument("posterior draws: no draws");
  data.validate();
  hyper.validate();
  const auto N = static_cast<std::size_t>(hyper.N);
  const auto J = static_cast<std::size_t>(hyper.J);
  for (const auto& d : draws) {
    if (d.alpha.size() != N || d.beta.size() != N || d.W.size() != N || d.p.size() != J || d.eta.size() != J ||
        d.sigma2.size() != J || d.L.size() != data.distinct()) {
      throw std::invalid_argument("posterior draws: draw does not match the model dimensions");
    }
    for (const auto& row : d.beta) {
      if (row.size() != data.distinct()) throw std::invalid_argument("posterior draws: beta shape");
    }
    for (int l : d.L) {
      if (l < 0 || static_cast<std::size_t>(l) >= N) throw std::invalid_argument("posterior draws: L out of range");
    }
  }
}

PosteriorDraws run_chain(const Dataset& data, const Hyperparams& hyper, const McmcSettings& mcmc) {
  mcmc.validate();
  GibbsModel model(data, hyper);
  SamplerStreams streams(mcmc.seed);
  ChainState state = initial_state(model, streams.init);

  PosteriorDraws out;
  out.data = model.data();
  out.hyper = model.hyper();
  out.mcmc = mcmc;
  out.draws.reserve(static_cast<std::size_t>(mcmc.n_draws));
  const long total = mcmc.burn_in + static_cast<long>(mcmc.n_draws) * mcmc.thin;
  for (long it = 1; it <= total; ++it) {
    gibbs_sweep(state, model, streams);
    if (mcmc.check_invariants) state.check_invariants(model.data(), model.hyper());
    if (it > mcmc.burn_in && (it - mcmc.burn_in) % mcmc.thin == 0) {
      out.draws.push_back(StoredDraw::from_state(state, log_likelihood(state, model)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const nlohmann::json& j) {
  const auto raw = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

nlohmann::json vecs_json(const std::vector<Vec>& vs) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& v : vs) a.push_back(vec_json(v));
  return a;
}

std::vector<Vec> json_vecs(const nlohmann::json& j) {
  std::vector<Vec> out;
  for (const auto& e : j) out.push_back(json_vec(e));
  return out;
}

nlohmann::json data_json(const Dataset& d) {
  nlohmann::json ys = nlohmann::json::array();
  for (const auto& g : d.ys) ys.push_back(vecs_json(g));
  return {{"xs", d.xs}, {"ys", ys}};
}

Dataset json_data(const nlohmann::json& j) {
  Dataset d;
  d.xs = j.at("xs").get<std::vector<double>>();
  for (const auto& g : j.at("ys")) d.ys.push_back(json_vecs(g));
  d.validate();
  return d;
}

}  // namespace

nlohmann::json draw_to_json(const StoredDraw& d) {
  nlohmann::json beta = nlohmann::json::array();
  for (const auto& row : d.beta) beta.push_back(vecs_json(row));
  std::vector<int> L1(d.L);
  for (int& l : L1) ++l;
  return {{"type", "draw"}, {"alpha", vecs_json(d.alpha)}, {"beta", beta},  {"W", d.W},
          {"L", L1},        {"p", d.p},                     {"eta", vecs_json(d.eta)}, {"sigma2", d.sigma2},
          {"M1", d.M1},     {"M2", d.M2},                   {"loglik", d.loglik}};
}

StoredDraw draw_from_json(const nlohmann::json& j) {
  StoredDraw d;
  d.alpha = json_vecs(j.at("alpha"));
  for (const auto& row : j.at("beta")) d.beta.push_back(json_vecs(row));
  d.W = j.at("W").get<std::vector<double>>();
  d.L = j.at("L").get<std::vector<int>>();
  for (int& l : d.L) --l;
  d.p = j.at("p").get<std::vector<double>>();
  d.eta = json_vecs(j.at("eta"));
  d.sigma2 = j.at("sigma2").get<std::vector<double>>();
  d.M1 = j.at("M1").get<double>();
  d.M2 = j.at("M2").get<double>();
  d.loglik = j.value("loglik", 0.0);
  return d;
}

void write_draws_jsonl(std::ostream& out, const PosteriorDraws& draws) {
  const nlohmann::json header{{"type", "header"}, {"hyper", draws.hyper}, {"mcmc", draws.mcmc},
                              {"data", data_json(draws.data)}};
  out << header.dump() << '\n';
  for (const auto& d : draws.draws) out << draw_to_json(d).dump() << '\n';
}

PosteriorDraws read_draws_jsonl(std::istream& in) {
  PosteriorDraws out;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("chain file line " + std::to_string(lineno) + ": " + e.what());
    }
    const auto type = j.value("type", std::string("draw"));
    if (type == "header") {
      out.hyper = j.at("hyper").get<Hyperparams>();
      out.mcmc = j.at("mcmc").get<McmcSettings>();
      out.data = json_data(j.at("data"));
      have_header = true;
    } else {
      out.draws.push_back(draw_from_json(j));
    }
  }
  if (!have_header) throw std::runtime_error("chain file: missing header line");
  out.validate();
  return out;
}

}  // namespace ddpq
