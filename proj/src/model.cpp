#include "ddpq/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ddpq {

namespace {

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const nlohmann::json& j) {
  const auto raw = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

}  // namespace

void Hyperparams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("hyperparams: " + what); };
  if (k < 1) fail("k must be >= 1");
  if (N < 2 || J < 2) fail("N and J must be >= 2");
  if (c0.size() != k || c1.size() != k || c_eta.size() != k) fail("vector fields must have length k");
  if (Sigma0.rows() != k || Sigma0.cols() != k) fail("Sigma0 must be k x k");
  if ((Sigma0 - Sigma0.transpose()).cwiseAbs().maxCoeff() > 1e-12 * Sigma0.cwiseAbs().maxCoeff()) {
    fail("Sigma0 must be symmetric");
  }
  if (Eigen::LLT<Mat>(Sigma0).info() != Eigen::Success) fail("Sigma0 must be positive definite");
  for (double v : {gamma, lambda, s_eta2, a, b, a_M1, b_M1, a_M2, b_M2}) {
    if (!(v > 0.0) || !std::isfinite(v)) fail("scalar parameters must be positive and finite");
  }
}

void to_json(nlohmann::json& j, const Hyperparams& h) {
  nlohmann::json sigma = nlohmann::json::array();
  for (Eigen::Index r = 0; r < h.Sigma0.rows(); ++r) sigma.push_back(vec_json(h.Sigma0.row(r).transpose()));
  j = nlohmann::json{{"k", h.k},         {"N", h.N},           {"J", h.J},         {"c0", vec_json(h.c0)},
                     {"Sigma0", sigma},  {"c1", vec_json(h.c1)}, {"gamma", h.gamma}, {"lambda", h.lambda},
                     {"c_eta", vec_json(h.c_eta)}, {"s_eta2", h.s_eta2}, {"a", h.a},   {"b", h.b},
                     {"a_M1", h.a_M1},   {"b_M1", h.b_M1},     {"a_M2", h.a_M2},   {"b_M2", h.b_M2}};
}

void from_json(const nlohmann::json& j, Hyperparams& h) {
  // missing fields keep their defaults
  if (j.contains("k")) h.k = j.at("k").get<int>();
  if (j.contains("N")) h.N = j.at("N").get<int>();
  if (j.contains("J")) h.J = j.at("J").get<int>();
  if (j.contains("c0")) h.c0 = json_vec(j.at("c0"));
  if (j.contains("c1")) h.c1 = json_vec(j.at("c1"));
  if (j.contains("c_eta")) h.c_eta = json_vec(j.at("c_eta"));
  if (j.contains("Sigma0")) {
    const auto& rows = j.at("Sigma0");
    h.Sigma0.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Vec row = json_vec(rows[r]);
      if (row.size() != h.Sigma0.cols()) throw std::invalid_argument("hyperparams: Sigma0 must be square");
      h.Sigma0.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
  }
  for (auto [name, field] : {std::pair{"gamma", &h.gamma}, {"lambda", &h.lambda}, {"s_eta2", &h.s_eta2},
                             {"a", &h.a}, {"b", &h.b}, {"a_M1", &h.a_M1}, {"b_M1", &h.b_M1},
                             {"a_M2", &h.a_M2}, {"b_M2", &h.b_M2}}) {
    if (j.contains(name)) *field = j.at(name).get<double>();
  }
}

// ---------------------------------------------------------------------------

std::size_t Dataset::total() const {
  std::size_t n = 0;
  for (const auto& g : ys) n += g.size();
  return n;
}

long Dataset::find(double x) const {
  auto it = std::lower_bound(xs.begin(), xs.end(), x);
  if (it != xs.end() && *it == x) return static_cast<long>(it - xs.begin());
  return -1;
}

void Dataset::validate() const {
  if (xs.empty()) throw std::invalid_argument("dataset: no observations");
  if (ys.size() != xs.size()) throw std::invalid_argument("dataset: xs and ys differ in length");
  const int k = dim();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i])) throw std::invalid_argument("dataset: non-finite covariate");
    if (i > 0 && !(xs[i] > xs[i - 1])) throw std::invalid_argument("dataset: xs must be strictly increasing");
    if (ys[i].empty()) throw std::invalid_argument("dataset: every covariate needs a response");
    for (const Vec& y : ys[i]) {
      if (y.size() != k) throw std::invalid_argument("dataset: ragged responses");
      if (!y.allFinite()) throw std::invalid_argument("dataset: non-finite response");
    }
  }
}

Dataset Dataset::from_pairs(std::span<const double> x, std::span<const Vec> y) {
  if (x.size() != y.size()) throw std::invalid_argument("dataset: x and y differ in length");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return x[l] < x[r]; });
  Dataset out;
  for (std::size_t idx : order) {
    if (out.xs.empty() || out.xs.back() != x[idx]) {
      out.xs.push_back(x[idx]);
      out.ys.emplace_back();
    }
    out.ys.back().push_back(y[idx]);
  }
  out.validate();
  return out;
}

void Dataset::to_pairs(std::vector<double>& x, std::vector<Vec>& y) const {
  x.clear();
  y.clear();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (const Vec& v : ys[i]) {
      x.push_back(xs[i]);
      y.push_back(v);
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

void check_probability_vector(std::span<const double> w, const char* name) {
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw std::logic_error(std::string(name) + " has a negative or NaN entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::logic_error(std::string(name) + " does not sum to 1");
}

}  // namespace

void ChainState::check_invariants(const Dataset& data, const Hyperparams& hyper) const {
  const auto N = static_cast<std::size_t>(hyper.N);
  const auto J = static_cast<std::size_t>(hyper.J);
  if (alpha.size() != N || beta.size() != N || V.size() != N || W.size() != N) {
    throw std::logic_error("state: cluster arrays must have length N");
  }
  if (q.size() != J || p.size() != J || eta.size() != J || sigma2.size() != J) {
    throw std::logic_error("state: error-mixture arrays must have length J");
  }
  check_probability_vector(W, "W");
  check_probability_vector(p, "p");
  const auto w_again = stick_break(V, N);
  const auto p_again = stick_break(q, J);
  for (std::size_t l = 0; l < N; ++l) {
    if (std::abs(w_again[l] - W[l]) > 1e-12) throw std::logic_error("state: W is not stick_break(V)");
  }
  for (std::size_t j = 0; j < J; ++j) {
    if (std::abs(p_again[j] - p[j]) > 1e-12) throw std::logic_error("state: p is not stick_break(q)");
    if (!(sigma2[j] > 0.0) || !std::isfinite(sigma2[j])) throw std::logic_error("state: sigma2 must be positive");
  }
  if (!(M1 > 0.0) || !(M2 > 0.0)) throw std::logic_error("state: concentrations must be positive");
  if (L.size() != data.distinct() || Z.size() != data.distinct()) throw std::logic_error("state: allocation shape");
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (L[i] < 0 || static_cast<std::size_t>(L[i]) >= N) throw std::logic_error("state: L out of range");
    if (Z[i].size() != data.count(i)) throw std::logic_error("state: Z shape does not match ys");
    for (int z : Z[i]) {
      if (z < 0 || static_cast<std::size_t>(z) >= J) throw std::logic_error("state: Z out of range");
    }
  }
  for (const auto& row : beta) {
    if (row.size() != data.distinct()) throw std::logic_error("state: beta must have one value per covariate");
  }
}

std::vector<double> stick_break(std::span<const double> v, std::size_t m) {
  if (m == 0) return {};
  if (v.size() + 1 < m) throw std::invalid_argument("stick_break: need at least m-1 stick variables");
  std::vector<double> w(m);
  double remaining = 1.0;
  double used = 0.0;
  for (std::size_t l = 0; l + 1 < m; ++l) {
    if (!(v[l] >= 0.0 && v[l] <= 1.0)) throw std::invalid_argument("stick_break: entries must lie in [0,1]");
    w[l] = v[l] * remaining;
    remaining *= 1.0 - v[l];
    used += w[l];
  }
  w[m - 1] = std::max(0.0, 1.0 - used);
  return w;
}

std::vector<double> recover_sticks(std::span<const double> w) {
  std::vector<double> v(w.size(), 1.0);
  double used = 0.0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double rest = 1.0 - used;
    v[l] = rest > 0.0 ? std::clamp(w[l] / rest, 0.0, 1.0) : 1.0;
    used += w[l];
  }
  return v;
}

// ---------------------------------------------------------------------------

double gp_kernel(double gamma, double lambda, double dx) { return gamma * std::exp(-lambda * std::abs(dx)); }

GPKernelMatrix gp_cov(std::span<const double> xs, double gamma, double lambda) {
  if (!(gamma > 0.0) || !(lambda > 0.0)) throw std::invalid_argument("gp_cov: gamma and lambda must be positive");
  const auto d = static_cast<Eigen::Index>(xs.size());
  GPKernelMatrix out;
  out.xs.assign(xs.begin(), xs.end());
  out.gamma = gamma;
  out.lambda = lambda;
  out.K.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = gp_kernel(gamma, lambda, xs[static_cast<std::size_t>(i)] - xs[static_cast<std::size_t>(j)]);
      out.K(i, j) = v;
      out.K(j, i) = v;
    }
  }

  double jitter = 0.0;
  for (int attempt = 0; attempt <= 4; ++attempt) {
    Mat A = out.K;
    A.diagonal().array() += jitter;
    Eigen::LLT<Mat> llt(A);
    if (llt.info() == Eigen::Success && (llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
      out.chol = llt.matrixL();
      out.jitter = jitter;
      Mat P = llt.solve(Mat::Identity(d, d));
      out.precision = 0.5 * (P + P.transpose());
      return out;
    }
    jitter = attempt == 0 ? 1e-8 * gamma : 2.0 * jitter;
  }
  throw std::runtime_error("gp_cov: Cholesky factorization failed after jitter escalation");
}

GPConditional gp_conditional(const GPKernelMatrix& kern, std::span<const Vec> observed, const Vec& c1,
                             double x_new) {
  if (!std::isfinite(x_new)) throw std::invalid_argument("gp_conditional: x_new must be finite");
  const auto d = static_cast<Eigen::Index>(kern.size());
  if (observed.size() != kern.size()) throw std::invalid_argument("gp_conditional: one value per knot required");
  const Eigen::Index k = c1.size();
  Vec kv(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    kv[i] = gp_kernel(kern.gamma, kern.lambda, x_new - kern.xs[static_cast<std::size_t>(i)]);
  }
  // solve (K + jitter) a = kv through the stored factor
  Vec a = kern.chol.triangularView<Eigen::Lower>().solve(kv);
  kern.chol.triangularView<Eigen::Lower>().transpose().solveInPlace(a);

  GPConditional out;
  out.mean.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      acc += a[i] * (observed[static_cast<std::size_t>(i)][c] - c1[c] * kern.xs[static_cast<std::size_t>(i)]);
    }
    out.mean[c] = c1[c] * x_new + acc;
  }
  double var = kern.gamma - kv.dot(a);
  if (var < 0.0) {
    if (var < -1e-8) throw std::runtime_error("gp_conditional: negative conditional variance");
    var = 0.0;
  }
  out.variance = std::min(var, kern.gamma);
  return out;
}

GPConditional gp_conditional_markov(std::span<const double> xs, std::span<const Vec> observed, double gamma,
                                    double lambda, const Vec& c1, double x_new) {
  if (!std::isfinite(x_new)) throw std::invalid_argument("gp_conditional: x_new must be finite");
  if (xs.empty() || observed.size() != xs.size()) throw std::invalid_argument("gp_conditional: one value per knot required");
  auto resid = [&](std::size_t i) -> Vec { return observed[i] - c1 * xs[i]; };

  GPConditional out;
  const auto it = std::lower_bound(xs.begin(), xs.end(), x_new);
  const auto right = static_cast<std::size_t>(it - xs.begin());
  if (right < xs.size() && xs[right] == x_new) {
    out.mean = observed[right];
    out.variance = 0.0;
    return out;
  }
  if (right == 0 || right == xs.size()) {
    const std::size_t i = right == 0 ? 0 : xs.size() - 1;
    const double rho = std::exp(-lambda * std::abs(x_new - xs[i]));
    out.mean = c1 * x_new + rho * resid(i);
    out.variance = gamma * (1.0 - rho * rho);
    return out;
  }
  const std::size_t left = right - 1;
  const double ra = std::exp(-lambda * (x_new - xs[left]));
  const double rb = std::exp(-lambda * (xs[right] - x_new));
  const double den = 1.0 - ra * ra * rb * rb;
  const double wa = ra * (1.0 - rb * rb) / den;
  const double wb = rb * (1.0 - ra * ra) / den;
  out.mean = c1 * x_new + wa * resid(left) + wb * resid(right);
  out.variance = std::max(0.0, gamma * (1.0 - wa * ra - wb * rb));
  return out;
}

}  // namespace ddpq
