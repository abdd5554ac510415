#pragma once

// Model hierarchy types and the Gaussian-process covariance machinery shared by
// the sampler and the predictor.
//
//   Y_ir = alpha_{L_i} + beta_{L_i}(X_i) + eps_ir,
//   eps_ir | Z_ir = j ~ N_k(eta_j, sigma2_j I),
//   alpha_l ~ N_k(c0, Sigma0),  beta_l(.) ~ GP(c1 x, gamma exp(-lambda |x - x'|) I_k),
//   W = stick(V), V_l ~ Be(1, M1);  p = stick(q), q_j ~ Be(1, M2),
//   eta_j ~ N_k(c_eta, s_eta2 I),  sigma2_j ~ IG(a, b),  M1, M2 ~ Ga(a_M, b_M).

#include "ddpq/geoquant.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <span>
#include <vector>

namespace ddpq {

using Mat = Eigen::MatrixXd;

struct Hyperparams {
  int k = 2;
  int N = 20;
  int J = 20;
  Vec c0 = Vec::Constant(2, 1.0);
  Mat Sigma0 = 10.0 * Mat::Identity(2, 2);
  Vec c1 = (Vec(2) << 2.0, 0.5).finished();
  double gamma = 10.0;
  double lambda = 0.5;
  Vec c_eta = Vec::Zero(2);
  double s_eta2 = 10.0;
  double a = 1.0;
  double b = 1.0;
  double a_M1 = 1.0;
  double b_M1 = 1.0;
  double a_M2 = 1.0;
  double b_M2 = 1.0;

  /// Prior settings of the simulation study (the defaults above).
  static Hyperparams simulation_defaults() { return {}; }
  void validate() const;
};

void to_json(nlohmann::json& j, const Hyperparams& h);
void from_json(const nlohmann::json& j, Hyperparams& h);

/// Responses grouped by distinct covariate value.
struct Dataset {
  std::vector<double> xs;                 // strictly increasing
  std::vector<std::vector<Vec>> ys;       // ys[i][r]

  std::size_t distinct() const { return xs.size(); }
  std::size_t count(std::size_t i) const { return ys[i].size(); }
  std::size_t total() const;
  int dim() const { return ys.empty() || ys.front().empty() ? 0 : static_cast<int>(ys.front().front().size()); }

  /// Index of an observed covariate equal to x, or -1.
  long find(double x) const;
  void validate() const;

  /// Groups (x, y) pairs by exact covariate value; sorts by x, keeping the
  /// input order of replicates.
  static Dataset from_pairs(std::span<const double> x, std::span<const Vec> y);
  /// Flattened back into (x, y) pairs in dataset order.
  void to_pairs(std::vector<double>& x, std::vector<Vec>& y) const;
};

/// One configuration of every quantity the sampler updates. Cluster indices
/// are 0-based.
struct ChainState {
  std::vector<Vec> alpha;               // N
  std::vector<std::vector<Vec>> beta;   // N x d
  std::vector<double> V;                // N, V[N-1] = 1 closes the stick
  std::vector<double> W;                // N
  std::vector<double> q;                // J, q[J-1] = 1
  std::vector<double> p;                // J
  std::vector<Vec> eta;                 // J
  std::vector<double> sigma2;           // J
  std::vector<int> L;                   // d
  std::vector<std::vector<int>> Z;      // d x n_i
  double M1 = 1.0;
  double M2 = 1.0;

  /// Throws std::logic_error naming the first broken invariant.
  void check_invariants(const Dataset& data, const Hyperparams& hyper) const;
};

/// W_1 = V_1, W_l = V_l prod_{r<l} (1 - V_r) for l < m, W_m = 1 - sum of the others.
/// Uses the first m - 1 entries of v.
std::vector<double> stick_break(std::span<const double> v, std::size_t m);

/// Inverse of stick_break where the remaining stick is positive.
std::vector<double> recover_sticks(std::span<const double> w);

struct GPKernelMatrix {
  std::vector<double> xs;
  double gamma = 0.0;
  double lambda = 0.0;
  Mat K;          // gamma exp(-lambda |x_i - x_j|), exactly symmetric
  Mat chol;       // lower factor of K + jitter I
  Mat precision;  // (K + jitter I)^{-1}
  double jitter = 0.0;

  std::size_t size() const { return xs.size(); }
};

double gp_kernel(double gamma, double lambda, double dx);

/// Builds the kernel matrix; on a failed factorization adds 1e-8 gamma I and
/// doubles it up to three times before giving up.
GPKernelMatrix gp_cov(std::span<const double> xs, double gamma, double lambda);

struct GPConditional {
  Vec mean;         // k
  double variance;  // shared by every coordinate
};

/// Distribution of beta(x_new) given beta at the kernel's knots, coordinate by
/// coordinate with prior mean c1 x.
GPConditional gp_conditional(const GPKernelMatrix& kern, std::span<const Vec> observed,
                             const Vec& c1, double x_new);

/// Same conditional using only the nearest knot on each side. Exact for the
/// exponential kernel, which is Markov in one dimension. `xs` must be sorted.
GPConditional gp_conditional_markov(std::span<const double> xs, std::span<const Vec> observed,
                                    double gamma, double lambda, const Vec& c1, double x_new);

}  // namespace ddpq
