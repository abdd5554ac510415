#pragma once

// Block Gibbs sampler for the truncated DDP quantile-regression model.

#include "ddpq/model.hpp"
#include "ddpq/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

namespace ddpq {

struct McmcSettings {
  int n_draws = 5000;
  int burn_in = 500;
  int thin = 1;
  std::uint64_t seed = 1;
#ifdef NDEBUG
  bool check_invariants = false;
#else
  bool check_invariants = true;
#endif

  void validate() const;
};

void to_json(nlohmann::json& j, const McmcSettings& m);
void from_json(const nlohmann::json& j, McmcSettings& m);

/// Data, priors and the quantities derived from them once per chain.
class GibbsModel {
 public:
  GibbsModel(Dataset data, Hyperparams hyper);

  const Dataset& data() const { return data_; }
  const Hyperparams& hyper() const { return hyper_; }
  const GPKernelMatrix& kernel() const { return kernel_; }
  const Mat& sigma0_inv() const { return sigma0_inv_; }
  const Mat& sigma0_chol() const { return sigma0_chol_; }

 private:
  Dataset data_;
  Hyperparams hyper_;
  GPKernelMatrix kernel_;
  Mat sigma0_inv_;
  Mat sigma0_chol_;
};

/// One independent stream per update type, so extra draws in one update never
/// shift another's sequence.
struct SamplerStreams {
  explicit SamplerStreams(std::uint64_t seed);

  Rng init, alpha, beta, weights, L, eta, sigma2, Z, p, M1, M2;
};

/// Overdispersed deterministic start: L_i = i mod N, Z by flat index mod J,
/// alpha, eta and beta from their priors, sigma2 = 1, sticks at 0.5, M at the
/// prior means.
ChainState initial_state(const GibbsModel& model, Rng& rng);

void update_locations_alpha(ChainState& s, const GibbsModel& model, Rng& rng);
void update_gp_blocks_beta(ChainState& s, const GibbsModel& model, Rng& rng);

/// V_l ~ Be(1 + U_l, M + sum_{r>l} U_r) for l < m-1, W = stick_break(V).
/// The returned V has length m with V[m-1] = 1.
std::pair<std::vector<double>, std::vector<double>> update_stick_weights(std::span<const int> counts, double M,
                                                                          std::size_t m, Rng& rng);

/// Unnormalized log-probabilities of L_i over the N clusters.
std::vector<double> allocation_log_weights(const ChainState& s, const GibbsModel& model, std::size_t i);
void update_allocations_L(ChainState& s, const GibbsModel& model, Rng& rng);

void update_error_means_eta(ChainState& s, const GibbsModel& model, Rng& rng);
void update_error_vars_sigma2(ChainState& s, const GibbsModel& model, Rng& rng);

/// Unnormalized log-probabilities of Z_ir over the J error components.
std::vector<double> error_allocation_log_weights(const ChainState& s, const GibbsModel& model, std::size_t i,
                                                 std::size_t r);
void update_error_allocations_Z(ChainState& s, const GibbsModel& model, Rng& rng);

/// Draw from Ga(a0 + m, b0 - log(last_weight)); a last weight that underflowed
/// to 0 is clamped to 1e-300.
double update_concentration(double a0, double b0, double last_weight, std::size_t m, Rng& rng);

std::vector<int> cluster_counts(const ChainState& s, std::size_t N);
std::vector<int> error_counts(const ChainState& s, std::size_t J);

/// alpha, beta, W, L, eta, sigma2, Z, p, M1, M2 in that order.
void gibbs_sweep(ChainState& s, const GibbsModel& model, SamplerStreams& streams);

/// sum_ir log sum_j p_j N_k(Y_ir; alpha_{L_i} + beta_{L_i}(X_i) + eta_j, sigma2_j I)
double log_likelihood(const ChainState& s, const GibbsModel& model);

/// The parts of a chain state kept after burn-in.
struct StoredDraw {
  std::vector<Vec> alpha;
  std::vector<std::vector<Vec>> beta;
  std::vector<double> W;
  std::vector<int> L;
  std::vector<double> p;
  std::vector<Vec> eta;
  std::vector<double> sigma2;
  double M1 = 0.0;
  double M2 = 0.0;
  double loglik = 0.0;

  static StoredDraw from_state(const ChainState& s, double loglik);
};

struct PosteriorDraws {
  std::vector<StoredDraw> draws;
  Dataset data;
  Hyperparams hyper;
  McmcSettings mcmc;

  std::size_t size() const { return draws.size(); }
  void validate() const;
};

PosteriorDraws run_chain(const Dataset& data, const Hyperparams& hyper, const McmcSettings& mcmc);

// JSON-lines interchange: a header line {"type":"header", hyper, mcmc, data}
// followed by one {"type":"draw", ...} line per stored draw. Cluster indices
// are written 1-based.
void write_draws_jsonl(std::ostream& out, const PosteriorDraws& draws);
PosteriorDraws read_draws_jsonl(std::istream& in);

nlohmann::json draw_to_json(const StoredDraw& d);
StoredDraw draw_from_json(const nlohmann::json& j);

}  // namespace ddpq
