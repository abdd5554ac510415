#pragma once

// Simulation design for the median-regression benchmark: covariates, the two
// error laws, the response map, the MSE metric and the three-method table.

#include "ddpq/geoquant.hpp"
#include "ddpq/gibbs.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace ddpq {

enum class ErrorLaw { t1, gamma };

std::string to_string(ErrorLaw law);
ErrorLaw parse_error_law(const std::string& name);

/// Gaussian-copula correlation giving Ga(1,1) marginals a product-moment
/// correlation of 0.7 (see gamma_copula_correlation).
inline constexpr double kGammaCopulaRho = 0.7367309614712949;

std::vector<double> gen_covariates(std::size_t n, std::uint64_t seed);

/// N_2(0, I) / sqrt(chi2_1): bivariate t with one degree of freedom.
std::vector<Vec> gen_errors_t1(std::size_t n, std::uint64_t seed);

/// Ga(1,1) marginals coupled by a Gaussian copula with correlation `copula_rho`.
std::vector<Vec> gen_errors_gamma(std::size_t n, std::uint64_t seed, double copula_rho = kGammaCopulaRho);

/// Product-moment correlation of Exp(1) marginals under a Gaussian copula with
/// correlation rho, by two-dimensional quadrature.
double gamma_copula_correlation(double rho);

/// Copula rho whose output correlation equals `target`, by bisection.
double calibrate_gamma_copula(double target);

/// Y1 = 1 + 2 X^2 + e1, Y2 = X^2 + e2.
std::vector<Vec> make_response(const std::vector<double>& xs, const std::vector<Vec>& errors);

/// Noise-free part of make_response.
Vec true_location(double x);

/// Spatial median of the error law: exactly zero for t1, an empirical
/// spatial median of `truth_mc` draws for gamma.
Vec true_error_median(ErrorLaw law, std::size_t truth_mc, std::uint64_t seed);

double mse(const std::vector<Vec>& estimates, const std::vector<Vec>& truths);

struct SimConfig {
  std::size_t n = 100;
  ErrorLaw dist = ErrorLaw::t1;
  std::uint64_t seed = 1;
  std::size_t truth_mc = 1000000;

  void validate() const;
};

struct SimData {
  std::vector<double> xs;
  std::vector<Vec> ys;
};

SimData simulate(const SimConfig& config);

struct BenchSettings {
  McmcSettings mcmc{.n_draws = 5000, .burn_in = 500, .thin = 1, .seed = 0};
  std::size_t n = 100;
  std::size_t truth_mc = 1000000;
  bool zero_truth = false;  // use 0 as the gamma error median
  int smoothing_samples = 10;
  int error_mc_samples = 2000;
  std::vector<double> h_grid;  // empty: default_bandwidth_grid()
};

struct BenchRow {
  std::uint64_t seed;
  ErrorLaw law;
  std::string method;  // np-bayes | linear | np-frequentist
  double mse;
  double runtime_s;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::vector<double> chosen_bandwidth;  // per (seed, law) cell, in row order
  std::vector<Vec> error_offsets;        // per cell
};

/// NP-Bayes estimate at each covariate: posterior mean of the delta-smoothed
/// spatial median with x~ ~ N(0,1) truncated to [x - n^{-1/3}, x + n^{-1/3}].
std::vector<Vec> np_bayes_medians(const PosteriorDraws& draws, const std::vector<double>& xs, int smoothing_samples,
                                  int error_mc_samples, std::uint64_t seed);

/// One (seed, law) cell: simulate, fit the three methods, score each.
BenchResult run_table1_cell(std::uint64_t seed, ErrorLaw law, const BenchSettings& settings);

BenchResult run_table1(const std::vector<std::uint64_t>& seeds, const std::vector<ErrorLaw>& laws,
                       const BenchSettings& settings);

/// CSV: seed,error_law,method,mse,runtime_s. When `timing` is false the runtime
/// column is written as 0 so reruns are byte-identical.
void write_bench_csv(std::ostream& out, const BenchResult& result, bool timing = true,
                     int precision = std::numeric_limits<double>::max_digits10);

}  // namespace ddpq
