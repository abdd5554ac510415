#pragma once

// Conditional geometric quantiles from posterior draws:
//   Q_{Y|x}(u) = xi(x) + Q_eps(u), evaluated draw by draw,
// with optional smoothing of x over a window [x - delta, x + delta].

#include "ddpq/geoquant.hpp"
#include "ddpq/gibbs.hpp"
#include "ddpq/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

namespace ddpq {

enum class ErrorQuantileMethod { monte_carlo, polar };

struct ErrorQuantileSettings {
  SolverSettings solver{.tol = 1e-7, .max_iter = 500, .mc_samples = 2000};
  ErrorQuantileMethod method = ErrorQuantileMethod::monte_carlo;
  std::uint64_t seed = 0;
};

struct QuantileQuery {
  Direction u = Direction::zero(2);
  double x = 0.0;
  double delta = 0.0;  // 0: no smoothing
  double level = 0.95;
  int smoothing_samples = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct QuantileEstimate {
  Vec point;
  Vec ci_lower;
  Vec ci_upper;
  std::vector<Vec> per_draw;
};

class CovariateDensity {
 public:
  enum class Kind { parametric_normal, gaussian_kde };

  static CovariateDensity normal(double mean, double sd);
  static CovariateDensity kde(std::vector<double> sample, double bandwidth);

  Kind kind() const { return kind_; }
  double mean() const { return mean_; }
  double sd() const { return sd_; }
  double bandwidth() const { return bandwidth_; }
  const std::vector<double>& sample() const { return sample_; }

  double pdf(double x) const;
  double cdf(double x) const;

  /// One draw restricted to [lo, hi]: rejection sampling capped at
  /// `max_tries`, then inverse-CDF by bisection. Throws when the window holds
  /// less than 1e-12 of the mass.
  double sample_truncated(double lo, double hi, Rng& rng, int max_tries = 1000) const;

 private:
  Kind kind_ = Kind::parametric_normal;
  double mean_ = 0.0;
  double sd_ = 1.0;
  std::vector<double> sample_;
  double bandwidth_ = 0.0;
};

/// Gaussian KDE with Silverman's bandwidth 1.06 sd n^{-1/5}.
CovariateDensity kde_fit(const std::vector<double>& sample);

/// n^{-1/3}
double default_delta(std::size_t n);

/// alpha_l + beta_l(x) for draw b, with beta_l(x) drawn from its GP
/// conditional given the stored knot values.
Vec cluster_location_at(const PosteriorDraws& draws, std::size_t b, std::size_t l, double x, Rng& rng);

/// xi(x) for draw b: at an observed covariate the allocated cluster's
/// location; elsewhere a cluster drawn from W and its GP-conditional location.
Vec location_draw_at(const PosteriorDraws& draws, std::size_t b, double x, Rng& rng);

/// Q_eps^b(u) for every draw b.
std::vector<Vec> error_quantile_per_draw(const PosteriorDraws& draws, const Direction& u,
                                         const ErrorQuantileSettings& settings);

/// Sorted-order-statistic percentile with linear interpolation, p in [0,1].
double percentile(std::vector<double> values, double p);

/// Mean and coordinate-wise equal-tailed interval of the per-draw values.
QuantileEstimate summarize(std::vector<Vec> per_draw, double level);

/// delta = 0 path; `error_q` from error_quantile_per_draw with the same u.
QuantileEstimate conditional_quantile(const PosteriorDraws& draws, const QuantileQuery& query,
                                      const std::vector<Vec>& error_q);
QuantileEstimate conditional_quantile(const PosteriorDraws& draws, const QuantileQuery& query,
                                      const ErrorQuantileSettings& settings);

/// Smoothed quantile: per draw, the average of xi(x~) over query.smoothing_samples
/// covariates x~ drawn from `density` truncated to [x - delta, x + delta], plus Q_eps.
QuantileEstimate delta_smoothed_quantile(const PosteriorDraws& draws, const QuantileQuery& query,
                                         const CovariateDensity& density, const std::vector<Vec>& error_q);
QuantileEstimate delta_smoothed_quantile(const PosteriorDraws& draws, const QuantileQuery& query,
                                         const CovariateDensity& density, const ErrorQuantileSettings& settings);

struct QuantileRow {
  double x;
  Vec u;
  QuantileEstimate estimate;
};

/// CSV: x,u1..uk,point1..pointk,lo1..lok,hi1..hik.
void write_quantile_csv(std::ostream& out, const std::vector<QuantileRow>& rows,
                        int precision = std::numeric_limits<double>::max_digits10);

}  // namespace ddpq
