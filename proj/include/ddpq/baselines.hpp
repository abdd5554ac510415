#pragma once

// Frequentist comparators: linear spatial-median regression and a
// kernel-weighted (Nadaraya-Watson type) spatial median.

#include "ddpq/geoquant.hpp"

#include <vector>

namespace ddpq {

struct LinearMedianFit {
  Vec alpha_hat;
  Vec beta_hat;
  double objective = 0.0;  // sum_i ||Y_i - alpha - beta X_i||_2
  int iterations = 0;
  std::vector<double> trace;  // objective after each IRLS step

  Vec predict(double x) const { return alpha_hat + beta_hat * x; }
};

struct IrlsSettings {
  int max_iter = 10000;
  double damping = 1e-8;     // residual norms are floored here
  double rel_tol = 1e-10;    // stop when the decrease < rel_tol (1 + objective)
};

double linear_median_objective(const std::vector<double>& xs, const std::vector<Vec>& ys, const Vec& alpha,
                               const Vec& beta);

/// argmin over (alpha, beta) of sum_i ||Y_i - alpha - beta X_i||_2 by iteratively
/// reweighted least squares, started from the least-squares fit.
LinearMedianFit linear_spatial_median_fit(const std::vector<double>& xs, const std::vector<Vec>& ys,
                                          const IrlsSettings& settings = {});

/// argmin_theta sum_j ||y_j - theta|| p_j(x) + <u, y_j - theta> p_j(x), with
/// p_j(x) proportional to the standard normal kernel at (x - X_j) / h.
Vec kernel_spatial_median(const std::vector<double>& xs, const std::vector<Vec>& ys, double x, double h,
                          const Vec& u);
Vec kernel_spatial_median(const std::vector<double>& xs, const std::vector<Vec>& ys, double x, double h);

/// Leave-one-out risk sum_i ||y_i - xi_{-i}(x_i)||^2; +inf when some
/// held-out point gets no kernel weight.
double loo_risk(const std::vector<double>& xs, const std::vector<Vec>& ys, double h);

/// Grid point with the smallest leave-one-out risk (first one on ties).
double cv_bandwidth(const std::vector<double>& xs, const std::vector<Vec>& ys, const std::vector<double>& h_grid);

/// 0.1, 0.2, ..., 2.0
std::vector<double> default_bandwidth_grid();

}  // namespace ddpq
