#pragma once

// Geometric quantiles: the Phi objective, Weiszfeld-type solvers for point
// clouds, and two evaluators of the geometric quantile of an isotropic
// Gaussian mixture (Monte Carlo and a k=2 polar/Bessel quadrature).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace ddpq {

using Vec = Eigen::VectorXd;
/// k x n, one point per column.
using Points = Eigen::MatrixXd;

/// A direction in the open unit ball. Construction validates ||u||_2 < 1.
class Direction {
 public:
  explicit Direction(Vec u);
  static Direction zero(int k) { return Direction(Vec::Zero(k)); }

  const Vec& vec() const { return u_; }
  int dim() const { return static_cast<int>(u_.size()); }
  double norm() const { return u_.norm(); }

 private:
  Vec u_;
};

struct MixtureSpec {
  std::vector<double> weights;
  std::vector<Vec> means;
  std::vector<double> variances;

  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  std::size_t size() const { return weights.size(); }
  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

struct GridBox {
  Vec lower;
  Vec upper;
};

struct SolverSettings {
  double tol = 1e-9;
  int max_iter = 1000;
  int mc_samples = 2000;
  double quadrature_rmax = 0.0;  // 0: choose from the tail bound
  int quadrature_points = 801;
  GridBox grid{};                // empty: derive from the data / mixture
  double grid_step = 1e-3;

  void validate() const;
};

/// ||t||_2 + <u, t>
double phi(const Vec& u, const Vec& t);

struct WeiszfeldResult {
  Vec point;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  /// Objective after each iteration (only when requested).
  std::vector<double> trace;
};

/// Mean of Phi(u, y_i - theta) over the cloud, weighted when `weights` is
/// nonempty (weights then need not be normalized).
double quantile_objective(const Points& points, const std::vector<double>& weights, const Vec& u,
                          const Vec& theta);

/// Minimizer of sum_i w_i Phi(u, y_i - theta) by the offset Weiszfeld map
///   theta <- (sum w_i y_i / d_i + (sum w_i) u) / (sum w_i / d_i).
/// An iterate that lands on a data point is tested against the subgradient
/// optimality condition; when it is not optimal the iteration restarts from
/// a point along the descent direction.
WeiszfeldResult weighted_geometric_quantile(const Points& points, const std::vector<double>& weights,
                                            const Vec& u, const SolverSettings& s,
                                            bool record_trace = false);

WeiszfeldResult empirical_geometric_quantile(const Points& points, const Direction& u,
                                             const SolverSettings& s, bool record_trace = false);

/// Grid minimization of a convex objective over `box`: a full scan at a
/// coarse step, then repeated local rescans at finer steps down to `step`.
/// Returns the best grid node.
template <class Objective>
Vec grid_minimize(Objective&& f, const GridBox& box, double step);

/// Grid-scan mode of the empirical quantile (cross-validation of the solver).
Vec grid_geometric_quantile(const Points& points, const Direction& u, const GridBox& box,
                            double step);

/// I0(x). Power series for x <= 15, asymptotic expansion beyond.
double bessel_i0(double x);
/// exp(-x) I0(x), same split.
double bessel_i0_scaled(double x);

/// R draws from the mixture, k x R.
Points sample_mixture(const MixtureSpec& mix, int count, std::uint64_t seed);

/// Geometric quantile of the mixture via the empirical quantile of R draws.
Vec mixture_quantile_mc(const MixtureSpec& mix, const Direction& u, const SolverSettings& s,
                        std::uint64_t seed);

/// Same R draws, minimized by grid scan of the Monte Carlo objective.
Vec mixture_quantile_mc_grid(const MixtureSpec& mix, const Direction& u, const SolverSettings& s,
                             std::uint64_t seed);

/// E||X - theta|| for X ~ N(mean, var I_2), by one-dimensional quadrature of
/// sigma * exp(-c^2/2) * int_0^rmax s^2 exp(-s^2/2) I0(c s) ds, c = ||theta-mean||/sigma.
/// The integral runs over [max(0, c - 10), min(rmax, c + 10)], outside which the
/// integrand is below c^2 e^{-50}.
double expected_norm_2d(double c, double sigma, double rmax, int points);

/// Tail bound of int_rmax^inf s^2 exp(-(s-c)^2/2) ds, which dominates the
/// neglected part of the quadrature since exp(-c^2/2 - s^2/2) I0(cs) <= exp(-(s-c)^2/2).
double polar_tail_bound(double rmax, double c);

/// Smallest rmax (on a 0.25 lattice) with polar_tail_bound < 1e-10.
double polar_rmax_for(double c_max);

/// Expected Phi objective of the mixture at theta (k = 2), via the polar reduction.
double mixture_objective_polar(const MixtureSpec& mix, const Vec& u, const Vec& theta, double rmax,
                               int points);

/// Geometric quantile of a bivariate mixture by grid minimization of the
/// polar-reduced objective.
Vec mixture_quantile_polar(const MixtureSpec& mix, const Direction& u, const SolverSettings& s);

/// Default search box for a mixture: component means +- 4 sd, widened by the
/// direction's pull.
GridBox mixture_box(const MixtureSpec& mix, const Direction& u);

// ---------------------------------------------------------------------------

template <class Objective>
Vec grid_minimize(Objective&& f, const GridBox& box, double step) {
  const int k = static_cast<int>(box.lower.size());
  Vec lo = box.lower;
  Vec hi = box.upper;
  double extent = (hi - lo).maxCoeff();
  // coarse step: at most ~64 nodes per axis on the first pass
  double h = step;
  while (extent / h > 64.0) h *= 5.0;

  Vec best = lo;
  double best_val = std::numeric_limits<double>::infinity();
  for (;;) {
    std::vector<int> count(k);
    for (int c = 0; c < k; ++c) count[c] = static_cast<int>(std::floor((hi[c] - lo[c]) / h + 1e-9)) + 1;
    std::vector<int> idx(k, 0);
    Vec theta(k);
    for (;;) {
      for (int c = 0; c < k; ++c) theta[c] = lo[c] + h * idx[c];
      const double v = f(theta);
      if (v < best_val) {
        best_val = v;
        best = theta;
      }
      int c = 0;
      while (c < k && ++idx[c] == count[c]) idx[c++] = 0;
      if (c == k) break;
    }
    if (h <= step * (1.0 + 1e-12)) break;
    const double next = std::max(step, h / 5.0);
    lo = (best.array() - 2.0 * h).max(box.lower.array());
    hi = (best.array() + 2.0 * h).min(box.upper.array());
    h = next;
  }
  return best;
}

}  // namespace ddpq
