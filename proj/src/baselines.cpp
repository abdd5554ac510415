#include "ddpq/baselines.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ddpq {

namespace {

void check_inputs(const std::vector<double>& xs, const std::vector<Vec>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("baseline: xs and ys differ in length");
  if (xs.empty()) throw std::invalid_argument("baseline: no observations");
}

// Weighted least squares of every response coordinate on (1, x).
void weighted_line(const std::vector<double>& xs, const std::vector<Vec>& ys, const std::vector<double>& w,
                   Vec& alpha, Vec& beta) {
  double sw = 0.0, sx = 0.0, sxx = 0.0;
  const Eigen::Index k = ys.front().size();
  Vec sy = Vec::Zero(k), sxy = Vec::Zero(k);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sw += w[i];
    sx += w[i] * xs[i];
    sxx += w[i] * xs[i] * xs[i];
    sy += w[i] * ys[i];
    sxy += (w[i] * xs[i]) * ys[i];
  }
  const double det = sw * sxx - sx * sx;
  if (!(std::abs(det) > 0.0)) throw std::invalid_argument("linear median fit: covariate values are all identical");
  beta = (sw * sxy - sx * sy) / det;
  alpha = (sy - sx * beta) / sw;
}

}  // namespace

double linear_median_objective(const std::vector<double>& xs, const std::vector<Vec>& ys, const Vec& alpha,
                               const Vec& beta) {
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) acc += (ys[i] - alpha - beta * xs[i]).norm();
  return acc;
}

LinearMedianFit linear_spatial_median_fit(const std::vector<double>& xs, const std::vector<Vec>& ys,
                                          const IrlsSettings& settings) {
  check_inputs(xs, ys);
  if (xs.size() < 2) throw std::invalid_argument("linear median fit: need at least two observations");
  bool distinct = false;
  for (double x : xs) distinct = distinct || x != xs.front();
  if (!distinct) throw std::invalid_argument("linear median fit: covariate values are all identical");

  LinearMedianFit fit;
  std::vector<double> w(xs.size(), 1.0);
  weighted_line(xs, ys, w, fit.alpha_hat, fit.beta_hat);
  fit.objective = linear_median_objective(xs, ys, fit.alpha_hat, fit.beta_hat);

  for (int it = 1; it <= settings.max_iter; ++it) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double r = (ys[i] - fit.alpha_hat - fit.beta_hat * xs[i]).norm();
      w[i] = 1.0 / std::max(r, settings.damping);
    }
    Vec a, b;
    weighted_line(xs, ys, w, a, b);
    const double obj = linear_median_objective(xs, ys, a, b);
    fit.iterations = it;
    const double decrease = fit.objective - obj;
    if (obj <= fit.objective) {
      fit.alpha_hat = std::move(a);
      fit.beta_hat = std::move(b);
      fit.objective = obj;
    }
    fit.trace.push_back(fit.objective);
    if (decrease < settings.rel_tol * (1.0 + fit.objective)) break;
  }
  return fit;
}

Vec kernel_spatial_median(const std::vector<double>& xs, const std::vector<Vec>& ys, double x, double h,
                          const Vec& u) {
  check_inputs(xs, ys);
  if (!(h > 0.0)) throw std::invalid_argument("kernel median: bandwidth must be positive");
  std::vector<double> w(xs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double z = (x - xs[i]) / h;
    w[i] = std::exp(-0.5 * z * z);
    total += w[i];
  }
  if (!(total > 0.0)) throw std::runtime_error("kernel median: every kernel weight underflowed");
  for (double& v : w) v /= total;

  const Eigen::Index k = ys.front().size();
  Points pts(k, static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < ys.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = ys[i];
  SolverSettings s;
  s.tol = 1e-10;
  s.max_iter = 5000;
  return weighted_geometric_quantile(pts, w, u, s).point;
}

Vec kernel_spatial_median(const std::vector<double>& xs, const std::vector<Vec>& ys, double x, double h) {
  check_inputs(xs, ys);
  return kernel_spatial_median(xs, ys, x, h, Vec::Zero(ys.front().size()));
}

double loo_risk(const std::vector<double>& xs, const std::vector<Vec>& ys, double h) {
  check_inputs(xs, ys);
  double risk = 0.0;
  std::vector<double> x_rest;
  std::vector<Vec> y_rest;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x_rest.clear();
    y_rest.clear();
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (j == i) continue;
      x_rest.push_back(xs[j]);
      y_rest.push_back(ys[j]);
    }
    try {
      risk += (ys[i] - kernel_spatial_median(x_rest, y_rest, xs[i], h)).squaredNorm();
    } catch (const std::runtime_error&) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return risk;
}

double cv_bandwidth(const std::vector<double>& xs, const std::vector<Vec>& ys, const std::vector<double>& h_grid) {
  if (h_grid.empty()) throw std::invalid_argument("cv_bandwidth: empty bandwidth grid");
  for (double h : h_grid) {
    if (!(h > 0.0)) throw std::invalid_argument("cv_bandwidth: bandwidths must be positive");
  }
  if (h_grid.size() == 1) return h_grid.front();
  double best_h = h_grid.front();
  double best = std::numeric_limits<double>::infinity();
  for (double h : h_grid) {
    const double r = loo_risk(xs, ys, h);
    if (r < best) {
      best = r;
      best_h = h;
    }
  }
  return best_h;
}

std::vector<double> default_bandwidth_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 20; ++i) g.push_back(0.1 * i);
  return g;
}

}  // namespace ddpq
