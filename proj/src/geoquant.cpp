#include "ddpq/geoquant.hpp"

#include "ddpq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ddpq {

Direction::Direction(Vec u) : u_(std::move(u)) {
  if (u_.size() == 0) throw std::invalid_argument("direction: empty vector");
  if (!u_.allFinite() || !(u_.norm() < 1.0)) {
    throw std::invalid_argument("direction: ||u||_2 must be < 1");
  }
}

void MixtureSpec::validate() const {
  if (weights.empty()) throw std::invalid_argument("mixture: no components");
  if (means.size() != weights.size() || variances.size() != weights.size()) {
    throw std::invalid_argument("mixture: weights, means and variances differ in length");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (!(weights[j] >= 0.0)) throw std::invalid_argument("mixture: negative weight");
    if (!(variances[j] > 0.0)) throw std::invalid_argument("mixture: variance must be positive");
    if (means[j].size() != means.front().size()) throw std::invalid_argument("mixture: ragged means");
    total += weights[j];
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture: weights must sum to 1");
}

void SolverSettings::validate() const {
  if (!(tol > 0.0)) throw std::invalid_argument("solver: tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("solver: max_iter must be >= 1");
  if (mc_samples < 1) throw std::invalid_argument("solver: mc_samples must be >= 1");
  if (!(grid_step > 0.0)) throw std::invalid_argument("solver: grid_step must be positive");
  if (quadrature_points < 3) throw std::invalid_argument("solver: quadrature_points must be >= 3");
}

double phi(const Vec& u, const Vec& t) {
  if (u.size() != t.size()) throw std::invalid_argument("phi: dimension mismatch");
  return t.norm() + u.dot(t);
}

double quantile_objective(const Points& points, const std::vector<double>& weights, const Vec& u,
                          const Vec& theta) {
  const Eigen::Index n = points.cols();
  double acc = 0.0;
  double wsum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
    if (w == 0.0) continue;
    const Vec t = points.col(i) - theta;
    acc += w * (t.norm() + u.dot(t));
    wsum += w;
  }
  return acc / wsum;
}

namespace {

// Objective without the normalization, used internally for descent checks.
double raw_objective(const Points& points, const std::vector<double>& w, const Vec& u,
                     const Vec& theta) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const double wi = w[static_cast<std::size_t>(i)];
    if (wi == 0.0) continue;
    const Vec t = points.col(i) - theta;
    acc += wi * (t.norm() + u.dot(t));
  }
  return acc;
}

constexpr double kSingular = 1e-9;

}  // namespace

WeiszfeldResult weighted_geometric_quantile(const Points& points, const std::vector<double>& weights,
                                            const Vec& u, const SolverSettings& s,
                                            bool record_trace) {
  s.validate();
  const Eigen::Index n = points.cols();
  const Eigen::Index k = points.rows();
  if (n == 0) throw std::invalid_argument("geometric quantile: empty point set");
  if (u.size() != k) throw std::invalid_argument("geometric quantile: dimension mismatch");
  if (!(u.norm() < 1.0)) throw std::invalid_argument("geometric quantile: ||u|| must be < 1");
  if (!weights.empty() && weights.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("geometric quantile: weight count mismatch");
  }

  std::vector<double> w = weights.empty() ? std::vector<double>(static_cast<std::size_t>(n), 1.0) : weights;
  double wsum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw std::invalid_argument("geometric quantile: negative weight");
    wsum += v;
  }
  if (!(wsum > 0.0)) throw std::invalid_argument("geometric quantile: weights sum to zero");

  WeiszfeldResult out;
  Vec theta = Vec::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) theta += w[static_cast<std::size_t>(i)] * points.col(i);
  theta /= wsum;

  const Vec pull = wsum * u;
  double current = raw_objective(points, w, u, theta);
  Vec num(k);
  Vec resid(k);

  for (int it = 1; it <= s.max_iter; ++it) {
    out.iterations = it;
    num.setZero();
    double den = 0.0;
    Eigen::Index hit = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double wi = w[static_cast<std::size_t>(i)];
      if (wi == 0.0) continue;
      const double d = (points.col(i) - theta).norm();
      if (d < kSingular) {
        hit = i;
        continue;
      }
      num.noalias() += (wi / d) * points.col(i);
      den += wi / d;
    }

    Vec next(k);
    if (hit >= 0) {
      // subgradient test at the data point
      resid = pull;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double wi = w[static_cast<std::size_t>(i)];
        if (i == hit || wi == 0.0) continue;
        const Vec diff = points.col(i) - theta;
        const double d = diff.norm();
        if (d < kSingular) continue;  // coincident points join the ball below
        resid += (wi / d) * diff;
      }
      double ball = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if ((points.col(i) - points.col(hit)).norm() < kSingular) ball += w[static_cast<std::size_t>(i)];
      }
      const double rnorm = resid.norm();
      if (rnorm <= ball) {
        out.point = points.col(hit);
        out.converged = true;
        out.objective = raw_objective(points, w, u, out.point) / wsum;
        if (record_trace) out.trace.push_back(out.objective);
        return out;
      }
      // restart along the descent direction, step halved until the objective drops
      const Vec dir = resid / rnorm;
      double t = den > 0.0 ? (rnorm - ball) / den : 1.0;
      next = points.col(hit) + t * dir;
      double val = raw_objective(points, w, u, next);
      int guard = 0;
      while (val >= current && guard++ < 60) {
        t *= 0.5;
        next = points.col(hit) + t * dir;
        val = raw_objective(points, w, u, next);
      }
    } else {
      next = (num + pull) / den;
    }

    const double moved = (next - theta).norm();
    theta = std::move(next);
    const double val = raw_objective(points, w, u, theta);
    current = std::min(current, val);
    if (record_trace) out.trace.push_back(val / wsum);
    if (moved < s.tol) {
      out.converged = true;
      break;
    }
  }

  out.point = theta;
  out.objective = raw_objective(points, w, u, theta) / wsum;
  return out;
}

WeiszfeldResult empirical_geometric_quantile(const Points& points, const Direction& u,
                                             const SolverSettings& s, bool record_trace) {
  return weighted_geometric_quantile(points, {}, u.vec(), s, record_trace);
}

Vec grid_geometric_quantile(const Points& points, const Direction& u, const GridBox& box,
                            double step) {
  if (points.cols() == 0) throw std::invalid_argument("grid quantile: empty point set");
  const std::vector<double> none;
  return grid_minimize([&](const Vec& t) { return quantile_objective(points, none, u.vec(), t); }, box,
                       step);
}

// ---------------------------------------------------------------------------
// Modified Bessel function I0.
//
// x <= 15: power series sum_m (x^2/4)^m / (m!)^2. All terms are positive, so
// the partial sums have no cancellation; at x = 15 about 45 terms are needed.
// x > 15: asymptotic expansion e^x / sqrt(2 pi x) sum_k a_k x^-k with
// a_k = a_{k-1} (2k-1)^2 / (8k), truncated at the smallest term. Its error is
// below e^{-2x} relative, i.e. < 1e-13 for x > 15.

namespace {

constexpr double kBesselSplit = 15.0;

double i0_series(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int m = 1; m < 500; ++m) {
    term *= q / (static_cast<double>(m) * m);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

// sum_k a_k x^-k
double i0_asymptotic_tail(double x) {
  double term = 1.0;
  double sum = 1.0;
  for (int kk = 1; kk < 200; ++kk) {
    const double next = term * (2.0 * kk - 1.0) * (2.0 * kk - 1.0) / (8.0 * kk * x);
    if (next > term) break;
    term = next;
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace

double bessel_i0(double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("bessel_i0: argument must be nonnegative");
  if (x <= kBesselSplit) return i0_series(x);
  return std::exp(x) / std::sqrt(2.0 * std::numbers::pi * x) * i0_asymptotic_tail(x);
}

double bessel_i0_scaled(double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("bessel_i0_scaled: argument must be nonnegative");
  if (x <= kBesselSplit) return std::exp(-x) * i0_series(x);
  return i0_asymptotic_tail(x) / std::sqrt(2.0 * std::numbers::pi * x);
}

// ---------------------------------------------------------------------------

Points sample_mixture(const MixtureSpec& mix, int count, std::uint64_t seed) {
  mix.validate();
  const int k = mix.dim();
  Rng rng(seed);
  std::vector<double> cdf(mix.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) cdf[j] = (acc += mix.weights[j]);
  std::vector<double> sd(mix.size());
  for (std::size_t j = 0; j < mix.size(); ++j) sd[j] = std::sqrt(mix.variances[j]);

  Points out(k, count);
  for (int r = 0; r < count; ++r) {
    const double target = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    std::size_t j = it == cdf.end() ? mix.size() - 1 : static_cast<std::size_t>(it - cdf.begin());
    while (mix.weights[j] == 0.0 && j > 0) --j;
    for (int c = 0; c < k; ++c) out(c, r) = mix.means[j][c] + sd[j] * rng.normal();
  }
  return out;
}

Vec mixture_quantile_mc(const MixtureSpec& mix, const Direction& u, const SolverSettings& s,
                        std::uint64_t seed) {
  if (u.dim() != mix.dim()) throw std::invalid_argument("mixture quantile: dimension mismatch");
  const Points draws = sample_mixture(mix, s.mc_samples, seed);
  return empirical_geometric_quantile(draws, u, s).point;
}

GridBox mixture_box(const MixtureSpec& mix, const Direction& u) {
  const int k = mix.dim();
  Vec lo = Vec::Constant(k, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  double sd_max = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    if (mix.weights[j] == 0.0) continue;
    const double sd = std::sqrt(mix.variances[j]);
    sd_max = std::max(sd_max, sd);
    lo = lo.cwiseMin((mix.means[j].array() - 4.0 * sd).matrix());
    hi = hi.cwiseMax((mix.means[j].array() + 4.0 * sd).matrix());
  }
  const double r = u.norm();
  const double pad = 4.0 * sd_max * r / (1.0 - r);
  lo.array() -= pad;
  hi.array() += pad;
  return {lo, hi};
}

Vec mixture_quantile_mc_grid(const MixtureSpec& mix, const Direction& u, const SolverSettings& s,
                             std::uint64_t seed) {
  if (u.dim() != mix.dim()) throw std::invalid_argument("mixture quantile: dimension mismatch");
  const Points draws = sample_mixture(mix, s.mc_samples, seed);
  const GridBox box = s.grid.lower.size() == mix.dim() ? s.grid : mixture_box(mix, u);
  return grid_geometric_quantile(draws, u, box, s.grid_step);
}

// ---------------------------------------------------------------------------
// Polar reduction for k = 2. For X ~ N(eta, sigma^2 I_2) and c = ||theta - eta|| / sigma,
// the radius ||X - theta|| / sigma is Rice(c, 1) distributed, so
//   E||X - theta|| = sigma * int_0^inf s^2 exp(-(s^2 + c^2)/2) I0(c s) ds
//                  = sigma * int_0^inf s^2 exp(-(s - c)^2/2) [e^{-cs} I0(cs)] ds,
// and E<u, X - theta> = <u, eta - theta>. The second form keeps every factor
// bounded for large c.

double polar_tail_bound(double rmax, double c) {
  // int_R^inf s^2 e^{-(s-c)^2/2} ds with t = s - c:
  //   int_{T}^inf (t^2 + 2ct + c^2) e^{-t^2/2} dt, T = R - c
  const double t = rmax - c;
  const double sqrt_half_pi = std::sqrt(std::numbers::pi / 2.0);
  const double gauss_tail = sqrt_half_pi * std::erfc(t / std::numbers::sqrt2);  // int_T^inf e^{-t^2/2}
  const double e = std::exp(-0.5 * t * t);
  // int_T^inf t e^{-t^2/2} = e ; int_T^inf t^2 e^{-t^2/2} = T e + gauss_tail
  return (t * e + gauss_tail) + 2.0 * c * e + c * c * gauss_tail;
}

double polar_rmax_for(double c_max) {
  double r = std::max(1.0, std::ceil(c_max * 4.0) / 4.0);
  while (polar_tail_bound(r, c_max) >= 1e-10) r += 0.25;
  return r;
}

double expected_norm_2d(double c, double sigma, double rmax, int points) {
  if (points % 2 == 0) ++points;  // Simpson needs an odd node count
  // the integrand is below c^2 e^{-50} outside c +- 10, so only that window is integrated
  const double a = std::max(0.0, c - 10.0);
  const double b = std::min(rmax, c + 10.0);
  if (b <= a) return 0.0;
  const double h = (b - a) / (points - 1);
  double acc = 0.0;
  for (int i = 0; i < points; ++i) {
    const double s = a + h * i;
    const double f = s * s * std::exp(-0.5 * (s - c) * (s - c)) * bessel_i0_scaled(c * s);
    const double wgt = (i == 0 || i == points - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += wgt * f;
  }
  return sigma * acc * h / 3.0;
}

double mixture_objective_polar(const MixtureSpec& mix, const Vec& u, const Vec& theta, double rmax,
                               int points) {
  double acc = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    if (mix.weights[j] == 0.0) continue;
    const double sigma = std::sqrt(mix.variances[j]);
    const double c = (theta - mix.means[j]).norm() / sigma;
    acc += mix.weights[j] * (expected_norm_2d(c, sigma, rmax, points) + u.dot(mix.means[j] - theta));
  }
  return acc;
}

Vec mixture_quantile_polar(const MixtureSpec& mix, const Direction& u, const SolverSettings& s) {
  mix.validate();
  s.validate();
  if (mix.dim() != 2 || u.dim() != 2) throw std::invalid_argument("polar quantile: requires k = 2");
  const GridBox box = s.grid.lower.size() == 2 ? s.grid : mixture_box(mix, u);

  // largest standardized distance between a grid corner and a component mean
  double c_max = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    if (mix.weights[j] == 0.0) continue;
    const double sigma = std::sqrt(mix.variances[j]);
    for (int corner = 0; corner < 4; ++corner) {
      Vec p(2);
      p[0] = (corner & 1) ? box.upper[0] : box.lower[0];
      p[1] = (corner & 2) ? box.upper[1] : box.lower[1];
      c_max = std::max(c_max, (p - mix.means[j]).norm() / sigma);
    }
  }
  double rmax = s.quadrature_rmax;
  if (rmax <= 0.0) {
    rmax = polar_rmax_for(c_max);
  } else if (polar_tail_bound(rmax, c_max) >= 1e-10) {
    throw std::invalid_argument("polar quantile: quadrature_rmax " + std::to_string(rmax) +
                                " too small for the grid (tail bound fails)");
  }
  // the integration window is at most 20 wide; keep the node spacing near 0.02
  const int points = std::max(s.quadrature_points, 1001);
  return grid_minimize(
      [&](const Vec& t) { return mixture_objective_polar(mix, u.vec(), t, rmax, points); }, box,
      s.grid_step);
}

}  // namespace ddpq
