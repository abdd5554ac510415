#include "ddpq/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace ddpq {

namespace {

constexpr std::uint64_t kNewCovariateTag = 0x51;
constexpr std::uint64_t kSmoothingTag = 0x52;
constexpr std::uint64_t kErrorQuantileTag = 0x53;

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

void QuantileQuery::validate() const {
  if (!std::isfinite(x)) throw std::invalid_argument("query: x must be finite");
  if (!(delta >= 0.0)) throw std::invalid_argument("query: delta must be nonnegative");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("query: level must lie in (0,1)");
  if (smoothing_samples < 1) throw std::invalid_argument("query: smoothing_samples must be >= 1");
}

CovariateDensity CovariateDensity::normal(double mean, double sd) {
  if (!(sd > 0.0)) throw std::invalid_argument("covariate density: sd must be positive");
  CovariateDensity d;
  d.kind_ = Kind::parametric_normal;
  d.mean_ = mean;
  d.sd_ = sd;
  return d;
}

CovariateDensity CovariateDensity::kde(std::vector<double> sample, double bandwidth) {
  if (sample.empty()) throw std::invalid_argument("covariate density: empty sample");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("covariate density: bandwidth must be positive");
  CovariateDensity d;
  d.kind_ = Kind::gaussian_kde;
  d.sample_ = std::move(sample);
  d.bandwidth_ = bandwidth;
  return d;
}

double CovariateDensity::pdf(double x) const {
  if (kind_ == Kind::parametric_normal) return std_normal_pdf((x - mean_) / sd_) / sd_;
  double acc = 0.0;
  for (double s : sample_) acc += std_normal_pdf((x - s) / bandwidth_);
  return acc / (static_cast<double>(sample_.size()) * bandwidth_);
}

double CovariateDensity::cdf(double x) const {
  if (kind_ == Kind::parametric_normal) return std_normal_cdf((x - mean_) / sd_);
  double acc = 0.0;
  for (double s : sample_) acc += std_normal_cdf((x - s) / bandwidth_);
  return acc / static_cast<double>(sample_.size());
}

double CovariateDensity::sample_truncated(double lo, double hi, Rng& rng, int max_tries) const {
  if (!(lo <= hi)) throw std::invalid_argument("truncated sample: empty window");
  const double flo = cdf(lo);
  const double fhi = cdf(hi);
  if (!(fhi - flo >= 1e-12)) throw std::runtime_error("truncated sample: window carries no covariate mass");
  for (int t = 0; t < max_tries; ++t) {
    double x;
    if (kind_ == Kind::parametric_normal) {
      x = rng.normal(mean_, sd_);
    } else {
      const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(sample_.size()));
      x = rng.normal(sample_[std::min(i, sample_.size() - 1)], bandwidth_);
    }
    if (x >= lo && x <= hi) return x;
  }
  // inverse CDF by bisection on the window
  const double target = flo + rng.uniform() * (fhi - flo);
  double a = lo, b = hi;
  for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
    const double mid = 0.5 * (a + b);
    if (cdf(mid) < target) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

CovariateDensity kde_fit(const std::vector<double>& sample) {
  const std::size_t n = sample.size();
  if (n < 2) throw std::invalid_argument("kde_fit: need at least two points");
  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : sample) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw std::invalid_argument("kde_fit: degenerate sample (zero variance)");
  return CovariateDensity::kde(sample, 1.06 * sd * std::pow(static_cast<double>(n), -0.2));
}

double default_delta(std::size_t n) { return std::cbrt(1.0 / static_cast<double>(n)); }

// ---------------------------------------------------------------------------

Vec cluster_location_at(const PosteriorDraws& draws, std::size_t b, std::size_t l, double x, Rng& rng) {
  if (b >= draws.size()) throw std::out_of_range("location: draw index out of range");
  const auto& d = draws.draws[b];
  if (l >= d.alpha.size()) throw std::out_of_range("location: cluster index out of range");
  const auto& h = draws.hyper;
  const auto cond = gp_conditional_markov(draws.data.xs, d.beta[l], h.gamma, h.lambda, h.c1, x);
  Vec out = d.alpha[l] + cond.mean;
  if (cond.variance > 0.0) {
    const double sd = std::sqrt(cond.variance);
    for (Eigen::Index c = 0; c < out.size(); ++c) out[c] += sd * rng.normal();
  }
  return out;
}

Vec location_draw_at(const PosteriorDraws& draws, std::size_t b, double x, Rng& rng) {
  if (b >= draws.size()) throw std::out_of_range("location: draw index out of range");
  const auto& d = draws.draws[b];
  const long i = draws.data.find(x);
  if (i >= 0) {
    const auto l = static_cast<std::size_t>(d.L[static_cast<std::size_t>(i)]);
    return d.alpha[l] + d.beta[l][static_cast<std::size_t>(i)];
  }
  const std::size_t l = rng.categorical(d.W);
  return cluster_location_at(draws, b, l, x, rng);
}

std::vector<Vec> error_quantile_per_draw(const PosteriorDraws& draws, const Direction& u,
                                         const ErrorQuantileSettings& settings) {
  if (u.dim() != draws.hyper.k) throw std::invalid_argument("error quantile: direction has the wrong dimension");
  std::vector<Vec> out;
  out.reserve(draws.size());
  for (std::size_t b = 0; b < draws.size(); ++b) {
    const auto& d = draws.draws[b];
    MixtureSpec mix{d.p, d.eta, d.sigma2};
    if (settings.method == ErrorQuantileMethod::polar) {
      out.push_back(mixture_quantile_polar(mix, u, settings.solver));
    } else {
      out.push_back(mixture_quantile_mc(mix, u, settings.solver, derive_seed(settings.seed, kErrorQuantileTag, b)));
    }
  }
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile: no values");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("percentile: p must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

QuantileEstimate summarize(std::vector<Vec> per_draw, double level) {
  if (per_draw.empty()) throw std::invalid_argument("summarize: no draws");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("summarize: level must lie in (0,1)");
  const Eigen::Index k = per_draw.front().size();
  QuantileEstimate est;
  est.point = Vec::Zero(k);
  for (const Vec& v : per_draw) est.point += v;
  est.point /= static_cast<double>(per_draw.size());
  est.ci_lower.resize(k);
  est.ci_upper.resize(k);
  std::vector<double> coord(per_draw.size());
  for (Eigen::Index c = 0; c < k; ++c) {
    for (std::size_t b = 0; b < per_draw.size(); ++b) coord[b] = per_draw[b][c];
    est.ci_lower[c] = percentile(coord, 0.5 * (1.0 - level));
    est.ci_upper[c] = percentile(coord, 0.5 * (1.0 + level));
  }
  est.per_draw = std::move(per_draw);
  return est;
}

QuantileEstimate conditional_quantile(const PosteriorDraws& draws, const QuantileQuery& query,
                                      const std::vector<Vec>& error_q) {
  query.validate();
  if (error_q.size() != draws.size()) throw std::invalid_argument("conditional quantile: one error quantile per draw");
  std::vector<Vec> per_draw(draws.size());
  for (std::size_t b = 0; b < draws.size(); ++b) {
    Rng rng(derive_seed(query.seed, kNewCovariateTag, b));
    per_draw[b] = location_draw_at(draws, b, query.x, rng) + error_q[b];
  }
  return summarize(std::move(per_draw), query.level);
}

QuantileEstimate conditional_quantile(const PosteriorDraws& draws, const QuantileQuery& query,
                                      const ErrorQuantileSettings& settings) {
  return conditional_quantile(draws, query, error_quantile_per_draw(draws, query.u, settings));
}

QuantileEstimate delta_smoothed_quantile(const PosteriorDraws& draws, const QuantileQuery& query,
                                         const CovariateDensity& density, const std::vector<Vec>& error_q) {
  query.validate();
  if (!(query.delta > 0.0)) throw std::invalid_argument("smoothed quantile: delta must be positive");
  if (error_q.size() != draws.size()) throw std::invalid_argument("smoothed quantile: one error quantile per draw");
  const double lo = query.x - query.delta;
  const double hi = query.x + query.delta;
  std::vector<Vec> per_draw(draws.size());
  for (std::size_t b = 0; b < draws.size(); ++b) {
    Rng rng(derive_seed(query.seed, kSmoothingTag, b));
    Vec acc = Vec::Zero(draws.hyper.k);
    for (int s = 0; s < query.smoothing_samples; ++s) {
      const double xt = density.sample_truncated(lo, hi, rng);
      acc += location_draw_at(draws, b, xt, rng);
    }
    per_draw[b] = acc / static_cast<double>(query.smoothing_samples) + error_q[b];
  }
  return summarize(std::move(per_draw), query.level);
}

QuantileEstimate delta_smoothed_quantile(const PosteriorDraws& draws, const QuantileQuery& query,
                                         const CovariateDensity& density, const ErrorQuantileSettings& settings) {
  return delta_smoothed_quantile(draws, query, density, error_quantile_per_draw(draws, query.u, settings));
}

void write_quantile_csv(std::ostream& out, const std::vector<QuantileRow>& rows, int precision) {
  const Eigen::Index k = rows.empty() ? 0 : rows.front().u.size();
  out << "x";
  for (const char* name : {"u", "point", "lo", "hi"}) {
    for (Eigen::Index c = 0; c < k; ++c) out << ',' << name << (c + 1);
  }
  out << '\n';
  out << std::setprecision(precision);
  for (const auto& row : rows) {
    out << row.x;
    for (const Vec* v : {&row.u, &row.estimate.point, &row.estimate.ci_lower, &row.estimate.ci_upper}) {
      for (Eigen::Index c = 0; c < k; ++c) out << ',' << (*v)[c];
    }
    out << '\n';
  }
}

}  // namespace ddpq
