#include "ddpq/simbench.hpp"

#include "ddpq/baselines.hpp"
#include "ddpq/pipeline.hpp"
#include "ddpq/rng.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace ddpq {

namespace {

constexpr std::uint64_t kTruthSeed = 0x7E57ED;

// Exp(1) quantile of Phi(z), i.e. -log(1 - Phi(z)), accurate in both tails.
double exp_of_normal(double z) { return -std::log(0.5 * std::erfc(z / std::numbers::sqrt2)); }

}  // namespace

std::string to_string(ErrorLaw law) { return law == ErrorLaw::t1 ? "t1" : "gamma"; }

ErrorLaw parse_error_law(const std::string& name) {
  if (name == "t1") return ErrorLaw::t1;
  if (name == "gamma") return ErrorLaw::gamma;
  throw std::invalid_argument("unknown error law '" + name + "' (expected t1 or gamma)");
}

std::vector<double> gen_covariates(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> xs(n);
  for (double& x : xs) x = rng.normal();
  return xs;
}

std::vector<Vec> gen_errors_t1(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec> out(n, Vec(2));
  for (auto& e : out) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double scale = std::sqrt(rng.chi_squared(1.0));
    e[0] = z1 / scale;
    e[1] = z2 / scale;
  }
  return out;
}

std::vector<Vec> gen_errors_gamma(std::size_t n, std::uint64_t seed, double copula_rho) {
  if (!(copula_rho > -1.0 && copula_rho < 1.0)) throw std::invalid_argument("gamma errors: copula rho must lie in (-1,1)");
  Rng rng(seed);
  const double s = std::sqrt(1.0 - copula_rho * copula_rho);
  std::vector<Vec> out(n, Vec(2));
  for (auto& e : out) {
    const double z1 = rng.normal();
    const double z2 = copula_rho * z1 + s * rng.normal();
    e[0] = exp_of_normal(z1);
    e[1] = exp_of_normal(z2);
  }
  return out;
}

double gamma_copula_correlation(double rho) {
  // trapezoid on [-9, 9]^2; the Exp(1) marginals have mean and variance 1
  constexpr int n = 1801;
  constexpr double lim = 9.0;
  const double h = 2.0 * lim / (n - 1);
  std::vector<double> z(n), g(n);
  for (int i = 0; i < n; ++i) {
    z[i] = -lim + h * i;
    g[i] = exp_of_normal(z[i]);
  }
  const double one_minus = 1.0 - rho * rho;
  const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(one_minus));
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double q = (z[i] * z[i] - 2.0 * rho * z[i] * z[j] + z[j] * z[j]) / (2.0 * one_minus);
      acc += g[i] * g[j] * std::exp(-q);
    }
  }
  return acc * norm * h * h - 1.0;
}

double calibrate_gamma_copula(double target) {
  if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("copula calibration: target must lie in (0,1)");
  double lo = 0.0, hi = 0.999;
  if (gamma_copula_correlation(hi) < target) throw std::runtime_error("copula calibration: target not attainable");
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (gamma_copula_correlation(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Vec true_location(double x) {
  Vec v(2);
  v[0] = 1.0 + 2.0 * x * x;
  v[1] = x * x;
  return v;
}

std::vector<Vec> make_response(const std::vector<double>& xs, const std::vector<Vec>& errors) {
  if (xs.size() != errors.size()) throw std::invalid_argument("make_response: lengths differ");
  std::vector<Vec> ys(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = true_location(xs[i]) + errors[i];
  return ys;
}

Vec true_error_median(ErrorLaw law, std::size_t truth_mc, std::uint64_t seed) {
  if (law == ErrorLaw::t1) return Vec::Zero(2);
  const auto draws = gen_errors_gamma(truth_mc, seed);
  Points pts(2, static_cast<Eigen::Index>(draws.size()));
  for (std::size_t i = 0; i < draws.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = draws[i];
  SolverSettings s;
  s.tol = 1e-10;
  return empirical_geometric_quantile(pts, Direction::zero(2), s).point;
}

double mse(const std::vector<Vec>& estimates, const std::vector<Vec>& truths) {
  if (estimates.size() != truths.size()) throw std::invalid_argument("mse: lengths differ");
  if (estimates.empty()) throw std::invalid_argument("mse: no points");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) acc += (estimates[i] - truths[i]).squaredNorm();
  return acc / static_cast<double>(estimates.size());
}

void SimConfig::validate() const {
  if (n < 2) throw std::invalid_argument("simulation: n must be >= 2");
  if (truth_mc < 100000) throw std::invalid_argument("simulation: truth_mc must be >= 1e5");
}

SimData simulate(const SimConfig& config) {
  if (config.n < 2) throw std::invalid_argument("simulation: n must be >= 2");
  SimData out;
  out.xs = gen_covariates(config.n, derive_seed(config.seed, 1));
  const auto errors = config.dist == ErrorLaw::t1 ? gen_errors_t1(config.n, derive_seed(config.seed, 2))
                                                  : gen_errors_gamma(config.n, derive_seed(config.seed, 2));
  out.ys = make_response(out.xs, errors);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Vec> np_bayes_medians(const PosteriorDraws& draws, const std::vector<double>& xs, int smoothing_samples,
                                  int error_mc_samples, std::uint64_t seed) {
  ErrorQuantileSettings eq;
  eq.solver.mc_samples = error_mc_samples;
  eq.seed = derive_seed(seed, 1);
  const Direction u = Direction::zero(draws.hyper.k);
  const auto error_q = error_quantile_per_draw(draws, u, eq);
  const auto density = CovariateDensity::normal(0.0, 1.0);
  const double delta = default_delta(xs.size());
  std::vector<Vec> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    QuantileQuery q;
    q.u = u;
    q.x = xs[i];
    q.delta = delta;
    q.smoothing_samples = smoothing_samples;
    q.seed = derive_seed(seed, 2, i);
    out.push_back(delta_smoothed_quantile(draws, q, density, error_q).point);
  }
  return out;
}

BenchResult run_table1_cell(std::uint64_t seed, ErrorLaw law, const BenchSettings& settings) {
  using clock = std::chrono::steady_clock;
  const auto law_tag = static_cast<std::uint64_t>(law);
  const std::uint64_t cell_seed = derive_seed(seed, 100 + law_tag);
  SimConfig cfg{settings.n, law, cell_seed, settings.truth_mc};
  const SimData sim = simulate(cfg);

  const Vec offset = (law == ErrorLaw::gamma && !settings.zero_truth)
                         ? true_error_median(law, settings.truth_mc, kTruthSeed)
                         : Vec::Zero(2);
  std::vector<Vec> truth(sim.xs.size());
  for (std::size_t i = 0; i < sim.xs.size(); ++i) truth[i] = true_location(sim.xs[i]) + offset;

  BenchResult out;
  out.error_offsets.push_back(offset);

  // NP-Bayes
  {
    const auto t0 = clock::now();
    McmcSettings mcmc = settings.mcmc;
    mcmc.seed = derive_seed(cell_seed, 3);
    const auto data = Dataset::from_pairs(sim.xs, sim.ys);
    const auto draws = run_chain(data, Hyperparams::simulation_defaults(), mcmc);
    const auto est = np_bayes_medians(draws, sim.xs, settings.smoothing_samples, settings.error_mc_samples,
                                      derive_seed(cell_seed, 4));
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    out.rows.push_back({seed, law, "np-bayes", mse(est, truth), secs});
  }
  // frequentist linear
  {
    const auto t0 = clock::now();
    const auto fit = linear_spatial_median_fit(sim.xs, sim.ys);
    std::vector<Vec> est;
    for (double x : sim.xs) est.push_back(fit.predict(x));
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    out.rows.push_back({seed, law, "linear", mse(est, truth), secs});
  }
  // kernel spatial median with cross-validated bandwidth
  {
    const auto t0 = clock::now();
    const auto grid = settings.h_grid.empty() ? default_bandwidth_grid() : settings.h_grid;
    const double h = cv_bandwidth(sim.xs, sim.ys, grid);
    std::vector<Vec> est;
    for (double x : sim.xs) est.push_back(kernel_spatial_median(sim.xs, sim.ys, x, h));
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    out.rows.push_back({seed, law, "np-frequentist", mse(est, truth), secs});
    out.chosen_bandwidth.push_back(h);
  }
  return out;
}

BenchResult run_table1(const std::vector<std::uint64_t>& seeds, const std::vector<ErrorLaw>& laws,
                       const BenchSettings& settings) {
  BenchResult all;
  for (std::uint64_t seed : seeds) {
    for (ErrorLaw law : laws) {
      auto cell = run_table1_cell(seed, law, settings);
      all.rows.insert(all.rows.end(), cell.rows.begin(), cell.rows.end());
      all.chosen_bandwidth.insert(all.chosen_bandwidth.end(), cell.chosen_bandwidth.begin(),
                                  cell.chosen_bandwidth.end());
      all.error_offsets.insert(all.error_offsets.end(), cell.error_offsets.begin(), cell.error_offsets.end());
    }
  }
  return all;
}

void write_bench_csv(std::ostream& out, const BenchResult& result, bool timing, int precision) {
  out << "seed,error_law,method,mse,runtime_s\n";
  out << std::setprecision(precision);
  for (const auto& r : result.rows) {
    out << r.seed << ',' << to_string(r.law) << ',' << r.method << ',' << r.mse << ','
        << (timing ? r.runtime_s : 0.0) << '\n';
  }
}

}  // namespace ddpq
