#include "ddpq/cli.hpp"

#include "ddpq/baselines.hpp"
#include "ddpq/gibbs.hpp"
#include "ddpq/io.hpp"
#include "ddpq/pipeline.hpp"
#include "ddpq/simbench.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace ddpq {

namespace {

constexpr int kScreenDigits = 6;
constexpr int kFileDigits = std::numeric_limits<double>::max_digits10;

// Raised for bad flag values the parser itself cannot catch.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Writes to --out when given, otherwise to the console at screen precision.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& console) : console_(console) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw std::runtime_error("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : console_; }
  int precision() const { return file_.is_open() ? kFileDigits : kScreenDigits; }
  void close() {
    if (file_.is_open()) {
      file_.close();
      if (!file_) throw std::runtime_error("failed writing output file");
    }
  }

 private:
  std::ofstream file_;
  std::ostream& console_;
};

double round_sig(double v, int digits = kScreenDigits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return std::strtod(buf, nullptr);
}

Direction parse_direction(const std::string& text) {
  std::vector<double> v;
  try {
    v = parse_number_list(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--u: ") + e.what());
  }
  Vec u = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
  if (!(u.norm() < 1.0)) throw UsageError("--u must have Euclidean norm < 1");
  return Direction(u);
}

std::vector<double> parse_x_values(const std::string& list, const std::string& grid) {
  std::vector<double> xs;
  try {
    if (!list.empty()) xs = parse_number_list(list);
    if (!grid.empty()) {
      std::string g = grid;
      std::replace(g.begin(), g.end(), ':', ',');
      const auto parts = parse_number_list(g);
      if (parts.size() != 3) throw UsageError("--x-grid expects lo:hi:count");
      const double lo = parts[0], hi = parts[1];
      const double count = parts[2];
      if (!(count >= 1.0) || count != std::floor(count)) throw UsageError("--x-grid count must be a positive integer");
      if (!(hi >= lo)) throw UsageError("--x-grid needs lo <= hi");
      const auto n = static_cast<int>(count);
      for (int i = 0; i < n; ++i) xs.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--x/--x-grid: ") + e.what());
  }
  return xs;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  auto to_u64 = [](const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      throw UsageError("--seeds: bad seed '" + s + "'");
    }
    if (pos != s.size() || s.front() == '-') throw UsageError("--seeds: bad seed '" + s + "'");
    return static_cast<std::uint64_t>(v);
  };
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto a = to_u64(item.substr(0, dash));
      const auto b = to_u64(item.substr(dash + 1));
      if (b < a) throw UsageError("--seeds: empty range '" + item + "'");
      for (auto s = a; s <= b; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(to_u64(item));
    }
  }
  if (seeds.empty()) throw UsageError("--seeds: no seeds given");
  return seeds;
}

void load_config(const std::string& path, Hyperparams& hyper, McmcSettings& mcmc) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.contains("hyper")) hyper = j.at("hyper").get<Hyperparams>();
    if (j.contains("mcmc")) mcmc = j.at("mcmc").get<McmcSettings>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
}

PosteriorDraws load_chain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open chain file '" + path + "'");
  try {
    return read_draws_jsonl(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("chain file '" + path + "': " + e.what());
  }
}

std::vector<double> all_covariates(const Dataset& data) {
  std::vector<double> xs;
  std::vector<Vec> ys;
  data.to_pairs(xs, ys);
  return xs;
}

// ---------------------------------------------------------------------------

struct SimulateOpts {
  std::string dist = "t1";
  std::size_t n = 100;
  std::uint64_t seed = 1;
  std::string out;
};

void cmd_simulate(const SimulateOpts& o, std::ostream& console) {
  SimConfig cfg;
  cfg.n = o.n;
  cfg.dist = parse_error_law(o.dist);
  cfg.seed = o.seed;
  const auto sim = simulate(cfg);
  Sink sink(o.out, console);
  write_data_csv(sink.stream(), sim.xs, sim.ys, sink.precision());
  sink.close();
}

struct FitOpts {
  std::string data, config, out, summary;
  std::optional<int> draws, burnin, thin;
  std::optional<std::uint64_t> seed;
};

void cmd_fit(const FitOpts& o, std::ostream& console) {
  Hyperparams hyper = Hyperparams::simulation_defaults();
  McmcSettings mcmc;
  load_config(o.config, hyper, mcmc);
  if (o.draws) mcmc.n_draws = *o.draws;
  if (o.burnin) mcmc.burn_in = *o.burnin;
  if (o.thin) mcmc.thin = *o.thin;
  if (o.seed) mcmc.seed = *o.seed;
  mcmc.validate();
  const auto pairs = read_data_csv_file(o.data);
  const auto data = Dataset::from_pairs(pairs.xs, pairs.ys);
  const auto draws = run_chain(data, hyper, mcmc);

  {
    std::ofstream chain(o.out, std::ios::binary | std::ios::trunc);
    if (!chain) throw std::runtime_error("cannot open '" + o.out + "' for writing");
    write_draws_jsonl(chain, draws);
    if (!chain) throw std::runtime_error("failed writing chain file");
  }

  // batch means of the log-likelihood, 20 batches
  const std::size_t B = draws.size();
  const std::size_t batches = std::min<std::size_t>(20, B);
  std::vector<double> trace;
  double mean_ll = 0.0, occupied = 0.0, m1 = 0.0, m2 = 0.0;
  for (const auto& d : draws.draws) {
    mean_ll += d.loglik;
    std::vector<int> used(d.W.size(), 0);
    for (int l : d.L) used[static_cast<std::size_t>(l)] = 1;
    occupied += std::count(used.begin(), used.end(), 1);
    m1 += d.M1;
    m2 += d.M2;
  }
  for (std::size_t t = 0; t < batches; ++t) {
    const std::size_t a = t * B / batches, b = (t + 1) * B / batches;
    double s = 0.0;
    for (std::size_t i = a; i < b; ++i) s += draws.draws[i].loglik;
    trace.push_back(s / static_cast<double>(b - a));
  }
  const double nb = static_cast<double>(B);
  const bool to_file = !o.summary.empty();
  auto num = [&](double v) { return to_file ? v : round_sig(v); };
  std::vector<double> shown;
  for (double v : trace) shown.push_back(num(v));
  const nlohmann::json summary{{"draws", B},
                               {"burn_in", mcmc.burn_in},
                               {"thin", mcmc.thin},
                               {"seed", mcmc.seed},
                               {"observations", data.total()},
                               {"distinct_x", data.distinct()},
                               {"mean_loglik", num(mean_ll / nb)},
                               {"loglik_batch_means", shown},
                               {"mean_occupied_clusters", num(occupied / nb)},
                               {"mean_M1", num(m1 / nb)},
                               {"mean_M2", num(m2 / nb)}};
  Sink sink(o.summary, console);
  sink.stream() << summary.dump(2) << '\n';
  sink.close();
}

struct QuantileOpts {
  std::string chain, u = "0,0", x, x_grid, delta = "0", method = "mc", density = "kde", out;
  double level = 0.95;
  int smoothing_samples = 10;
  int mc_samples = 2000;
  std::uint64_t seed = 1;
};

void cmd_quantile(const QuantileOpts& o, std::ostream& console) {
  const Direction u = parse_direction(o.u);
  const auto xs = parse_x_values(o.x, o.x_grid);
  if (xs.empty()) throw UsageError("give --x or --x-grid");
  if (!(o.level > 0.0 && o.level < 1.0)) throw UsageError("--level must lie in (0,1)");
  if (o.method != "mc" && o.method != "polar") throw UsageError("--method must be mc or polar");
  if (o.density != "kde" && o.density != "normal") throw UsageError("--density must be kde or normal");

  const auto draws = load_chain(o.chain);
  if (u.dim() != draws.hyper.k) throw UsageError("--u has the wrong dimension for this chain");
  const auto obs_x = all_covariates(draws.data);

  double delta = 0.0;
  if (o.delta == "auto") {
    delta = default_delta(obs_x.size());
  } else {
    try {
      delta = parse_number(o.delta);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--delta: ") + e.what());
    }
    if (delta < 0.0) throw UsageError("--delta must be >= 0 or auto");
  }

  ErrorQuantileSettings eq;
  eq.method = o.method == "polar" ? ErrorQuantileMethod::polar : ErrorQuantileMethod::monte_carlo;
  eq.solver.mc_samples = o.mc_samples;
  eq.seed = derive_seed(o.seed, 1);
  const auto error_q = error_quantile_per_draw(draws, u, eq);

  std::optional<CovariateDensity> density;
  if (delta > 0.0) density = o.density == "normal" ? CovariateDensity::normal(0.0, 1.0) : kde_fit(obs_x);

  std::vector<QuantileRow> rows;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    QuantileQuery q;
    q.u = u;
    q.x = xs[i];
    q.delta = delta;
    q.level = o.level;
    q.smoothing_samples = o.smoothing_samples;
    q.seed = derive_seed(o.seed, 2, i);
    auto est = delta > 0.0 ? delta_smoothed_quantile(draws, q, *density, error_q)
                           : conditional_quantile(draws, q, error_q);
    est.per_draw.clear();
    rows.push_back({xs[i], u.vec(), std::move(est)});
  }
  Sink sink(o.out, console);
  write_quantile_csv(sink.stream(), rows, sink.precision());
  sink.close();
}

struct BaselineOpts {
  std::string data, method = "linear", x, x_grid, u, out;
  std::optional<double> h;
};

void cmd_baseline(const BaselineOpts& o, std::ostream& console) {
  if (o.method != "linear" && o.method != "kernel") throw UsageError("--method must be linear or kernel");
  const auto pairs = read_data_csv_file(o.data);
  auto xs = parse_x_values(o.x, o.x_grid);
  if (xs.empty()) xs = pairs.xs;
  const Eigen::Index k = pairs.ys.front().size();

  std::vector<Vec> est;
  double h = 0.0;
  if (o.method == "linear") {
    if (!o.u.empty()) throw UsageError("--u applies to the kernel method only");
    const auto fit = linear_spatial_median_fit(pairs.xs, pairs.ys);
    for (double x : xs) est.push_back(fit.predict(x));
  } else {
    const Vec u = o.u.empty() ? Vec::Zero(k) : parse_direction(o.u).vec();
    if (u.size() != k) throw UsageError("--u has the wrong dimension for this data");
    if (o.h && !(*o.h > 0.0)) throw UsageError("--h must be positive");
    h = o.h ? *o.h : cv_bandwidth(pairs.xs, pairs.ys, default_bandwidth_grid());
    for (double x : xs) est.push_back(kernel_spatial_median(pairs.xs, pairs.ys, x, h, u));
  }

  Sink sink(o.out, console);
  auto& s = sink.stream();
  s << "x";
  for (Eigen::Index c = 0; c < k; ++c) s << ",m" << (c + 1);
  if (o.method == "kernel") s << ",h";
  s << '\n' << std::setprecision(sink.precision());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    s << xs[i];
    for (Eigen::Index c = 0; c < k; ++c) s << ',' << est[i][c];
    if (o.method == "kernel") s << ',' << h;
    s << '\n';
  }
  sink.close();
}

struct BpOpts {
  int draws = 20000;
  int burnin = 1000;
  std::uint64_t seed = 1;
  std::string delta = "auto", out;
  int smoothing_samples = 10;
};

void cmd_bp_demo(const BpOpts& o, std::ostream& console) {
  std::vector<double> ages;
  std::vector<Vec> ys;
  for (const auto& r : bp_table()) {
    ages.push_back(r.age);
    ys.push_back((Vec(2) << r.systolic, r.diastolic).finished());
  }
  Hyperparams hyper;
  hyper.c0 = (Vec(2) << 100.0, 73.0).finished();
  hyper.c1 = (Vec(2) << 0.8, 0.35).finished();
  McmcSettings mcmc;
  mcmc.n_draws = o.draws;
  mcmc.burn_in = o.burnin;
  mcmc.seed = o.seed;
  mcmc.validate();
  const auto draws = run_chain(Dataset::from_pairs(ages, ys), hyper, mcmc);

  double delta = 0.0;
  if (o.delta == "auto") {
    delta = default_delta(ages.size());
  } else {
    try {
      delta = parse_number(o.delta);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--delta: ") + e.what());
    }
    if (delta < 0.0) throw UsageError("--delta must be >= 0 or auto");
  }
  ErrorQuantileSettings eq;
  eq.seed = derive_seed(o.seed, 1);
  const Direction u = Direction::zero(2);
  const auto error_q = error_quantile_per_draw(draws, u, eq);
  const auto density = kde_fit(ages);

  Sink sink(o.out, console);
  auto& s = sink.stream();
  s << "age,systolic,systolic_lo,systolic_hi,diastolic,diastolic_lo,diastolic_hi\n";
  s << std::setprecision(sink.precision());
  for (int age = 21; age <= 76; age += 5) {
    QuantileQuery q;
    q.x = age;
    q.delta = delta;
    q.smoothing_samples = o.smoothing_samples;
    q.seed = derive_seed(o.seed, 2, static_cast<std::uint64_t>(age));
    const auto est = delta > 0.0 ? delta_smoothed_quantile(draws, q, density, error_q)
                                 : conditional_quantile(draws, q, error_q);
    s << age;
    for (Eigen::Index c = 0; c < 2; ++c) s << ',' << est.point[c] << ',' << est.ci_lower[c] << ',' << est.ci_upper[c];
    s << '\n';
  }
  sink.close();
}

struct BenchOpts {
  std::string seeds = "1-5", dist = "both", out;
  int draws = 5000;
  int burnin = 500;
  std::size_t n = 100;
  std::size_t truth_mc = 1000000;
  bool zero_truth = false;
  bool no_timing = false;
};

void cmd_bench(const BenchOpts& o, std::ostream& console) {
  const auto seeds = parse_seeds(o.seeds);
  std::vector<ErrorLaw> laws;
  if (o.dist == "both") {
    laws = {ErrorLaw::t1, ErrorLaw::gamma};
  } else {
    laws = {parse_error_law(o.dist)};
  }
  BenchSettings bs;
  bs.mcmc.n_draws = o.draws;
  bs.mcmc.burn_in = o.burnin;
  bs.mcmc.validate();
  bs.n = o.n;
  bs.truth_mc = o.truth_mc;
  bs.zero_truth = o.zero_truth;
  SimConfig{bs.n, ErrorLaw::t1, 0, bs.truth_mc}.validate();
  const auto result = run_table1(seeds, laws, bs);
  Sink sink(o.out, console);
  write_bench_csv(sink.stream(), result, !o.no_timing, sink.precision());
  sink.close();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian multivariate quantile regression with a dependent Dirichlet process mixture", "ddpq"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  SimulateOpts sim;
  auto* c_sim = app.add_subcommand("simulate", "Draw a data set from the simulation design");
  c_sim->add_option("--dist", sim.dist, "Error law: t1 or gamma")->check(CLI::IsMember({"t1", "gamma"}));
  c_sim->add_option("--n", sim.n, "Number of observations")->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
  c_sim->add_option("--seed", sim.seed, "Random seed");
  c_sim->add_option("--out", sim.out, "Output CSV (default: stdout)");

  FitOpts fit;
  auto* c_fit = app.add_subcommand("fit", "Run the Gibbs sampler and write the chain as JSON lines");
  c_fit->add_option("--data", fit.data, "Data CSV (x,y1,...,yk)")->required();
  c_fit->add_option("--config", fit.config, "JSON with \"hyper\" and/or \"mcmc\" objects");
  c_fit->add_option("--draws", fit.draws, "Stored draws");
  c_fit->add_option("--burnin", fit.burnin, "Burn-in sweeps");
  c_fit->add_option("--thin", fit.thin, "Thinning interval");
  c_fit->add_option("--seed", fit.seed, "Random seed");
  c_fit->add_option("--out", fit.out, "Chain file (JSON lines)")->required();
  c_fit->add_option("--summary", fit.summary, "Summary JSON file (default: stdout)");

  QuantileOpts qo;
  auto* c_q = app.add_subcommand("quantile", "Conditional geometric quantiles from a chain file");
  c_q->add_option("--chain", qo.chain, "Chain file written by fit")->required();
  c_q->add_option("--u", qo.u, "Direction, comma separated, norm < 1");
  c_q->add_option("--x", qo.x, "Covariate values, comma separated");
  c_q->add_option("--x-grid", qo.x_grid, "Covariate grid lo:hi:count");
  c_q->add_option("--delta", qo.delta, "Smoothing half-width, a number or auto (n^-1/3)");
  c_q->add_option("--level", qo.level, "Credible level");
  c_q->add_option("--method", qo.method, "Error quantile evaluator: mc or polar (k=2)");
  c_q->add_option("--density", qo.density, "Covariate density for smoothing: kde or normal");
  c_q->add_option("--smoothing-samples", qo.smoothing_samples, "Covariate draws per posterior draw")
      ->check(CLI::PositiveNumber);
  c_q->add_option("--mc-samples", qo.mc_samples, "Monte Carlo size for the error quantile")->check(CLI::PositiveNumber);
  c_q->add_option("--seed", qo.seed, "Random seed");
  c_q->add_option("--out", qo.out, "Output CSV (default: stdout)");

  BaselineOpts bo;
  auto* c_b = app.add_subcommand("baseline", "Frequentist median regression");
  c_b->add_option("--data", bo.data, "Data CSV")->required();
  c_b->add_option("--method", bo.method, "linear or kernel");
  c_b->add_option("--h", bo.h, "Kernel bandwidth (default: leave-one-out CV)");
  c_b->add_option("--u", bo.u, "Direction for the kernel quantile");
  c_b->add_option("--x", bo.x, "Evaluation points (default: the observed x)");
  c_b->add_option("--x-grid", bo.x_grid, "Evaluation grid lo:hi:count");
  c_b->add_option("--out", bo.out, "Output CSV (default: stdout)");

  BpOpts bp;
  auto* c_bp = app.add_subcommand("bp-demo", "Blood-pressure case study: spatial medians by age");
  c_bp->add_option("--draws", bp.draws, "Stored draws");
  c_bp->add_option("--burnin", bp.burnin, "Burn-in sweeps");
  c_bp->add_option("--seed", bp.seed, "Random seed");
  c_bp->add_option("--delta", bp.delta, "Smoothing half-width, a number or auto");
  c_bp->add_option("--out", bp.out, "Output CSV (default: stdout)");

  BenchOpts be;
  auto* c_be = app.add_subcommand("bench", "Median-regression benchmark over seeds and error laws");
  c_be->add_option("--seeds", be.seeds, "Seeds: list and ranges, e.g. 1-5 or 1,4,9");
  c_be->add_option("--dist", be.dist, "t1, gamma or both")->check(CLI::IsMember({"t1", "gamma", "both"}));
  c_be->add_option("--draws", be.draws, "Stored draws per fit");
  c_be->add_option("--burnin", be.burnin, "Burn-in sweeps per fit");
  c_be->add_option("--n", be.n, "Sample size")->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
  c_be->add_option("--truth-mc", be.truth_mc, "Monte Carlo size for the gamma error median");
  c_be->add_flag("--zero-truth", be.zero_truth, "Score gamma fits against a zero error median");
  c_be->add_flag("--no-timing", be.no_timing, "Write 0 in the runtime column");
  c_be->add_option("--out", be.out, "Output CSV (default: stdout)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (c_sim->parsed()) cmd_simulate(sim, out);
    if (c_fit->parsed()) cmd_fit(fit, out);
    if (c_q->parsed()) cmd_quantile(qo, out);
    if (c_b->parsed()) cmd_baseline(bo, out);
    if (c_bp->parsed()) cmd_bp_demo(bp, out);
    if (c_be->parsed()) cmd_bench(be, out);
  } catch (const CsvError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace ddpq
