#pragma once

// Out-of-sample comparison of a trained policy against the deterministic
// strategies: per-path utilities, outperformance counts, densities of the
// utility differences, and per-age medians.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "decum/baselines.hpp"
#include "decum/csv.hpp"
#include "decum/error.hpp"
#include "decum/policy_net.hpp"
#include "decum/rollout.hpp"
#include "decum/trainer.hpp"

namespace decum::evaluator {

inline constexpr const char* kPolicyName = "dnn";

struct StrategyResult {
  baselines::StrategyKind kind;
  std::vector<double> utilities;
  std::vector<double> differences;  // U_policy - U_strategy per path
  std::size_t outperformance = 0;   // #{m : U_policy > U_strategy}
};

struct EvalReport {
  std::vector<double> policy_utilities;
  std::vector<StrategyResult> strategies;

  const StrategyResult& strategy(baselines::StrategyKind k) const {
    for (const auto& s : strategies)
      if (s.kind == k) return s;
    throw ConfigError(std::string("strategy not evaluated: ") + baselines::to_string(k));
  }
};

inline void check_horizon(const policy::Checkpoint& ckpt, const rollout::Model& model) {
  if (ckpt.norm.time_scale != std::max(1, model.horizon()))
    throw ConfigError("checkpoint was trained for horizon " + std::to_string(ckpt.norm.time_scale) +
                      " but the evaluation horizon is " + std::to_string(model.horizon()));
}

inline std::vector<double> strategy_utilities(baselines::StrategyKind kind, const rollout::Model& model,
                                              const esg::ScenarioPanel& panel, std::size_t paths,
                                              const baselines::StrategyParams& sp) {
  std::vector<double> u(paths);
  for (std::size_t m = 0; m < paths; ++m)
    u[m] = baselines::deterministic_utility(kind, model, rollout::path_view(panel, m), sp);
  return u;
}

// Pairs policy utilities with each strategy's on the same paths.
inline EvalReport compare_utilities(std::vector<double> policy_utilities,
                                    const std::vector<baselines::StrategyKind>& kinds,
                                    const rollout::Model& model, const esg::ScenarioPanel& panel,
                                    const baselines::StrategyParams& sp) {
  EvalReport r;
  r.policy_utilities = std::move(policy_utilities);
  const std::size_t n = r.policy_utilities.size();
  for (auto k : kinds) {
    StrategyResult s{k, strategy_utilities(k, model, panel, n, sp), {}, 0};
    s.differences.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
      s.differences[m] = r.policy_utilities[m] - s.utilities[m];
      if (r.policy_utilities[m] > s.utilities[m]) ++s.outperformance;
    }
    r.strategies.push_back(std::move(s));
  }
  return r;
}

inline EvalReport compare(const policy::Checkpoint& ckpt, const std::vector<baselines::StrategyKind>& kinds,
                          const esg::ScenarioPanel& panel, std::size_t paths, const rollout::Model& model,
                          const baselines::StrategyParams& sp = {}, unsigned threads = 1) {
  check_horizon(ckpt, model);
  auto policy = trainer::evaluate_policy(ckpt.params, ckpt.norm, model, panel, paths, false, threads);
  return compare_utilities(std::move(policy.utilities), kinds, model, panel, sp);
}

struct CurveRow {
  std::size_t iteration;
  std::string strategy;
  std::size_t count;
};

// Outperformance counts of every checkpoint against fixed strategy utilities.
inline std::vector<CurveRow> outperformance_curve(const std::vector<policy::Checkpoint>& checkpoints,
                                                  const std::vector<baselines::StrategyKind>& kinds,
                                                  const esg::ScenarioPanel& panel, std::size_t paths,
                                                  const rollout::Model& model,
                                                  const baselines::StrategyParams& sp = {}, unsigned threads = 1) {
  std::vector<std::vector<double>> base;
  for (auto k : kinds) base.push_back(strategy_utilities(k, model, panel, paths, sp));
  std::vector<CurveRow> rows;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    const auto& c = checkpoints[i];
    if (i > 0 && c.iteration <= checkpoints[i - 1].iteration)
      throw ConfigError("outperformance curve: checkpoints must have ascending iterations");
    check_horizon(c, model);
    const auto u = trainer::evaluate_policy(c.params, c.norm, model, panel, paths, false, threads).utilities;
    for (std::size_t s = 0; s < kinds.size(); ++s) {
      std::size_t count = 0;
      for (std::size_t m = 0; m < paths; ++m) count += u[m] > base[s][m];
      rows.push_back({c.iteration, baselines::to_string(kinds[s]), count});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Kernel density estimation

inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw NumericError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// Silverman's rule of thumb: 0.9 min(sd, IQR / 1.34) n^(-1/5).
inline double silverman_bandwidth(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double mean = 0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1));
  const double iqr = quantile(x, 0.75) - quantile(x, 0.25);
  double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

struct Density {
  std::vector<double> x, density;
  double bandwidth = 0;
};

inline std::vector<double> even_grid(double lo, double hi, std::size_t points) {
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

// Gaussian KDE at the given grid; an empty grid spans the data +- 4 bandwidths.
// A degenerate sample (zero spread) gets a bandwidth of 1e-3 of its scale so
// the estimate is a narrow spike at the repeated value.
inline Density kde(const std::vector<double>& samples, std::vector<double> grid = {}, std::size_t points = 512) {
  if (samples.size() < 2) throw NumericError("kde: need at least two samples");
  Density d;
  d.bandwidth = silverman_bandwidth(samples);
  if (!(d.bandwidth > 0)) d.bandwidth = 1e-3 * std::max(1.0, std::abs(samples.front()));
  if (grid.empty()) {
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    grid = even_grid(*mn - 4 * d.bandwidth, *mx + 4 * d.bandwidth, points);
  }
  const double h = d.bandwidth;
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2 * std::numbers::pi));
  d.density.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double sum = 0;
    for (double s : samples) {
      const double z = (grid[i] - s) / h;
      sum += std::exp(-0.5 * z * z);
    }
    d.density[i] = sum * norm;
  }
  d.x = std::move(grid);
  return d;
}

// Density of log10(U_policy - U_strategy) over the positive differences.
struct DifferenceDensity {
  Density log10_density;
  std::size_t positive = 0;
  std::size_t non_positive = 0;
  bool empty = false;  // fewer than two positive differences
};

inline DifferenceDensity difference_density(const std::vector<double>& diffs, std::size_t points = 512) {
  DifferenceDensity out;
  std::vector<double> logs;
  for (double d : diffs) {
    if (d > 0)
      logs.push_back(std::log10(d));
    else
      ++out.non_positive;
  }
  out.positive = logs.size();
  out.empty = logs.size() < 2;
  if (!out.empty) out.log10_density = kde(logs, {}, points);
  return out;
}

// ---------------------------------------------------------------------------
// Median paths

struct MedianPaths {
  std::vector<int> age;
  std::vector<double> consumption, wealth;  // real $
  std::vector<double> consumption_rate;     // median consumption / median wealth (NaN if wealth is 0)
};

inline MedianPaths median_paths(const std::vector<rollout::Trajectory>& set, int start_age) {
  if (set.empty()) throw NumericError("median_paths: empty rollout set");
  const std::size_t years = set.front().consumption.size();
  MedianPaths mp;
  std::vector<double> c(set.size()), w(set.size());
  for (std::size_t t = 0; t < years; ++t) {
    for (std::size_t m = 0; m < set.size(); ++m) {
      c[m] = set[m].consumption.at(t);
      w[m] = set[m].wealth.at(t);
    }
    mp.age.push_back(start_age + static_cast<int>(t));
    mp.consumption.push_back(median(c));
    mp.wealth.push_back(median(w));
    mp.consumption_rate.push_back(mp.wealth.back() > 0 ? mp.consumption.back() / mp.wealth.back() : std::nan(""));
  }
  return mp;
}

// ---------------------------------------------------------------------------
// CSV exports

inline void write_utilities_csv(std::ostream& out, const EvalReport& r) {
  out << "path,strategy,utility\n";
  for (std::size_t m = 0; m < r.policy_utilities.size(); ++m) {
    out << m << ',' << kPolicyName << ',' << csv::fmt(r.policy_utilities[m]) << '\n';
    for (const auto& s : r.strategies)
      out << m << ',' << baselines::to_string(s.kind) << ',' << csv::fmt(s.utilities[m]) << '\n';
  }
}

inline void write_outperformance_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "iter,strategy,count\n";
  for (const auto& r : rows) out << r.iteration << ',' << r.strategy << ',' << r.count << '\n';
}

inline void write_density_csv(std::ostream& out, const Density& d) {
  out << "x,density\n";
  for (std::size_t i = 0; i < d.x.size(); ++i) out << csv::fmt(d.x[i]) << ',' << csv::fmt(d.density[i]) << '\n';
}

inline void write_medians_csv(std::ostream& out, const MedianPaths& mp) {
  out << "age,consumption,wealth,consumption_rate\n";
  for (std::size_t i = 0; i < mp.age.size(); ++i)
    out << mp.age[i] << ',' << csv::fmt(mp.consumption[i]) << ',' << csv::fmt(mp.wealth[i]) << ','
        << (std::isnan(mp.consumption_rate[i]) ? std::string("nan") : csv::fmt(mp.consumption_rate[i])) << '\n';
}

}  // namespace decum::evaluator
