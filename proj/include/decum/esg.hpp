#pragma once

// Seven-factor cascading economic scenario generator: inflation, short rate,
// domestic/international equity, domestic/international bonds and house prices.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "decum/csv.hpp"
#include "decum/error.hpp"

namespace decum::esg {

// Annual coefficients of the cascade. Recurrences (primes denote year t):
//   q' = (1 - phi_q) mu_q + phi_q q + eps_q
//   S' = phi_S S + (1 - phi_S)(mu_S - mu_q) + eps_S,   s' = S' + q'
//   e' = phi_e e + (1 - phi_e) mu_e + eps_e
//   n' = psi_n0 + psi_n1 n + psi_n2 e' + eps_n
//   b' = psi_b0 + psi_b1 b + psi_b2 n + eps_b          (previous-year n)
//   o' = psi_o0 + psi_o1 e' + psi_o2 n' + eps_o
//   h' = psi_h0 + psi_h1 b' + psi_h2 q' + eps_h
struct EsgParams {
  double mu_q = 0, phi_q = 0, sigma_q = 0;
  double mu_S = 0, phi_S = 0, sigma_S = 0;
  double mu_e = 0, phi_e = 0, sigma_e = 0;
  double psi_n0 = 0, psi_n1 = 0, psi_n2 = 0, sigma_n = 0;
  double psi_b0 = 0, psi_b1 = 0, psi_b2 = 0, sigma_b = 0;
  double psi_o0 = 0, psi_o1 = 0, psi_o2 = 0, sigma_o = 0;
  double psi_h0 = 0, psi_h1 = 0, psi_h2 = 0, sigma_h = 0;

  // Reference 1992-2020 Australian calibration, kept verbatim.
  static EsgParams preset() {
    EsgParams p;
    p.mu_q = 0.024, p.phi_q = 0.1346, p.sigma_q = 0.012;
    p.mu_S = 0.141, p.phi_S = 0.813, p.sigma_S = 0.015;
    p.mu_e = 0.085, p.phi_e = 0.164, p.sigma_e = 0.119;
    p.psi_n0 = -0.018, p.psi_n1 = 0.104, p.psi_n2 = 0.911, p.sigma_n = 0.090;
    p.psi_b0 = 0.073, p.psi_b1 = -0.103, p.psi_b2 = -0.050, p.sigma_b = 0.036;
    p.psi_o0 = -0.026, p.psi_o1 = 1.340, p.psi_o2 = -0.200, p.sigma_o = 0.081;
    p.psi_h0 = 0.066, p.psi_h1 = -0.489, p.psi_h2 = 1.037, p.sigma_h = 0.061;
    return p;
  }

  using Field = std::pair<std::string_view, double EsgParams::*>;
  static constexpr std::array<Field, 25> fields() {
    return {{{"mu_q", &EsgParams::mu_q},       {"phi_q", &EsgParams::phi_q},
             {"sigma_q", &EsgParams::sigma_q}, {"mu_S", &EsgParams::mu_S},
             {"phi_S", &EsgParams::phi_S},     {"sigma_S", &EsgParams::sigma_S},
             {"mu_e", &EsgParams::mu_e},       {"phi_e", &EsgParams::phi_e},
             {"sigma_e", &EsgParams::sigma_e}, {"psi_n0", &EsgParams::psi_n0},
             {"psi_n1", &EsgParams::psi_n1},   {"psi_n2", &EsgParams::psi_n2},
             {"sigma_n", &EsgParams::sigma_n}, {"psi_b0", &EsgParams::psi_b0},
             {"psi_b1", &EsgParams::psi_b1},   {"psi_b2", &EsgParams::psi_b2},
             {"sigma_b", &EsgParams::sigma_b}, {"psi_o0", &EsgParams::psi_o0},
             {"psi_o1", &EsgParams::psi_o1},   {"psi_o2", &EsgParams::psi_o2},
             {"sigma_o", &EsgParams::sigma_o}, {"psi_h0", &EsgParams::psi_h0},
             {"psi_h1", &EsgParams::psi_h1},   {"psi_h2", &EsgParams::psi_h2},
             {"sigma_h", &EsgParams::sigma_h}}};
  }

  std::array<double, 7> sigmas() const {
    return {sigma_q, sigma_S, sigma_e, sigma_n, sigma_b, sigma_o, sigma_h};
  }

  void validate() const {
    for (const auto& [name, member] : fields())
      if (!std::isfinite(this->*member)) throw ConfigError("esg parameter " + std::string(name) + " is not finite");
    for (double s : sigmas())
      if (!(s > 0)) throw ConfigError("esg volatilities must be positive");
    if (std::abs(phi_q) >= 1 || std::abs(phi_S) >= 1 || std::abs(phi_e) >= 1)
      throw ConfigError("esg autoregressive coefficients must lie strictly inside (-1, 1)");
  }
};

struct EconState {
  double q = 0;  // inflation, log CPI change
  double S = 0;  // real short-rate component
  double s = 0;  // nominal short rate, always S + q
  double e = 0, n = 0, b = 0, o = 0, h = 0;

  bool finite() const {
    return std::isfinite(q) && std::isfinite(S) && std::isfinite(s) && std::isfinite(e) &&
           std::isfinite(n) && std::isfinite(b) && std::isfinite(o) && std::isfinite(h);
  }
};

// Already scaled by the matching sigma.
struct ShockVector {
  double eps_q = 0, eps_S = 0, eps_e = 0, eps_n = 0, eps_b = 0, eps_o = 0, eps_h = 0;

  bool finite() const {
    return std::isfinite(eps_q) && std::isfinite(eps_S) && std::isfinite(eps_e) &&
           std::isfinite(eps_n) && std::isfinite(eps_b) && std::isfinite(eps_o) &&
           std::isfinite(eps_h);
  }
};

inline EconState step_esg(const EsgParams& p, const EconState& prev, const ShockVector& z) {
  if (!prev.finite() || !z.finite()) throw NumericError("step_esg: non-finite state or shock");
  EconState next;
  next.q = (1 - p.phi_q) * p.mu_q + p.phi_q * prev.q + z.eps_q;
  next.S = p.phi_S * prev.S + (1 - p.phi_S) * (p.mu_S - p.mu_q) + z.eps_S;
  next.s = next.S + next.q;
  next.e = p.phi_e * prev.e + (1 - p.phi_e) * p.mu_e + z.eps_e;
  next.n = p.psi_n0 + p.psi_n1 * prev.n + p.psi_n2 * next.e + z.eps_n;
  next.b = p.psi_b0 + p.psi_b1 * prev.b + p.psi_b2 * prev.n + z.eps_b;
  next.o = p.psi_o0 + p.psi_o1 * next.e + p.psi_o2 * next.n + z.eps_o;
  next.h = p.psi_h0 + p.psi_h1 * next.b + p.psi_h2 * next.q + z.eps_h;
  return next;
}

// Growth sleeve 50/30/20 in e/n/h, defensive sleeve 30/50/20 in s/b/o.
inline double portfolio_return(const EconState& x, double omega) {
  if (!(omega >= 0 && omega <= 1)) throw ConfigError("growth weight must lie in [0, 1]");
  const double growth = 0.5 * x.e + 0.3 * x.n + 0.2 * x.h;
  const double defensive = 0.3 * x.s + 0.5 * x.b + 0.2 * x.o;
  return omega * growth + (1 - omega) * defensive;
}

// M paths by T+1 years; row-major by path.
class ScenarioPanel {
 public:
  ScenarioPanel() = default;
  ScenarioPanel(std::size_t paths, int horizon)
      : paths_(paths), horizon_(horizon),
        states_(paths * (horizon + 1)),
        returns_(paths * (horizon + 1)),
        deflators_(paths * (horizon + 1)) {}

  std::size_t paths() const { return paths_; }
  int horizon() const { return horizon_; }

  const EconState& state(std::size_t m, int t) const { return states_[at(m, t)]; }
  EconState& state(std::size_t m, int t) { return states_[at(m, t)]; }
  double portfolio_return(std::size_t m, int t) const { return returns_[at(m, t)]; }
  double& portfolio_return(std::size_t m, int t) { return returns_[at(m, t)]; }
  double deflator(std::size_t m, int t) const { return deflators_[at(m, t)]; }
  double& deflator(std::size_t m, int t) { return deflators_[at(m, t)]; }
  // Contiguous years 0..T of one path.
  std::span<const double> returns(std::size_t m) const { return {&returns_[at(m, 0)], std::size_t(horizon_ + 1)}; }
  std::span<const double> deflators(std::size_t m) const {
    return {&deflators_[at(m, 0)], std::size_t(horizon_ + 1)};
  }

  static std::size_t bytes_required(std::size_t paths, int horizon) {
    return paths * static_cast<std::size_t>(horizon + 1) * (sizeof(EconState) + 2 * sizeof(double));
  }

  bool operator==(const ScenarioPanel& other) const {
    if (paths_ != other.paths_ || horizon_ != other.horizon_) return false;
    for (std::size_t i = 0; i < states_.size(); ++i) {
      const auto& a = states_[i];
      const auto& b = other.states_[i];
      if (a.q != b.q || a.S != b.S || a.s != b.s || a.e != b.e || a.n != b.n || a.b != b.b ||
          a.o != b.o || a.h != b.h)
        return false;
    }
    return returns_ == other.returns_ && deflators_ == other.deflators_;
  }

 private:
  std::size_t at(std::size_t m, int t) const { return m * (horizon_ + 1) + static_cast<std::size_t>(t); }

  std::size_t paths_ = 0;
  int horizon_ = 0;
  std::vector<EconState> states_;
  std::vector<double> returns_;
  std::vector<double> deflators_;
};

struct SimulationOptions {
  double omega = 0.7;
  unsigned threads = 1;
  std::size_t memory_budget_bytes = std::size_t{2} << 30;
};

// Independent generator per path, keyed on (seed, path index).
inline std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t path) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
                    0x65736775u};
  return std::mt19937_64(seq);
}

inline void simulate_path(const EsgParams& params, const EconState& initial, std::uint64_t seed,
                          std::size_t m, double omega, ScenarioPanel& panel) {
  auto rng = path_stream(seed, m);
  std::normal_distribution<double> normal(0.0, 1.0);
  EconState x = initial;
  x.s = x.S + x.q;
  double cumulative_q = 0;
  panel.state(m, 0) = x;
  panel.portfolio_return(m, 0) = portfolio_return(x, omega);
  panel.deflator(m, 0) = 1.0;
  for (int t = 1; t <= panel.horizon(); ++t) {
    ShockVector z;
    z.eps_q = params.sigma_q * normal(rng);
    z.eps_S = params.sigma_S * normal(rng);
    z.eps_e = params.sigma_e * normal(rng);
    z.eps_n = params.sigma_n * normal(rng);
    z.eps_b = params.sigma_b * normal(rng);
    z.eps_o = params.sigma_o * normal(rng);
    z.eps_h = params.sigma_h * normal(rng);
    x = step_esg(params, x, z);
    cumulative_q += x.q;
    panel.state(m, t) = x;
    panel.portfolio_return(m, t) = portfolio_return(x, omega);
    panel.deflator(m, t) = std::exp(cumulative_q);
  }
}

inline ScenarioPanel simulate(const EsgParams& params, const EconState& initial, std::size_t paths,
                              int horizon, std::uint64_t seed, const SimulationOptions& opts = {}) {
  if (paths < 1 || horizon < 1) throw ConfigError("simulate: need at least one path and one year");
  if (!initial.finite()) throw NumericError("simulate: non-finite initial state");
  const std::size_t per_path = ScenarioPanel::bytes_required(1, horizon);
  if (paths > opts.memory_budget_bytes / per_path)
    throw CapacityError("simulate: " + std::to_string(paths) + " paths x " + std::to_string(horizon) +
                        " years exceeds the memory budget of " +
                        std::to_string(opts.memory_budget_bytes) + " bytes");
  params.validate();
  ScenarioPanel panel(paths, horizon);
  const unsigned workers = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(paths)));
  if (workers == 1) {
    for (std::size_t m = 0; m < paths; ++m) simulate_path(params, initial, seed, m, opts.omega, panel);
    return panel;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t m = w; m < paths; m += workers)
        simulate_path(params, initial, seed, m, opts.omega, panel);
    });
  }
  for (auto& th : pool) th.join();
  return panel;
}

// ---------------------------------------------------------------------------
// Historical data and calibration

struct HistoricalRecord {
  int year = 0;
  double cpi = 0, s = 0, E = 0, N = 0, B = 0, O = 0, HPI = 0;
};

struct HistoricalSeries {
  std::vector<HistoricalRecord> records;

  void validate() const {
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (i > 0 && r.year <= records[i - 1].year)
        throw DataError("historical years must be strictly increasing (at " + std::to_string(r.year) + ")");
      if (!(r.cpi > 0 && r.E > 0 && r.N > 0 && r.B > 0 && r.O > 0 && r.HPI > 0))
        throw DataError("historical indices must be positive (year " + std::to_string(r.year) + ")");
      if (!std::isfinite(r.s)) throw DataError("non-finite short rate in year " + std::to_string(r.year));
    }
  }
};

// Short rate column is a decimal fraction (0.0642 for 6.42%).
inline HistoricalSeries read_history(std::istream& in, const std::string& name = "history") {
  const auto table = csv::Table::read(in, name);
  const std::size_t cy = table.column("year"), cc = table.column("cpi"), cs = table.column("s"),
                    cE = table.column("E"), cN = table.column("N"), cB = table.column("B"),
                    cO = table.column("O"), cH = table.column("HPI");
  HistoricalSeries h;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    HistoricalRecord r;
    r.year = static_cast<int>(table.number(i, cy));
    r.cpi = table.number(i, cc);
    r.s = table.number(i, cs);
    r.E = table.number(i, cE);
    r.N = table.number(i, cN);
    r.B = table.number(i, cB);
    r.O = table.number(i, cO);
    r.HPI = table.number(i, cH);
    h.records.push_back(r);
  }
  h.validate();
  return h;
}

inline HistoricalSeries read_history_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_history(in, path);
}

// Annual factor observations; one EconState per year after the first record.
struct ReturnSeries {
  std::vector<int> years;
  std::vector<EconState> values;
};

inline ReturnSeries to_returns(const HistoricalSeries& h) {
  h.validate();
  ReturnSeries out;
  for (std::size_t i = 1; i < h.records.size(); ++i) {
    const auto& a = h.records[i - 1];
    const auto& b = h.records[i];
    EconState x;
    x.q = std::log(b.cpi / a.cpi);
    x.s = b.s;
    x.S = x.s - x.q;
    x.e = std::log(b.E / a.E);
    x.n = std::log(b.N / a.N);
    x.b = std::log(b.B / a.B);
    x.o = std::log(b.O / a.O);
    x.h = std::log(b.HPI / a.HPI);
    out.years.push_back(b.year);
    out.values.push_back(x);
  }
  return out;
}

// Last observed year as a simulation starting point.
inline EconState initial_state_from(const HistoricalSeries& h) {
  if (h.records.size() < 2) throw DataError("need at least two historical rows for an initial state");
  return to_returns(h).values.back();
}

inline constexpr std::array<std::string_view, 7> kEquationNames = {"q", "S", "e", "n", "b", "o", "h"};

namespace detail {

struct Regression {
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
  double sigma = 0;
};

inline Regression ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& regressors, std::string_view eq) {
  const Eigen::Index n = y.size();
  Eigen::MatrixXd X(n, regressors.cols() + 1);
  X.col(0).setOnes();
  X.rightCols(regressors.cols()) = regressors;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-12);
  if (qr.rank() < X.cols())
    throw DataError("calibration: singular design matrix in equation '" + std::string(eq) + "'");
  Regression r;
  r.beta = qr.solve(y);
  r.residuals = y - X * r.beta;
  r.sigma = std::sqrt(r.residuals.squaredNorm() / static_cast<double>(n));
  return r;
}

// Design for one equation over the common sample t = 1..n-1 (all lags available).
struct EquationData {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
};

inline EquationData equation_data(const std::vector<EconState>& v, std::size_t eq) {
  const Eigen::Index n = static_cast<Eigen::Index>(v.size()) - 1;
  EquationData d{Eigen::VectorXd(n), Eigen::MatrixXd(n, eq <= 2 ? 1 : 2)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& cur = v[i + 1];
    const auto& prev = v[i];
    switch (eq) {
      case 0: d.y(i) = cur.q, d.x(i, 0) = prev.q; break;
      case 1: d.y(i) = cur.S, d.x(i, 0) = prev.S; break;
      case 2: d.y(i) = cur.e, d.x(i, 0) = prev.e; break;
      case 3: d.y(i) = cur.n, d.x(i, 0) = prev.n, d.x(i, 1) = cur.e; break;
      case 4: d.y(i) = cur.b, d.x(i, 0) = prev.b, d.x(i, 1) = prev.n; break;
      case 5: d.y(i) = cur.o, d.x(i, 0) = cur.e, d.x(i, 1) = cur.n; break;
      default: d.y(i) = cur.h, d.x(i, 0) = cur.b, d.x(i, 1) = cur.q; break;
    }
  }
  return d;
}

}  // namespace detail

inline constexpr std::size_t kMinCalibrationYears = 10;

inline EsgParams calibrate(const ReturnSeries& series) {
  const auto& v = series.values;
  if (v.size() + 1 < kMinCalibrationYears)
    throw DataError("calibration: insufficient data (" + std::to_string(v.size() + 1) +
                    " annual records, need at least " + std::to_string(kMinCalibrationYears) + ")");
  std::array<detail::Regression, 7> fit;
  for (std::size_t eq = 0; eq < 7; ++eq) {
    const auto d = detail::equation_data(v, eq);
    fit[eq] = detail::ols(d.y, d.x, kEquationNames[eq]);
  }
  auto ar1_mean = [](const detail::Regression& r, std::string_view eq) {
    const double phi = r.beta(1);
    if (std::abs(1 - phi) < 1e-12)
      throw DataError("calibration: unit root in equation '" + std::string(eq) + "'");
    return r.beta(0) / (1 - phi);
  };
  EsgParams p;
  p.phi_q = fit[0].beta(1), p.mu_q = ar1_mean(fit[0], "q"), p.sigma_q = fit[0].sigma;
  p.phi_S = fit[1].beta(1), p.mu_S = ar1_mean(fit[1], "S") + p.mu_q, p.sigma_S = fit[1].sigma;
  p.phi_e = fit[2].beta(1), p.mu_e = ar1_mean(fit[2], "e"), p.sigma_e = fit[2].sigma;
  p.psi_n0 = fit[3].beta(0), p.psi_n1 = fit[3].beta(1), p.psi_n2 = fit[3].beta(2), p.sigma_n = fit[3].sigma;
  p.psi_b0 = fit[4].beta(0), p.psi_b1 = fit[4].beta(1), p.psi_b2 = fit[4].beta(2), p.sigma_b = fit[4].sigma;
  p.psi_o0 = fit[5].beta(0), p.psi_o1 = fit[5].beta(1), p.psi_o2 = fit[5].beta(2), p.sigma_o = fit[5].sigma;
  p.psi_h0 = fit[6].beta(0), p.psi_h1 = fit[6].beta(1), p.psi_h2 = fit[6].beta(2), p.sigma_h = fit[6].sigma;
  return p;
}

inline EsgParams calibrate(const HistoricalSeries& history) {
  if (history.records.size() < kMinCalibrationYears)
    throw DataError("calibration: insufficient data (" + std::to_string(history.records.size()) +
                    " annual records, need at least " + std::to_string(kMinCalibrationYears) + ")");
  return calibrate(to_returns(history));
}

struct ResidualDiagnostics {
  std::vector<int> years;                          // years of the common sample
  std::array<std::vector<double>, 7> residuals;    // ordered q, S, e, n, b, o, h
  Eigen::Matrix<double, 7, 7> correlation;
};

// One-step-ahead residuals of each equation under `params`, plus their correlations.
inline ResidualDiagnostics residual_diagnostics(const ReturnSeries& series, const EsgParams& params) {
  const auto& v = series.values;
  if (v.size() < 3) throw DataError("residual diagnostics: need at least three observations");
  ResidualDiagnostics out;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const auto& prev = v[i - 1];
    const auto& cur = v[i];
    // Predicted values reuse observed contemporaneous regressors.
    const double q = (1 - params.phi_q) * params.mu_q + params.phi_q * prev.q;
    const double S = params.phi_S * prev.S + (1 - params.phi_S) * (params.mu_S - params.mu_q);
    const double e = params.phi_e * prev.e + (1 - params.phi_e) * params.mu_e;
    const double n = params.psi_n0 + params.psi_n1 * prev.n + params.psi_n2 * cur.e;
    const double b = params.psi_b0 + params.psi_b1 * prev.b + params.psi_b2 * prev.n;
    const double o = params.psi_o0 + params.psi_o1 * cur.e + params.psi_o2 * cur.n;
    const double h = params.psi_h0 + params.psi_h1 * cur.b + params.psi_h2 * cur.q;
    const std::array<double, 7> r = {cur.q - q, cur.S - S, cur.e - e, cur.n - n,
                                     cur.b - b, cur.o - o, cur.h - h};
    for (std::size_t k = 0; k < 7; ++k) out.residuals[k].push_back(r[k]);
    out.years.push_back(series.years[i]);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(out.years.size());
  Eigen::MatrixXd R(n, 7);
  for (Eigen::Index k = 0; k < 7; ++k)
    for (Eigen::Index i = 0; i < n; ++i) R(i, k) = out.residuals[k][i];
  const Eigen::MatrixXd centered = R.rowwise() - R.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  for (int a = 0; a < 7; ++a) {
    for (int b = 0; b < 7; ++b) {
      const double denom = std::sqrt(cov(a, a) * cov(b, b));
      out.correlation(a, b) = a == b ? 1.0 : (denom > 0 ? cov(a, b) / denom : 0.0);
    }
  }
  // Exact symmetry regardless of summation order.
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < a; ++b) out.correlation(a, b) = out.correlation(b, a);
  return out;
}

inline ResidualDiagnostics residual_diagnostics(const HistoricalSeries& history, const EsgParams& params) {
  return residual_diagnostics(to_returns(history), params);
}

// ---------------------------------------------------------------------------
// Serialization

inline void write_params(std::ostream& out, const EsgParams& p) {
  for (const auto& [name, member] : EsgParams::fields()) out << name << " = " << csv::fmt(p.*member) << '\n';
}

inline EsgParams read_params(std::istream& in, const std::string& name = "esg params") {
  EsgParams p;
  std::array<bool, 25> seen{};
  std::string line;
  std::size_t line_no = 0;
  const auto fields = EsgParams::fields();
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = csv::trim(line.substr(0, line.find_first_of("#;")));
    if (body.empty() || body.front() == '[') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw DataError(name + ":" + std::to_string(line_no) + ": expected key = value");
    const auto key = csv::trim(std::string_view(body).substr(0, eq));
    const auto value = csv::trim(std::string_view(body).substr(eq + 1));
    bool known = false;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].first == key) {
        p.*(fields[i].second) = csv::parse_double(value, name + ":" + std::to_string(line_no));
        seen[i] = known = true;
      }
    }
    if (!known) throw DataError(name + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  for (std::size_t i = 0; i < fields.size(); ++i)
    if (!seen[i]) throw DataError(name + ": missing key '" + std::string(fields[i].first) + "'");
  return p;
}

inline EsgParams read_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_params(in, path);
}

inline void write_panel_csv(std::ostream& out, const ScenarioPanel& panel) {
  out << "path,t,q,s,e,n,b,o,h,R,Q\n";
  for (std::size_t m = 0; m < panel.paths(); ++m) {
    for (int t = 0; t <= panel.horizon(); ++t) {
      const auto& x = panel.state(m, t);
      out << m << ',' << t << ',' << csv::fmt(x.q) << ',' << csv::fmt(x.s) << ',' << csv::fmt(x.e) << ','
          << csv::fmt(x.n) << ',' << csv::fmt(x.b) << ',' << csv::fmt(x.o) << ',' << csv::fmt(x.h) << ','
          << csv::fmt(panel.portfolio_return(m, t)) << ',' << csv::fmt(panel.deflator(m, t)) << '\n';
    }
  }
}

}  // namespace decum::esg
