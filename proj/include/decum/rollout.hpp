#pragma once

// The controlled one-year transition shared by the trained policy and every
// deterministic strategy: pension, consumption decision, utility accrual,
// fees, and wealth growth. Written once over a scalar type S so plain
// (double) and taped (batched ad::Var) rollouts run the same code.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "decum/account.hpp"
#include "decum/ad.hpp"
#include "decum/error.hpp"
#include "decum/esg.hpp"
#include "decum/mortality.hpp"
#include "decum/utility.hpp"

namespace decum::rollout {

struct Model {
  mortality::SurvivalCurve curve;
  utility::UtilityParams utility;
  account::PensionParams pension;
  account::AccountParams account;
  double initial_wealth = 500000.0;  // W_0, nominal = real at t = 0

  int horizon() const { return curve.horizon(); }
  int age(int t) const { return curve.age + t; }

  void validate() const {
    utility.validate();
    pension.validate();
    account.validate();
    if (curve.tpx.empty()) throw ConfigError("model: empty survival curve");
    if (!(initial_wealth >= 0)) throw ConfigError("model: initial wealth must be non-negative");
  }
};

// Years 0..T of one scenario: portfolio return earned during year t (index t
// is applied when moving from t-1 to t) and the deflator Q_t.
struct PathView {
  std::span<const double> returns;
  std::span<const double> deflators;
};

inline PathView path_view(const esg::ScenarioPanel& panel, std::size_t m) {
  if (m >= panel.paths()) throw RangeError("path " + std::to_string(m) + " outside panel");
  return {panel.returns(m), panel.deflators(m)};
}

template <class S>
struct StepState {
  int t;
  S W;         // nominal wealth at the start of year t
  S A;         // Age Pension paid in year t
  S Q;         // deflator
  S R;         // return observed over the previous year (0 at t = 0)
};

// Plain evaluation of one path.
class ScalarEnv {
 public:
  using Scalar = double;
  explicit ScalarEnv(PathView path) : path_(path) {}
  double constant(double v) const { return v; }
  double deflator(int t) const { return path_.deflators[t]; }
  double growth(int t) const { return path_.returns[t]; }
  double observed_return(int t) const { return t == 0 ? 0.0 : path_.returns[t]; }
  std::size_t years() const { return std::min(path_.returns.size(), path_.deflators.size()); }

 private:
  PathView path_;
};

// Several paths side by side on one tape, one lane per path.
class BatchEnv {
 public:
  using Scalar = ad::Var;
  BatchEnv(ad::Tape& tape, std::vector<PathView> lanes) : tape_(tape), lanes_(std::move(lanes)) {
    if (static_cast<Eigen::Index>(lanes_.size()) != tape.width())
      throw NumericError("batch: number of paths does not match tape width");
  }
  ad::Var constant(double v) const { return tape_.input(v); }
  ad::Var deflator(int t) const { return gather(t, [](const PathView& p, int s) { return p.deflators[s]; }); }
  ad::Var growth(int t) const { return gather(t, [](const PathView& p, int s) { return p.returns[s]; }); }
  ad::Var observed_return(int t) const { return t == 0 ? tape_.input(0.0) : growth(t); }
  std::size_t years() const {
    std::size_t n = SIZE_MAX;
    for (const auto& p : lanes_) n = std::min({n, p.returns.size(), p.deflators.size()});
    return n;
  }
  ad::Tape& tape() const { return tape_; }

 private:
  template <class F>
  ad::Var gather(int t, F f) const {
    ad::Array v(tape_.width());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f(lanes_[i], t);
    return tape_.input(v);
  }

  ad::Tape& tape_;
  std::vector<PathView> lanes_;
};

// Runs t = 0..T and returns the realised lifetime utility
//   sum_t tpx[t] u(C_t / Q_t) + dq[t] v(W_t / Q_t).
// decide(const StepState<S>&) -> nominal consumption C_t in [0, W_t + A_t].
// observe(const StepState<S>&, const S& C) sees every step (for recording).
template <class Env, class Decide, class Observe>
typename Env::Scalar run(const Model& model, const Env& env, Decide&& decide, Observe&& observe) {
  using S = typename Env::Scalar;
  const int T = model.horizon();
  if (env.years() < static_cast<std::size_t>(T + 1))
    throw ConfigError("rollout: scenario covers " + std::to_string(env.years()) + " years but the horizon needs " +
                      std::to_string(T + 1));
  S W = env.constant(model.initial_wealth);
  S total = env.constant(0.0);
  for (int t = 0; t <= T; ++t) {
    const S Q = env.deflator(t);
    StepState<S> s{t, W, account::age_pension(W, Q, model.pension), Q, env.observed_return(t)};
    const S C = decide(s);
    account::check_consumption(s.W, s.A, C, t);
    observe(s, C);
    total = utility::add_period(total, t, C / Q, W / Q, model.curve, model.utility);
    if (!ad::all_finite(total)) throw NumericError("rollout: non-finite utility at t = " + std::to_string(t));
    if (t < T) {
      const S fee = account::fees(W, Q, model.account);
      W = account::next_wealth(W, s.A, C, fee, env.growth(t + 1));
      if (!ad::all_finite(W)) throw NumericError("rollout: non-finite wealth at t = " + std::to_string(t + 1));
    }
  }
  return total;
}

template <class Env, class Decide>
typename Env::Scalar run(const Model& model, const Env& env, Decide&& decide) {
  return run(model, env, std::forward<Decide>(decide), [](const auto&, const auto&) {});
}

// Real consumption, wealth and pension per year of one path.
struct Trajectory {
  std::vector<double> consumption, wealth, pension;
  double utility = 0;
};

template <class Decide>
Trajectory trajectory(const Model& model, PathView path, Decide&& decide) {
  Trajectory tr;
  tr.utility = run(model, ScalarEnv(path), std::forward<Decide>(decide),
                   [&](const StepState<double>& s, double C) {
                     tr.consumption.push_back(C / s.Q);
                     tr.wealth.push_back(s.W / s.Q);
                     tr.pension.push_back(s.A / s.Q);
                   });
  return tr;
}

}  // namespace decum::rollout
