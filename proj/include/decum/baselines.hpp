#pragma once

// Deterministic drawdown strategies evaluated through the same transition as
// the trained policy.

#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "decum/error.hpp"
#include "decum/rollout.hpp"

namespace decum::baselines {

enum class StrategyKind { Minimum, FourPercent, RuleOfThumb, Modest, Comfortable, Luxury };

inline constexpr std::array<StrategyKind, 6> kAllStrategies = {
    StrategyKind::Minimum, StrategyKind::FourPercent, StrategyKind::RuleOfThumb,
    StrategyKind::Modest,  StrategyKind::Comfortable, StrategyKind::Luxury};

inline const char* to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::Minimum: return "minimum";
    case StrategyKind::FourPercent: return "four_percent";
    case StrategyKind::RuleOfThumb: return "rule_of_thumb";
    case StrategyKind::Modest: return "modest";
    case StrategyKind::Comfortable: return "comfortable";
    case StrategyKind::Luxury: return "luxury";
  }
  return "?";
}

inline StrategyKind parse_strategy(std::string_view s) {
  for (auto k : kAllStrategies)
    if (s == to_string(k)) return k;
  throw ConfigError("unknown strategy '" + std::string(s) + "'");
}

// Statutory minimum drawdown rate for an age band starting at `from_age`.
struct DrawdownBand {
  int from_age;
  double rate;
};

struct StrategyParams {
  std::vector<DrawdownBand> minimum_drawdown = {{0, 0.04},  {65, 0.05}, {75, 0.06}, {80, 0.07},
                                                {85, 0.09}, {90, 0.11}, {95, 0.14}};
  double four_percent_rate = 0.04;
  double rot_bonus = 0.02;
  double rot_band_low = 250000.0;   // real $
  double rot_band_high = 500000.0;  // real $
  double modest = 28220.0;          // real $/yr
  double comfortable = 44183.0;
  double luxury = 50000.0;

  void validate() const {
    if (minimum_drawdown.empty()) throw ConfigError("strategies: empty minimum drawdown table");
    for (std::size_t i = 0; i < minimum_drawdown.size(); ++i) {
      if (!(minimum_drawdown[i].rate >= 0 && minimum_drawdown[i].rate <= 1))
        throw ConfigError("strategies: drawdown rates must lie in [0, 1]");
      if (i > 0 && minimum_drawdown[i].from_age <= minimum_drawdown[i - 1].from_age)
        throw ConfigError("strategies: drawdown bands must have increasing ages");
    }
  }

  double minimum_rate(int age) const {
    double rate = minimum_drawdown.front().rate;
    for (const auto& b : minimum_drawdown)
      if (age >= b.from_age) rate = b.rate;
    return rate;
  }
};

inline int first_digit(int n) {
  while (n >= 10) n /= 10;
  return n;
}

// Nominal consumption C for one year, capped at W + A.
inline double deterministic_consumption(StrategyKind kind, int age, double W, double A, double Q, double W0,
                                        const StrategyParams& p = {}) {
  if (!(W >= 0 && A >= 0 && Q > 0 && W0 >= 0 && age >= 0))
    throw NumericError("deterministic_consumption: inputs must be non-negative");
  double C = 0;
  switch (kind) {
    case StrategyKind::Minimum: C = p.minimum_rate(age) * W + A; break;
    case StrategyKind::FourPercent: C = p.four_percent_rate * W0 * Q + A; break;
    case StrategyKind::RuleOfThumb: {
      const double real = W / Q;
      double rate = first_digit(age) / 100.0;
      if (real >= p.rot_band_low && real <= p.rot_band_high) rate += p.rot_bonus;
      C = rate * W + A;
      break;
    }
    case StrategyKind::Modest: C = p.modest * Q; break;
    case StrategyKind::Comfortable: C = p.comfortable * Q; break;
    case StrategyKind::Luxury: C = p.luxury * Q; break;
  }
  return std::min(C, W + A);
}

inline auto strategy_decision(StrategyKind kind, const rollout::Model& model, const StrategyParams& p) {
  return [kind, &model, &p](const rollout::StepState<double>& s) {
    return deterministic_consumption(kind, model.age(s.t), s.W, s.A, s.Q, model.initial_wealth, p);
  };
}

// Real consumption, wealth and pension along one path, and the realised utility.
inline rollout::Trajectory rollout_deterministic(StrategyKind kind, const rollout::Model& model,
                                                 rollout::PathView path, const StrategyParams& p = {}) {
  return rollout::trajectory(model, path, strategy_decision(kind, model, p));
}

inline double deterministic_utility(StrategyKind kind, const rollout::Model& model, rollout::PathView path,
                                    const StrategyParams& p = {}) {
  return rollout::run(model, rollout::ScalarEnv(path), strategy_decision(kind, model, p));
}

}  // namespace decum::baselines
