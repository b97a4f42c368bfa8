#pragma once

#include <cmath>
#include <span>
#include <string>

#include "decum/ad.hpp"
#include "decum/error.hpp"
#include "decum/mortality.hpp"

namespace decum::utility {

struct UtilityParams {
  double rho = 5.0;               // relative risk aversion, != 1
  double phi = 0.5;               // bequest strength in [0, 1)
  double floor_epsilon = 1e-10;   // real $, lower clamp inside both utilities

  void validate() const {
    if (!(rho >= 0) || rho == 1.0) throw ConfigError("utility: rho must be >= 0 and != 1");
    if (!(phi >= 0 && phi < 1)) throw ConfigError("utility: phi must lie in [0, 1)");
    if (!(floor_epsilon > 0)) throw ConfigError("utility: floor_epsilon must be positive");
  }

  double bequest_coefficient() const { return phi == 0 ? 0.0 : std::pow(phi / (1 - phi), rho); }
};

// max(c, eps)^(1-rho) / (1-rho)
template <class S>
S consumption_utility(const S& c, const UtilityParams& p) {
  using std::max;
  using std::pow;
  return pow(max(c, p.floor_epsilon), 1 - p.rho) / (1 - p.rho);
}

// (phi/(1-phi))^rho * max(w, eps)^(1-rho) / (1-rho); identically 0 without a bequest motive.
inline double bequest_utility(double w, const UtilityParams& p) {
  const double k = p.bequest_coefficient();
  if (k == 0) return 0.0;
  return k * consumption_utility(w, p);
}

inline ad::Var bequest_utility(const ad::Var& w, const UtilityParams& p) {
  const double k = p.bequest_coefficient();
  if (k == 0) return w.tape()->input(0.0);
  return k * consumption_utility(w, p);
}

// Running sum of tpx[t] u(c_t) + dq[t] v(w_t); terms with zero weight are skipped
// so the taped and plain accumulations perform identical floating-point work.
template <class S>
S add_period(const S& total, int t, const S& c, const S& w, const mortality::SurvivalCurve& curve,
             const UtilityParams& p) {
  S sum = total + curve.tpx[t] * consumption_utility(c, p);
  if (curve.dq[t] != 0 && p.phi != 0) sum = sum + curve.dq[t] * bequest_utility(w, p);
  return sum;
}

inline double lifetime_utility(std::span<const double> c_path, std::span<const double> w_path,
                               const mortality::SurvivalCurve& curve, const UtilityParams& p) {
  const auto n = static_cast<std::size_t>(curve.horizon() + 1);
  if (c_path.size() != n || w_path.size() != n)
    throw ConfigError("lifetime_utility: path lengths (" + std::to_string(c_path.size()) + ", " +
                      std::to_string(w_path.size()) + ") do not match horizon + 1 = " + std::to_string(n));
  double total = 0;
  for (std::size_t t = 0; t < n; ++t) total = add_period(total, static_cast<int>(t), c_path[t], w_path[t], curve, p);
  return total;
}

}  // namespace decum::utility
