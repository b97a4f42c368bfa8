#pragma once

// Means-tested Age Pension, fund fees, deflator and the one-year wealth transition.
// Pension, fee and wealth functions are templated on the scalar type so the
// same code serves plain double evaluation and taped (differentiable) rollouts.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "decum/ad.hpp"
#include "decum/error.hpp"

namespace decum::account {

// Single homeowner rates and thresholds as at June 2020; dollar amounts are
// annual in base-year terms and index with the deflator.
struct PensionParams {
  double full_pension = 24619.0;        // A_max
  double asset_free_area = 263250.0;    // W_A
  double asset_taper = 0.003;           // per fortnight, per $ of excess assets
  double income_free_area = 4536.0;     // I
  double deeming_threshold = 51800.0;   // W_I
  double deeming_rate_low = 0.0025;     // r1
  double deeming_rate_high = 0.0225;    // r2
  double income_taper = 0.5;            // tau_I
  double fortnights_per_year = 26.0;

  void validate() const {
    if (!(full_pension > 0)) throw ConfigError("pension: full pension must be positive");
    if (!(deeming_rate_low < deeming_rate_high)) throw ConfigError("pension: require r1 < r2");
    for (double x : {asset_free_area, asset_taper, income_free_area, deeming_threshold, deeming_rate_low,
                     income_taper, fortnights_per_year})
      if (!(x >= 0)) throw ConfigError("pension: rates and thresholds must be non-negative");
  }

  // Real wealth at which the asset test removes the whole pension.
  double asset_cutoff() const { return asset_free_area + full_pension / (fortnights_per_year * asset_taper); }
};

struct AccountParams {
  double omega = 0.7;                  // growth-asset weight
  double admin_fee = 50.0;             // $/yr, base-year terms
  double indirect_cost_ratio = 0.006;  // /yr
  double investment_fee = 0.005;       // /yr

  void validate() const {
    if (!(omega >= 0 && omega <= 1)) throw ConfigError("account: omega must lie in [0, 1]");
    if (!(admin_fee >= 0 && indirect_cost_ratio >= 0 && investment_fee >= 0))
      throw ConfigError("account: fees must be non-negative");
  }
};

struct AccountState {
  double W = 0;  // nominal wealth
  double Q = 1;  // deflator
  int t = 0;
};

// Q_t = exp(q_1 + ... + q_t), Q_0 = 1. q_path[0] is the base year and never enters.
inline double compound_deflator(std::span<const double> q_path, int t) {
  if (t < 0) throw RangeError("compound_deflator: negative year");
  if (static_cast<std::size_t>(t) >= q_path.size() && t > 0)
    throw RangeError("compound_deflator: year beyond inflation path");
  double sum = 0;
  for (int s = 1; s <= t; ++s) sum += q_path[s];
  return std::exp(sum);
}

template <class S>
S age_pension(const S& W, const S& Q, const PensionParams& p) {
  using std::max;
  using std::min;
  if (ad::lane_min(W) < 0) throw NumericError("age_pension: negative wealth");
  if (!(ad::lane_min(Q) > 0)) throw NumericError("age_pension: deflator must be positive");
  const S full = p.full_pension * Q;
  const S asset_test = max(full - (p.fortnights_per_year * p.asset_taper) * max(W - p.asset_free_area * Q, 0.0), 0.0);
  const S threshold = p.deeming_threshold * Q;
  const S deemed = p.deeming_rate_low * min(W, threshold) + p.deeming_rate_high * max(W - threshold, 0.0);
  const S income_test = max(full - p.income_taper * max(deemed - p.income_free_area * Q, 0.0), 0.0);
  return min(asset_test, income_test);
}

template <class S>
S fees(const S& W, const S& Q, const AccountParams& a) {
  return a.admin_fee * Q + (a.indirect_cost_ratio + a.investment_fee) * W;
}

// W' = max(W + A - C - Fee, 0) * exp(R); the floor applies before growth.
template <class S, class R>
S next_wealth(const S& W, const S& A, const S& C, const S& fee, const R& growth) {
  using std::exp;
  using std::max;
  return max(W + A - C - fee, 0.0) * exp(growth);
}

inline void check_consumption(double W, double A, double C, int t) {
  if (!(C >= 0 && C <= W + A))
    throw ConstraintError("consumption outside [0, W + A] at t = " + std::to_string(t));
}

inline void check_consumption(const ad::Var& W, const ad::Var& A, const ad::Var& C, int t) {
  const auto& c = C.value();
  if (!((c >= 0.0).all() && (c <= W.value() + A.value()).all()))
    throw ConstraintError("consumption outside [0, W + A] at t = " + std::to_string(t));
}

inline AccountState wealth_step(const AccountState& state, double C, double A, double fee, double R,
                                double next_Q) {
  check_consumption(state.W, A, C, state.t);
  if (!(next_Q > 0)) throw NumericError("wealth_step: deflator must be positive");
  AccountState next;
  next.W = next_wealth(state.W, A, C, fee, R);
  next.Q = next_Q;
  next.t = state.t + 1;
  return next;
}

}  // namespace decum::account
