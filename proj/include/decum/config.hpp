#pragma once

// INI run configuration shared by all commands. Relative data paths resolve
// against the directory of the config file.
//
//   [household]   age, gender, initial_wealth, horizon
//   [utility]     rho, phi, floor_epsilon
//   [pension]     full_pension, asset_free_area, asset_taper, income_free_area,
//                 deeming_threshold, deeming_rate_low, deeming_rate_high,
//                 income_taper, fortnights_per_year
//   [account]     omega, admin_fee, indirect_cost_ratio, investment_fee
//   [data]        history, life_table, esg_params (empty = built-in preset), base_lag
//   [training]    paths, iterations, batch_size, seed, k1, k2, k3, learning_rate,
//                 beta1, beta2, eps_hat, clip_norm, checkpoint_every, chunk_size
//   [evaluation]  test_paths, test_seed, strategies, kde_points
//   [strategies]  minimum_drawdown ("age:rate,..."), four_percent_rate, rot_bonus,
//                 rot_band_low, rot_band_high, modest, comfortable, luxury
//   [run]         threads

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "decum/account.hpp"
#include "decum/baselines.hpp"
#include "decum/csv.hpp"
#include "decum/error.hpp"
#include "decum/esg.hpp"
#include "decum/mortality.hpp"
#include "decum/policy_net.hpp"
#include "decum/rollout.hpp"
#include "decum/trainer.hpp"
#include "decum/utility.hpp"

#ifndef DECUM_DATA_DIR
#define DECUM_DATA_DIR "data"
#endif

namespace decum::config {

struct RunConfig {
  std::string base_dir = ".";

  int age = 67;
  mortality::Gender gender = mortality::Gender::Male;
  double initial_wealth = 500000.0;
  int horizon = 41;

  utility::UtilityParams utility;
  account::PensionParams pension;
  account::AccountParams account;

  std::string history_file = std::string(DECUM_DATA_DIR) + "/historical_au_1992_2020.csv";
  std::string life_table_file = std::string(DECUM_DATA_DIR) + "/life_table_au_2015_17.csv";
  std::string esg_params_file;
  double base_lag = 3.0;

  std::size_t paths = 5000;
  std::size_t iterations = 2000;
  std::size_t batch_size = 512;
  std::uint64_t seed = 2020;
  policy::MlpShape shape;
  trainer::AdamHyper adam;
  double clip_norm = 1.0;
  std::size_t checkpoint_every = 100;
  std::size_t chunk_size = 64;

  std::size_t test_paths = 10000;
  std::uint64_t test_seed = 1992;
  std::vector<baselines::StrategyKind> strategies{baselines::kAllStrategies.begin(), baselines::kAllStrategies.end()};
  std::size_t kde_points = 512;
  baselines::StrategyParams strategy_params;

  unsigned threads = 1;

  void validate() const {
    if (age < 0) throw ConfigError("household.age must be non-negative");
    if (horizon < 0) throw ConfigError("household.horizon must be non-negative");
    if (!(initial_wealth >= 0)) throw ConfigError("household.initial_wealth must be non-negative");
    utility.validate();
    pension.validate();
    account.validate();
    strategy_params.validate();
    if (paths < 1 || batch_size < 1 || batch_size > paths)
      throw ConfigError("training: need 1 <= batch_size <= paths");
    if (shape.k1 < 1 || shape.k2 < 1 || shape.k3 < 1) throw ConfigError("training: widths must be >= 1");
    if (test_paths < 1) throw ConfigError("evaluation.test_paths must be >= 1");
    if (test_seed == seed) throw ConfigError("evaluation.test_seed must differ from training.seed");
    if (threads < 1) throw ConfigError("run.threads must be >= 1");
    if (!(clip_norm >= 0)) throw ConfigError("training.clip_norm must be non-negative");
  }
};

namespace detail {

inline std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (std::filesystem::path(base) / path).lexically_normal().string();
}

template <class T>
T convert(const std::string& section, const std::string& key, const std::string& raw) {
  const std::string v = csv::trim(raw);
  const std::string where = section + "." + key;
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_floating_point_v<T>) {
    try {
      return csv::parse_double(v, where);
    } catch (const DataError&) {
      throw ConfigError(where + ": expected a number, got '" + v + "'");
    }
  } else {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError(where + ": expected a non-negative integer, got '" + v + "'");
    try {
      return static_cast<T>(std::stoull(v));
    } catch (const std::exception&) {
      throw ConfigError(where + ": integer out of range '" + v + "'");
    }
  }
}

inline std::vector<baselines::DrawdownBand> parse_bands(const std::string& s) {
  std::vector<baselines::DrawdownBand> bands;
  for (const auto& item : csv::split(s, ',')) {
    const auto parts = csv::split(item, ':');
    if (parts.size() != 2) throw ConfigError("strategies.minimum_drawdown: expected age:rate pairs");
    bands.push_back({static_cast<int>(convert<unsigned>("strategies", "minimum_drawdown", parts[0])),
                     convert<double>("strategies", "minimum_drawdown", parts[1])});
  }
  return bands;
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in, const std::string& base_dir, const std::string& name = "config") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(name + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig c;
  c.base_dir = base_dir;

  using Setter = std::function<void(const std::string&)>;
  std::map<std::string, std::map<std::string, Setter>> keys;
  auto num = [](auto& field, const char* section, const char* key) {
    return Setter([&field, section, key](const std::string& v) {
      field = detail::convert<std::decay_t<decltype(field)>>(section, key, v);
    });
  };
#define DECUM_KEY(section, key, field) keys[section][key] = num(field, section, key)
  DECUM_KEY("household", "age", c.age);
  keys["household"]["gender"] = [&c](const std::string& v) { c.gender = mortality::parse_gender(csv::trim(v)); };
  DECUM_KEY("household", "initial_wealth", c.initial_wealth);
  DECUM_KEY("household", "horizon", c.horizon);
  DECUM_KEY("utility", "rho", c.utility.rho);
  DECUM_KEY("utility", "phi", c.utility.phi);
  DECUM_KEY("utility", "floor_epsilon", c.utility.floor_epsilon);
  DECUM_KEY("pension", "full_pension", c.pension.full_pension);
  DECUM_KEY("pension", "asset_free_area", c.pension.asset_free_area);
  DECUM_KEY("pension", "asset_taper", c.pension.asset_taper);
  DECUM_KEY("pension", "income_free_area", c.pension.income_free_area);
  DECUM_KEY("pension", "deeming_threshold", c.pension.deeming_threshold);
  DECUM_KEY("pension", "deeming_rate_low", c.pension.deeming_rate_low);
  DECUM_KEY("pension", "deeming_rate_high", c.pension.deeming_rate_high);
  DECUM_KEY("pension", "income_taper", c.pension.income_taper);
  DECUM_KEY("pension", "fortnights_per_year", c.pension.fortnights_per_year);
  DECUM_KEY("account", "omega", c.account.omega);
  DECUM_KEY("account", "admin_fee", c.account.admin_fee);
  DECUM_KEY("account", "indirect_cost_ratio", c.account.indirect_cost_ratio);
  DECUM_KEY("account", "investment_fee", c.account.investment_fee);
  keys["data"]["history"] = [&c, base_dir](const std::string& v) { c.history_file = detail::resolve(base_dir, csv::trim(v)); };
  keys["data"]["life_table"] = [&c, base_dir](const std::string& v) {
    c.life_table_file = detail::resolve(base_dir, csv::trim(v));
  };
  keys["data"]["esg_params"] = [&c, base_dir](const std::string& v) {
    c.esg_params_file = detail::resolve(base_dir, csv::trim(v));
  };
  DECUM_KEY("data", "base_lag", c.base_lag);
  DECUM_KEY("training", "paths", c.paths);
  DECUM_KEY("training", "iterations", c.iterations);
  DECUM_KEY("training", "batch_size", c.batch_size);
  DECUM_KEY("training", "seed", c.seed);
  DECUM_KEY("training", "k1", c.shape.k1);
  DECUM_KEY("training", "k2", c.shape.k2);
  DECUM_KEY("training", "k3", c.shape.k3);
  DECUM_KEY("training", "learning_rate", c.adam.alpha);
  DECUM_KEY("training", "beta1", c.adam.beta1);
  DECUM_KEY("training", "beta2", c.adam.beta2);
  DECUM_KEY("training", "eps_hat", c.adam.eps_hat);
  DECUM_KEY("training", "clip_norm", c.clip_norm);
  DECUM_KEY("training", "checkpoint_every", c.checkpoint_every);
  DECUM_KEY("training", "chunk_size", c.chunk_size);
  DECUM_KEY("evaluation", "test_paths", c.test_paths);
  DECUM_KEY("evaluation", "test_seed", c.test_seed);
  keys["evaluation"]["strategies"] = [&c](const std::string& v) {
    c.strategies.clear();
    for (const auto& s : csv::split(v, ','))
      if (!s.empty()) c.strategies.push_back(baselines::parse_strategy(s));
  };
  DECUM_KEY("evaluation", "kde_points", c.kde_points);
  keys["strategies"]["minimum_drawdown"] = [&c](const std::string& v) {
    c.strategy_params.minimum_drawdown = detail::parse_bands(v);
  };
  DECUM_KEY("strategies", "four_percent_rate", c.strategy_params.four_percent_rate);
  DECUM_KEY("strategies", "rot_bonus", c.strategy_params.rot_bonus);
  DECUM_KEY("strategies", "rot_band_low", c.strategy_params.rot_band_low);
  DECUM_KEY("strategies", "rot_band_high", c.strategy_params.rot_band_high);
  DECUM_KEY("strategies", "modest", c.strategy_params.modest);
  DECUM_KEY("strategies", "comfortable", c.strategy_params.comfortable);
  DECUM_KEY("strategies", "luxury", c.strategy_params.luxury);
  DECUM_KEY("run", "threads", c.threads);
#undef DECUM_KEY

  for (const auto& [section, body] : tree) {
    const auto s = keys.find(section);
    if (s == keys.end()) {
      if (!body.data().empty()) throw ConfigError(name + ": key '" + section + "' outside any section");
      throw ConfigError(name + ": unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      const auto k = s->second.find(key);
      if (k == s->second.end()) throw ConfigError(name + ": unknown key '" + key + "' in [" + section + "]");
      k->second(value.data());
    }
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  const auto dir = std::filesystem::absolute(path).parent_path().string();
  return parse_config(in, dir, path);
}

// Canonical INI text of every setting (the provenance echo written next to outputs).
inline std::string echo(const RunConfig& c) {
  std::ostringstream o;
  auto f = [](double v) { return csv::fmt(v); };
  o << "[household]\nage = " << c.age << "\ngender = " << mortality::to_string(c.gender)
    << "\ninitial_wealth = " << f(c.initial_wealth) << "\nhorizon = " << c.horizon << "\n\n";
  o << "[utility]\nrho = " << f(c.utility.rho) << "\nphi = " << f(c.utility.phi)
    << "\nfloor_epsilon = " << f(c.utility.floor_epsilon) << "\n\n";
  const auto& p = c.pension;
  o << "[pension]\nfull_pension = " << f(p.full_pension) << "\nasset_free_area = " << f(p.asset_free_area)
    << "\nasset_taper = " << f(p.asset_taper) << "\nincome_free_area = " << f(p.income_free_area)
    << "\ndeeming_threshold = " << f(p.deeming_threshold) << "\ndeeming_rate_low = " << f(p.deeming_rate_low)
    << "\ndeeming_rate_high = " << f(p.deeming_rate_high) << "\nincome_taper = " << f(p.income_taper)
    << "\nfortnights_per_year = " << f(p.fortnights_per_year) << "\n\n";
  const auto& a = c.account;
  o << "[account]\nomega = " << f(a.omega) << "\nadmin_fee = " << f(a.admin_fee)
    << "\nindirect_cost_ratio = " << f(a.indirect_cost_ratio) << "\ninvestment_fee = " << f(a.investment_fee)
    << "\n\n";
  o << "[data]\nhistory = " << c.history_file << "\nlife_table = " << c.life_table_file
    << "\nesg_params = " << c.esg_params_file << "\nbase_lag = " << f(c.base_lag) << "\n\n";
  o << "[training]\npaths = " << c.paths << "\niterations = " << c.iterations << "\nbatch_size = " << c.batch_size
    << "\nseed = " << c.seed << "\nk1 = " << c.shape.k1 << "\nk2 = " << c.shape.k2 << "\nk3 = " << c.shape.k3
    << "\nlearning_rate = " << f(c.adam.alpha) << "\nbeta1 = " << f(c.adam.beta1) << "\nbeta2 = " << f(c.adam.beta2)
    << "\neps_hat = " << f(c.adam.eps_hat) << "\nclip_norm = " << f(c.clip_norm) << "\ncheckpoint_every = " << c.checkpoint_every
    << "\nchunk_size = " << c.chunk_size << "\n\n";
  o << "[evaluation]\ntest_paths = " << c.test_paths << "\ntest_seed = " << c.test_seed << "\nstrategies = ";
  for (std::size_t i = 0; i < c.strategies.size(); ++i) o << (i ? "," : "") << baselines::to_string(c.strategies[i]);
  o << "\nkde_points = " << c.kde_points << "\n\n";
  const auto& s = c.strategy_params;
  o << "[strategies]\nminimum_drawdown = ";
  for (std::size_t i = 0; i < s.minimum_drawdown.size(); ++i)
    o << (i ? "," : "") << s.minimum_drawdown[i].from_age << ':' << f(s.minimum_drawdown[i].rate);
  o << "\nfour_percent_rate = " << f(s.four_percent_rate) << "\nrot_bonus = " << f(s.rot_bonus)
    << "\nrot_band_low = " << f(s.rot_band_low) << "\nrot_band_high = " << f(s.rot_band_high)
    << "\nmodest = " << f(s.modest) << "\ncomfortable = " << f(s.comfortable) << "\nluxury = " << f(s.luxury)
    << "\n\n";
  o << "[run]\nthreads = " << c.threads << "\n";
  return o.str();
}

// FNV-1a over the settings that determine a trained policy (everything
// except evaluation and run sections).
inline std::uint64_t training_hash(const RunConfig& c) {
  RunConfig t = c;
  t.test_paths = 1;
  t.test_seed = 0;
  t.kde_points = 0;
  t.strategies.clear();
  t.strategy_params = {};
  t.threads = 1;
  const std::string text = echo(t);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Short scenario tag used in median-path file names, e.g. rho5_phi0.5_w500000_male.
inline std::string scenario_tag(const RunConfig& c) {
  // Whole-dollar wealth is written without an exponent (w500000, not w5e+05).
  const double w = c.initial_wealth;
  const std::string wealth =
      w == std::floor(w) && std::abs(w) < 1e15 ? std::to_string(static_cast<long long>(w)) : csv::fmt(w);
  return "rho" + csv::fmt(c.utility.rho) + "_phi" + csv::fmt(c.utility.phi) + "_w" + wealth +
         "_" + mortality::to_string(c.gender);
}

inline esg::EsgParams esg_params(const RunConfig& c) {
  return c.esg_params_file.empty() ? esg::EsgParams::preset() : esg::read_params_file(c.esg_params_file);
}

inline esg::EconState initial_state(const RunConfig& c) {
  return esg::initial_state_from(esg::read_history_file(c.history_file));
}

inline rollout::Model build_model(const RunConfig& c) {
  auto table = mortality::read_life_table_file(c.life_table_file);
  table.base_lag = c.base_lag;
  rollout::Model m;
  m.curve = mortality::survival_curve(table, c.gender, c.age, c.horizon);
  m.utility = c.utility;
  m.pension = c.pension;
  m.account = c.account;
  m.initial_wealth = c.initial_wealth;
  m.validate();
  return m;
}

inline trainer::TrainConfig build_train_config(const RunConfig& c) {
  trainer::TrainConfig t;
  t.model = build_model(c);
  t.esg = esg_params(c);
  t.initial_state = initial_state(c);
  t.paths = c.paths;
  t.iterations = c.iterations;
  t.batch_size = c.batch_size;
  t.seed = c.seed;
  t.shape = c.shape;
  t.adam = c.adam;
  t.clip_norm = c.clip_norm;
  t.checkpoint_every = c.checkpoint_every;
  t.threads = c.threads;
  t.chunk_size = c.chunk_size;
  t.config_hash = training_hash(c);
  return t;
}

// Held-out panel for evaluation, simulated from the test seed.
inline esg::ScenarioPanel test_panel(const RunConfig& c, std::size_t paths) {
  esg::SimulationOptions opts;
  opts.omega = c.account.omega;
  opts.threads = c.threads;
  return esg::simulate(esg_params(c), initial_state(c), paths, std::max(c.horizon, 1), c.test_seed, opts);
}

}  // namespace decum::config
