// Acceptance runner: evaluates every acceptance criterion at its stated
// tolerance and prints one PASS/FAIL line per criterion, followed by the
// measurements behind it. Pass criterion numbers as arguments to run a subset.
// Exit status is non-zero if any selected criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "decum/baselines.hpp"
#include "decum/config.hpp"
#include "decum/esg.hpp"
#include "decum/evaluator.hpp"
#include "decum/mortality.hpp"
#include "decum/policy_net.hpp"
#include "decum/trainer.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace decum;
using baselines::StrategyKind;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { notes.push_back("     " + what); }
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream o;
  o << std::setprecision(precision) << v;
  return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared desk-scale runs (criteria 4-6 reuse them).

config::RunConfig desk_config() { return config::load_config(std::string(DECUM_CONFIG_DIR) + "/desk.ini"); }

struct TrainedRun {
  config::RunConfig config;
  rollout::Model model;
  policy::Checkpoint policy;
  double c0 = 0;  // first-year consumption, real $ (Q_0 = 1)
  double train_seconds = 0;
};

double first_year_consumption(const policy::Checkpoint& ckpt, const rollout::Model& m) {
  const double W0 = m.initial_wealth;
  const double A0 = account::age_pension(W0, 1.0, m.pension);
  return policy::forward(ckpt.params, ckpt.norm, {0.0, W0, 0.0, 1.0}, W0 + A0);
}

class Runs {
 public:
  const TrainedRun& get(const std::string& name, const std::function<void(config::RunConfig&)>& edit) {
    auto it = runs_.find(name);
    if (it != runs_.end()) return it->second;
    auto c = desk_config();
    edit(c);
    c.validate();
    TrainedRun r;
    r.config = c;
    r.model = config::build_model(c);
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = trainer::train(config::build_train_config(c));
    r.train_seconds = seconds_since(t0);
    r.policy = result.final;
    r.c0 = first_year_consumption(r.policy, r.model);
    std::cout << "  [trained " << name << ": " << c.iterations << " iterations in " << fmt(r.train_seconds, 4)
              << " s, c0 = " << fmt(r.c0) << "]\n"
              << std::flush;
    return runs_.emplace(name, std::move(r)).first->second;
  }

  const TrainedRun& base() {
    return get("base", [](config::RunConfig&) {});
  }

  const esg::ScenarioPanel& test_panel() {
    if (!panel_) panel_ = std::make_unique<esg::ScenarioPanel>(config::test_panel(desk_config(), 10000));
    return *panel_;
  }

 private:
  std::map<std::string, TrainedRun> runs_;
  std::unique_ptr<esg::ScenarioPanel> panel_;
};

Runs runs;

// ---------------------------------------------------------------------------

Outcome criterion_calibration() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto fitted = esg::calibrate(esg::read_history_file(oracle::kHistory));
  const double elapsed = seconds_since(t0);
  const auto preset = esg::EsgParams::preset();
  int misses = 0;
  for (const auto& [name, member] : esg::EsgParams::fields()) {
    const bool is_sigma = name.substr(0, 5) == "sigma";
    const double tol = is_sigma ? 0.005 : 0.01;
    const double got = fitted.*member, want = preset.*member;
    const bool ok = std::abs(got - want) <= tol;
    misses += !ok;
    o.check(ok, std::string(name) + ": fitted " + fmt(got, 5) + " vs preset " + fmt(want, 5) + " (tol " +
                    fmt(tol) + ")");
  }
  o.note(std::to_string(misses) + " of 25 coefficients outside tolerance");
  o.check(elapsed < 1.0, "runtime " + fmt(elapsed, 3) + " s < 1 s");
  return o;
}

Outcome criterion_pension_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const account::PensionParams p;
  std::mt19937_64 rng(2020);
  std::uniform_real_distribution<double> wealth(0, 1.5e6), deflator(0.5, 3.0);
  std::size_t mismatches = 0;
  for (int i = 0; i < 100000; ++i) {
    const double W = wealth(rng), Q = deflator(rng);
    mismatches += account::age_pension(W, Q, p) != oracle::pension_by_branches(W, Q, p);
  }
  o.check(mismatches == 0, "exact agreement on 100000 random (W, Q): " + std::to_string(mismatches) + " mismatches");
  o.check(account::age_pension(0.0, 1.0, p) == 24619.0, "full pension 24619 at W = 0");
  for (double Q : {1.0, 1.5, 2.7}) {
    // Smallest wealth with zero pension, by bisection.
    double lo = 0, hi = 2e6 * Q;
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      (account::age_pension(mid, Q, p) > 0 ? lo : hi) = mid;
    }
    o.check(std::abs(hi - 578878 * Q) <= 1.0,
            "pension reaches 0 at W = " + fmt(hi, 10) + " = " + fmt(hi / Q, 10) + " * Q for Q = " + fmt(Q));
  }
  const double elapsed = seconds_since(t0);
  o.check(elapsed < 1.0, "runtime " + fmt(elapsed, 3) + " s < 1 s");
  return o;
}

Outcome criterion_gradient() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto initial = esg::initial_state_from(esg::read_history_file(oracle::kHistory));
  const auto panel = esg::simulate(esg::EsgParams::preset(), initial, 400, 3, 3003);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> wealth(2e4, 1.5e6), u(0, 1);
  int accepted = 0, excluded = 0, unresolved = 0;
  double worst = 0;
  for (std::size_t draw = 0; accepted < 100 && draw < panel.paths(); ++draw) {
    const double rho = u(rng) < 0.5 ? 2.0 : 5.0;
    const double phi = u(rng) < 0.5 ? 0.0 : 0.5;
    const auto g = u(rng) < 0.5 ? mortality::Gender::Male : mortality::Gender::Female;
    const auto model = oracle::household(65 + static_cast<int>(u(rng) * 20), g, 3, wealth(rng), rho, phi);
    const auto params = policy::he_init(policy::MlpShape{}, 500 + draw);
    const policy::Normalization norm{3, 500000};
    const auto r = oracle::check_rollout_gradient(params, norm, model, rollout::path_view(panel, draw));
    if (r.kink_adjacent) {
      ++excluded;
      continue;
    }
    if (r.unresolved) {
      ++unresolved;
      continue;
    }
    ++accepted;
    worst = std::max(worst, r.max_relative_error);
  }
  const double elapsed = seconds_since(t0);
  o.check(accepted == 100, std::to_string(accepted) + " draws checked (" + std::to_string(excluded) +
                               " kink-adjacent and " + std::to_string(unresolved) +
                               " unresolvable draws excluded)");
  o.check(worst < 1e-4, "max relative error over all parameters and draws " + fmt(worst, 3) + " < 1e-4");
  o.check(elapsed < 30, "runtime " + fmt(elapsed, 3) + " s < 30 s");
  return o;
}

Outcome criterion_desk_training() {
  Outcome o;
  const auto& r = runs.base();
  const auto& panel = runs.test_panel();
  const std::vector<StrategyKind> kinds(baselines::kAllStrategies.begin(), baselines::kAllStrategies.end());
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = evaluator::compare(r.policy, kinds, panel, 10000, r.model, r.config.strategy_params);
  const double eval_seconds = seconds_since(t0);
  o.note("M = " + std::to_string(r.config.paths) + ", batch " + std::to_string(r.config.batch_size) + ", " +
         std::to_string(r.config.iterations) + " iterations, rho 5, phi 0.5, male, W0 500000");
  o.check(r.config.paths == 5000 && r.config.batch_size == 512 && r.config.iterations >= 2000 &&
              r.config.utility.rho == 5 && r.config.utility.phi == 0.5 && r.config.initial_wealth == 500000 &&
              r.config.gender == mortality::Gender::Male,
          "desk configuration as stated");
  for (const auto& s : report.strategies)
    o.check(s.outperformance >= 9000, std::string("outperforms ") + baselines::to_string(s.kind) + " on " +
                                          std::to_string(s.outperformance) + " / 10000 held-out paths (>= 9000)");
  const double total = r.train_seconds + eval_seconds;
  o.check(total <= 15 * 60, "training " + fmt(r.train_seconds, 4) + " s + evaluation " + fmt(eval_seconds, 4) +
                                " s <= 15 min");
  return o;
}

Outcome criterion_first_year_consumption() {
  Outcome o;
  const auto& base = runs.base();
  const auto& rho2 = runs.get("rho2", [](config::RunConfig& c) { c.utility.rho = 2; });
  const auto& phi0 = runs.get("phi0", [](config::RunConfig& c) { c.utility.phi = 0; });
  o.check(std::abs(base.c0 - 51917) <= 0.1 * 51917, "base c0 " + fmt(base.c0) + " within 10% of 51917");
  o.check(std::abs(rho2.c0 - 59270) <= 0.1 * 59270, "rho = 2 c0 " + fmt(rho2.c0) + " within 10% of 59270");
  o.check(rho2.c0 > base.c0, "rho = 2 c0 exceeds rho = 5 c0");
  const double gap = phi0.c0 - base.c0;
  o.check(gap > 0 && gap < 2000, "phi = 0 c0 " + fmt(phi0.c0) + " exceeds phi = 0.5 c0 by " + fmt(gap, 4) +
                                     " (required in (0, 2000); reference 336)");
  return o;
}

Outcome criterion_orderings() {
  Outcome o;
  const auto& panel = runs.test_panel();
  const auto& base = runs.base();

  // Mean utility ordering across strategies on the held-out panel.
  const std::vector<StrategyKind> order = {StrategyKind::RuleOfThumb, StrategyKind::Minimum, StrategyKind::Modest,
                                           StrategyKind::FourPercent, StrategyKind::Comfortable, StrategyKind::Luxury};
  const auto report = evaluator::compare(base.policy, order, panel, 10000, base.model, base.config.strategy_params);
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  std::vector<std::pair<std::string, double>> means = {{evaluator::kPolicyName, mean(report.policy_utilities)}};
  for (const auto& s : report.strategies) means.emplace_back(baselines::to_string(s.kind), mean(s.utilities));
  std::string chain;
  bool ordered = true;
  for (std::size_t i = 0; i < means.size(); ++i) {
    chain += (i ? " > " : "") + means[i].first + " (" + fmt(means[i].second, 4) + ")";
    if (i > 0) ordered = ordered && means[i - 1].second > means[i].second;
  }
  o.check(ordered, "mean utility ordering " + chain);

  // Male versus female median consumption for ages 67-84.
  const auto& female = runs.get("female", [](config::RunConfig& c) { c.gender = mortality::Gender::Female; });
  auto medians = [&](const TrainedRun& r) {
    const auto eval = trainer::evaluate_policy(r.policy.params, r.policy.norm, r.model, panel, 10000, true);
    return evaluator::median_paths(eval.trajectories, r.config.age);
  };
  const auto m_med = medians(base), f_med = medians(female);
  int violations = 0;
  std::string first_violation;
  for (std::size_t t = 0; t < m_med.age.size() && m_med.age[t] <= 84; ++t)
    if (m_med.consumption[t] < f_med.consumption[t]) {
      if (violations++ == 0)
        first_violation = " (first at age " + std::to_string(m_med.age[t]) + ": " + fmt(m_med.consumption[t]) +
                          " < " + fmt(f_med.consumption[t]) + ")";
    }
  o.check(violations == 0, "male median consumption >= female for ages 67-84: " + std::to_string(violations) +
                               " violations" + first_violation);

  // Sub-proportional first-year consumption in initial wealth.
  const auto& w300 = runs.get("w300k", [](config::RunConfig& c) { c.initial_wealth = 300000; });
  const auto& w1m = runs.get("w1m", [](config::RunConfig& c) { c.initial_wealth = 1000000; });
  const double r300 = w300.c0 / 300000, r500 = base.c0 / 500000, r1m = w1m.c0 / 1000000;
  o.note("c0: 300k -> " + fmt(w300.c0) + ", 500k -> " + fmt(base.c0) + ", 1M -> " + fmt(w1m.c0));
  o.check(w1m.c0 / w300.c0 < 1e6 / 3e5, "c0(1M) / c0(300k) = " + fmt(w1m.c0 / w300.c0, 4) + " < 10/3");
  o.check(r300 > r500 && r500 > r1m, "c0 / W0 decreasing: " + fmt(r300, 4) + ", " + fmt(r500, 4) + ", " + fmt(r1m, 4));
  return o;
}

// --- criterion 7 helpers

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(DECUM_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome criterion_properties() {
  Outcome o;

  // Scenario generator stationarity: sample means against their stationary
  // values, with standard errors inflated for AR(1) autocorrelation.
  {
    const auto p = esg::EsgParams::preset();
    const std::size_t M = 20000;
    const int T = 41;
    const auto panel = esg::simulate(p, oracle::fixed_point(p), M, T, 777);
    double sq = 0, sS = 0, se = 0;
    for (std::size_t m = 0; m < M; ++m)
      for (int t = 1; t <= T; ++t) {
        sq += panel.state(m, t).q;
        sS += panel.state(m, t).S;
        se += panel.state(m, t).e;
      }
    const double n = static_cast<double>(M * T);
    auto se_of = [n](double sigma, double phi) {
      return sigma / std::sqrt(1 - phi * phi) * std::sqrt((1 + phi) / (1 - phi) / n);
    };
    auto within = [&](const char* name, double mean, double target, double s) {
      o.check(std::abs(mean - target) <= 3 * s, std::string("stationary mean of ") + name + " " + fmt(mean, 6) +
                                                    " vs " + fmt(target, 6) + " (3 se = " + fmt(3 * s, 3) + ")");
    };
    within("q", sq / n, p.mu_q, se_of(p.sigma_q, p.phi_q));
    within("S", sS / n, p.mu_S - p.mu_q, se_of(p.sigma_S, p.phi_S));
    within("e", se / n, p.mu_e, se_of(p.sigma_e, p.phi_e));
  }

  // Survival curves partition unity.
  {
    const auto table = mortality::read_life_table_file(oracle::kLifeTable);
    double worst = 0;
    for (auto g : {mortality::Gender::Male, mortality::Gender::Female})
      for (int x = table.min_age; x <= table.max_age(); ++x) {
        const int T = std::min(41, table.max_age() + 1 - x);
        const auto c = mortality::survival_curve(table, g, x, T);
        double sum = c.tpx[T];
        for (int t = 1; t <= T; ++t) sum += c.dq[t];
        worst = std::max(worst, std::abs(sum - 1));
      }
    o.check(worst <= 1e-12, "survival partition of unity, worst |sum - 1| = " + fmt(worst, 3));
  }

  // Consumption inside [0, W + A] on every step of every rollout (the
  // transition also enforces this and would throw on a breach).
  {
    const auto& base = runs.base();
    const auto& panel = runs.test_panel();
    std::size_t steps = 0, breaches = 0;
    auto audit = [&](const rollout::Trajectory& tr) {
      for (std::size_t t = 0; t < tr.consumption.size(); ++t) {
        ++steps;
        breaches += !(tr.consumption[t] >= 0 && tr.consumption[t] <= (tr.wealth[t] + tr.pension[t]) * (1 + 1e-12) &&
                      tr.wealth[t] >= 0);
      }
    };
    const auto eval = trainer::evaluate_policy(base.policy.params, base.policy.norm, base.model, panel, 10000, true);
    for (const auto& tr : eval.trajectories) audit(tr);
    for (auto k : baselines::kAllStrategies)
      for (std::size_t m = 0; m < 10000; ++m)
        audit(baselines::rollout_deterministic(k, base.model, rollout::path_view(panel, m)));
    o.check(breaches == 0, "consumption constraint on " + std::to_string(steps) + " rollout steps: " +
                               std::to_string(breaches) + " breaches");
  }

  const fs::path work = fs::temp_directory_path() / "decum_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  // Checkpoint round trip reproduces parameters and objectives bit for bit.
  {
    const auto& base = runs.base();
    const auto path = work / "policy.txt";
    policy::save_checkpoint(path.string(), base.policy);
    const auto loaded = policy::load_checkpoint(path.string());
    const auto& panel = runs.test_panel();
    const auto a = trainer::evaluate_policy(base.policy.params, base.policy.norm, base.model, panel, 2000, false);
    const auto b = trainer::evaluate_policy(loaded.params, loaded.norm, base.model, panel, 2000, false);
    o.check(loaded.params == base.policy.params && loaded.norm == base.policy.norm,
            "checkpoint parameters reload bit-exactly");
    o.check(a.utilities == b.utilities, "reloaded checkpoint reproduces 2000 rollout objectives bit-exactly");
  }

  // Seeded determinism of every command: run each twice and compare outputs.
  {
    const auto cfg = work / "small.ini";
    {
      std::ofstream out(cfg);
      out << "[household]\nhorizon = 10\n"
          << "[data]\nhistory = " << oracle::kHistory << "\nlife_table = " << oracle::kLifeTable << "\n"
          << "[training]\npaths = 200\niterations = 6\nbatch_size = 64\nseed = 3\ncheckpoint_every = 3\n"
          << "[evaluation]\ntest_paths = 100\ntest_seed = 4\nkde_points = 64\n";
    }
    const std::string c = " --config " + cfg.string();
    auto twice = [&](const std::string& name, const std::string& args_a, const std::string& args_b,
                     const std::vector<std::pair<fs::path, fs::path>>& files) {
      const int ra = run_cli(args_a, work / (name + "_a.log"));
      const int rb = run_cli(args_b, work / (name + "_b.log"));
      bool same = ra == 0 && rb == 0;
      for (const auto& [fa, fb] : files) same = same && fs::exists(fa) && slurp(fa) == slurp(fb);
      o.check(same, name + " is deterministic (exit codes " + std::to_string(ra) + ", " + std::to_string(rb) + ")");
    };
    twice("calibrate", "calibrate --out " + (work / "cal_a").string(), "calibrate --out " + (work / "cal_b").string(),
          {{work / "cal_a" / "esg_params.txt", work / "cal_b" / "esg_params.txt"},
           {work / "cal_a" / "residuals.csv", work / "cal_b" / "residuals.csv"}});
    twice("simulate", "simulate" + c + " --paths 50 --seed 9 --out " + (work / "sim_a.csv").string(),
          "simulate" + c + " --paths 50 --seed 9 --out " + (work / "sim_b.csv").string(),
          {{work / "sim_a.csv", work / "sim_b.csv"}});
    twice("train", "train" + c + " --out " + (work / "tr_a").string(), "train" + c + " --out " + (work / "tr_b").string(),
          {{work / "tr_a" / "policy.txt", work / "tr_b" / "policy.txt"},
           {work / "tr_a" / "checkpoints" / "checkpoint_3.txt", work / "tr_b" / "checkpoints" / "checkpoint_3.txt"}});
    const std::string ck = " --checkpoint " + (work / "tr_a" / "checkpoints").string();
    twice("evaluate", "evaluate" + c + ck + " --out " + (work / "ev_a").string(),
          "evaluate" + c + ck + " --out " + (work / "ev_b").string(),
          {{work / "ev_a" / "utilities.csv", work / "ev_b" / "utilities.csv"},
           {work / "ev_a" / "outperformance.csv", work / "ev_b" / "outperformance.csv"},
           {work / "ev_a" / "kde_rule_of_thumb.csv", work / "ev_b" / "kde_rule_of_thumb.csv"},
           {work / "ev_a" / "medians_rho5_phi0.5_w500000_male.csv", work / "ev_b" / "medians_rho5_phi0.5_w500000_male.csv"}});
    const std::string pk = " --checkpoint " + (work / "tr_a" / "policy.txt").string();
    twice("demo-path", "demo-path" + c + pk + " --seed 5 --out " + (work / "demo_a.csv").string(),
          "demo-path" + c + pk + " --seed 5 --out " + (work / "demo_b.csv").string(),
          {{work / "demo_a.csv", work / "demo_b.csv"}});
  }
  fs::remove_all(work);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"calibration reproduces the preset coefficients", criterion_calibration},
      {"pension matches the branch-enumeration oracle", criterion_pension_oracle},
      {"rollout gradient matches finite differences (T = 3)", criterion_gradient},
      {"desk-scale policy outperforms all six strategies on >= 90% of paths", criterion_desk_training},
      {"first-year consumption for base, rho = 2 and phi = 0", criterion_first_year_consumption},
      {"utility ordering, gender and wealth orderings", criterion_orderings},
      {"property suites", criterion_properties},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  std::vector<std::string> summary;
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    std::cout << "== criterion " << id << ": " << criteria[i].first << '\n' << std::flush;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    for (const auto& n : o.notes) std::cout << "  " << n << '\n';
    const std::string line = "CRITERION " + std::to_string(id) + ": " + (o.pass ? "PASS" : "FAIL") + "  " +
                             criteria[i].first + " (" + fmt(seconds_since(t0), 4) + " s)";
    std::cout << line << "\n\n" << std::flush;
    summary.push_back(line);
    all = all && o.pass;
  }
  std::cout << "== summary\n";
  for (const auto& s : summary) std::cout << s << '\n';
  return all ? 0 : 1;
}
