// Command-line entry point: calibrate, simulate, train, evaluate, demo-path.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "decum/baselines.hpp"
#include "decum/config.hpp"
#include "decum/csv.hpp"
#include "decum/error.hpp"
#include "decum/esg.hpp"
#include "decum/evaluator.hpp"
#include "decum/mortality.hpp"
#include "decum/policy_net.hpp"
#include "decum/trainer.hpp"

namespace fs = std::filesystem;
using namespace decum;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
};

config::RunConfig load(const Common& o) {
  config::RunConfig c = o.config_path.empty() ? config::RunConfig{} : config::load_config(o.config_path);
  if (o.threads) c.threads = std::max(1u, *o.threads);
  c.validate();
  return c;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
}

std::string in_dir(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

void write_echo(const std::string& path, const config::RunConfig& c) {
  auto out = csv::open_out(path);
  out << config::echo(c);
}

// A checkpoint file, or every checkpoint_<iter>.txt in a directory (ascending).
std::vector<policy::Checkpoint> load_checkpoints(const std::vector<std::string>& specs) {
  std::vector<policy::Checkpoint> all;
  for (const auto& spec : specs) {
    if (fs::is_directory(spec)) {
      for (const auto& entry : fs::directory_iterator(spec)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("checkpoint_", 0) == 0 && entry.path().extension() == ".txt")
          all.push_back(policy::load_checkpoint(entry.path().string()));
      }
    } else {
      all.push_back(policy::load_checkpoint(spec));
    }
  }
  if (all.empty()) throw IoError("no checkpoints found");
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.iteration < b.iteration; });
  std::vector<policy::Checkpoint> unique;
  for (auto& c : all)
    if (unique.empty() || unique.back().iteration != c.iteration) unique.push_back(std::move(c));
  return unique;
}

int cmd_calibrate(const std::string& history, const std::string& out_dir) {
  const auto series = esg::read_history_file(history);
  const auto params = esg::calibrate(series);
  ensure_dir(out_dir);
  {
    auto out = csv::open_out(in_dir(out_dir, "esg_params.txt"));
    esg::write_params(out, params);
  }
  const auto diag = esg::residual_diagnostics(series, params);
  {
    auto out = csv::open_out(in_dir(out_dir, "residuals.csv"));
    out << "year";
    for (auto n : esg::kEquationNames) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < diag.years.size(); ++i) {
      out << diag.years[i];
      for (std::size_t k = 0; k < 7; ++k) out << ',' << csv::fmt(diag.residuals[k][i]);
      out << '\n';
    }
  }
  {
    auto out = csv::open_out(in_dir(out_dir, "residual_correlation.csv"));
    out << "equation";
    for (auto n : esg::kEquationNames) out << ',' << n;
    out << '\n';
    for (int a = 0; a < 7; ++a) {
      out << esg::kEquationNames[a];
      for (int b = 0; b < 7; ++b) out << ',' << csv::fmt(diag.correlation(a, b));
      out << '\n';
    }
  }
  esg::write_params(std::cout, params);
  return 0;
}

int cmd_simulate(const Common& o, std::size_t paths, std::optional<int> horizon) {
  auto c = load(o);
  const std::uint64_t seed = o.seed.value_or(c.seed);
  esg::SimulationOptions opts;
  opts.omega = c.account.omega;
  opts.threads = c.threads;
  const auto panel =
      esg::simulate(config::esg_params(c), config::initial_state(c), paths, horizon.value_or(c.horizon), seed, opts);
  const std::string path = o.out.empty() ? "panel.csv" : o.out;
  auto out = csv::open_out(path);
  esg::write_panel_csv(out, panel);
  write_echo(path + ".config.ini", c);
  return 0;
}

int cmd_train(const Common& o, std::optional<std::size_t> iterations) {
  auto c = load(o);
  if (o.seed) c.seed = *o.seed;
  if (iterations) c.iterations = *iterations;
  c.validate();
  const std::string dir = o.out.empty() ? "train_out" : o.out;
  ensure_dir(dir);
  write_echo(in_dir(dir, "config.ini"), c);
  auto tc = config::build_train_config(c);
  tc.checkpoint_dir = in_dir(dir, "checkpoints");
  try {
    const auto result = trainer::train(tc, &std::cout);
    policy::save_checkpoint(in_dir(dir, "policy.txt"), result.final);
    auto out = csv::open_out(in_dir(dir, "training_report.csv"));
    trainer::write_report_csv(out, result.report);
  } catch (const trainer::DivergenceError& e) {
    policy::save_checkpoint(in_dir(dir, "policy.txt"), e.checkpoint);
    throw;
  }
  return 0;
}

int cmd_evaluate(const Common& o, const std::vector<std::string>& checkpoint_specs) {
  auto c = load(o);
  if (o.seed) c.test_seed = *o.seed;
  c.validate();
  const std::string dir = o.out.empty() ? "eval_out" : o.out;
  ensure_dir(dir);
  write_echo(in_dir(dir, "config.ini"), c);

  const auto checkpoints = load_checkpoints(checkpoint_specs);
  const auto& last = checkpoints.back();
  if (last.config_hash != config::training_hash(c))
    std::cerr << "warning: checkpoint was trained under a different configuration\n";
  const auto model = config::build_model(c);
  const auto panel = config::test_panel(c, c.test_paths);

  evaluator::check_horizon(last, model);
  auto policy = trainer::evaluate_policy(last.params, last.norm, model, panel, c.test_paths, true, c.threads);
  const auto report = evaluator::compare_utilities(policy.utilities, c.strategies, model, panel, c.strategy_params);
  {
    auto out = csv::open_out(in_dir(dir, "utilities.csv"));
    evaluator::write_utilities_csv(out, report);
  }
  {
    const auto rows = evaluator::outperformance_curve(checkpoints, c.strategies, panel, c.test_paths, model,
                                                      c.strategy_params, c.threads);
    auto out = csv::open_out(in_dir(dir, "outperformance.csv"));
    evaluator::write_outperformance_csv(out, rows);
  }
  for (const auto& s : report.strategies) {
    const auto d = evaluator::difference_density(s.differences, c.kde_points);
    auto out = csv::open_out(in_dir(dir, std::string("kde_") + baselines::to_string(s.kind) + ".csv"));
    if (!d.empty) evaluator::write_density_csv(out, d.log10_density);
    else out << "x,density\n";
    std::cout << baselines::to_string(s.kind) << ": outperformed on " << s.outperformance << " / "
              << c.test_paths << " paths (" << d.non_positive << " non-positive differences)\n";
  }
  {
    const auto mp = evaluator::median_paths(policy.trajectories, c.age);
    auto out = csv::open_out(in_dir(dir, "medians_" + config::scenario_tag(c) + ".csv"));
    evaluator::write_medians_csv(out, mp);
    std::cout << "median first-year consumption: " << mp.consumption.front() << '\n';
  }
  {
    auto out = csv::open_out(in_dir(dir, "mean_utilities.csv"));
    auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    out << "strategy,mean_utility\n" << evaluator::kPolicyName << ',' << csv::fmt(mean(report.policy_utilities)) << '\n';
    for (const auto& s : report.strategies)
      out << baselines::to_string(s.kind) << ',' << csv::fmt(mean(s.utilities)) << '\n';
  }
  return 0;
}

int cmd_demo_path(const Common& o, const std::string& checkpoint, const std::string& strategy) {
  auto c = load(o);
  if (o.seed) c.test_seed = *o.seed;
  const auto model = config::build_model(c);
  const auto panel = config::test_panel(c, 1);
  const auto path = rollout::path_view(panel, 0);

  rollout::Trajectory tr;
  if (strategy.empty() || strategy == evaluator::kPolicyName) {
    if (checkpoint.empty()) throw ConfigError("demo-path: --checkpoint is required for the policy");
    const auto ckpt = policy::load_checkpoint(checkpoint);
    evaluator::check_horizon(ckpt, model);
    tr = trainer::evaluate_policy(ckpt.params, ckpt.norm, model, panel, 1, true, 1).trajectories.front();
  } else {
    tr = baselines::rollout_deterministic(baselines::parse_strategy(strategy), model, path, c.strategy_params);
  }
  const std::string file = o.out.empty() ? "demo_path.csv" : o.out;
  auto out = csv::open_out(file);
  out << "age,q,R,consumption_real,wealth_real,pension_real\n";
  for (int t = 0; t <= model.horizon(); ++t)
    out << model.age(t) << ',' << csv::fmt(panel.state(0, t).q) << ',' << csv::fmt(path.returns[t]) << ','
        << csv::fmt(tr.consumption[t]) << ',' << csv::fmt(tr.wealth[t]) << ',' << csv::fmt(tr.pension[t]) << '\n';
  write_echo(file + ".config.ini", c);
  std::cout << "lifetime utility: " << tr.utility << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retirement drawdown: scenario generation, policy training and evaluation"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) sub->add_option("--config", common.config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Override the command's random seed");
    sub->add_option("--threads", common.threads, "Maximum worker threads");
    sub->add_option("--out", common.out, "Output file or directory");
  };

  std::string history = std::string(DECUM_DATA_DIR) + "/historical_au_1992_2020.csv";
  auto* calibrate = app.add_subcommand("calibrate", "Fit scenario-generator parameters to historical data");
  calibrate->add_option("--history", history, "Historical CSV (year,cpi,s,E,N,B,O,HPI)");
  add_common(calibrate, false);

  std::size_t sim_paths = 1000;
  std::optional<int> sim_horizon;
  auto* simulate = app.add_subcommand("simulate", "Simulate a scenario panel to CSV");
  simulate->add_option("--paths", sim_paths, "Number of paths")->check(CLI::PositiveNumber);
  simulate->add_option("--horizon", sim_horizon, "Years per path (default: household horizon)");
  add_common(simulate);

  std::optional<std::size_t> iterations;
  auto* train = app.add_subcommand("train", "Train the consumption policy");
  train->add_option("--iterations", iterations, "Override training.iterations");
  add_common(train);

  std::vector<std::string> checkpoints;
  auto* evaluate = app.add_subcommand("evaluate", "Compare a trained policy with the deterministic strategies");
  evaluate->add_option("--checkpoint", checkpoints, "Checkpoint file or directory (repeatable)")->required();
  add_common(evaluate);

  std::string demo_checkpoint, demo_strategy;
  auto* demo = app.add_subcommand("demo-path", "Write one simulated path under the policy or a strategy");
  demo->add_option("--checkpoint", demo_checkpoint, "Policy checkpoint");
  demo->add_option("--strategy", demo_strategy, "dnn (default) or one of the deterministic strategies");
  add_common(demo);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::Config);
  }

  try {
    if (*calibrate) return cmd_calibrate(history, common.out.empty() ? "calibration" : common.out);
    if (*simulate) return cmd_simulate(common, sim_paths, sim_horizon);
    if (*train) return cmd_train(common, iterations);
    if (*evaluate) return cmd_evaluate(common, checkpoints);
    if (*demo) return cmd_demo_path(common, demo_checkpoint, demo_strategy);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
