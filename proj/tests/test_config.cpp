#include <sstream>

#include <gtest/gtest.h>

#include "decum/config.hpp"

using namespace decum;
using namespace decum::config;

namespace {

RunConfig parse(const std::string& text, const std::string& base = "/base") {
  std::istringstream in(text);
  return parse_config(in, base);
}

}  // namespace

TEST(ParseConfig, DefaultsWhenEmpty) {
  const auto c = parse("");
  EXPECT_EQ(c.age, 67);
  EXPECT_EQ(c.horizon, 41);
  EXPECT_EQ(c.initial_wealth, 500000.0);
  EXPECT_EQ(c.utility.rho, 5.0);
  EXPECT_EQ(c.batch_size, 512u);
  EXPECT_EQ(c.adam.alpha, 5e-4);
  EXPECT_EQ(c.strategies.size(), 6u);
}

TEST(ParseConfig, ReadsSections) {
  const auto c = parse(
      "[household]\nage = 70\ngender = female\ninitial_wealth = 300000\nhorizon = 30\n"
      "[utility]\nrho = 2\nphi = 0\n"
      "[training]\npaths = 100\nbatch_size = 50\nseed = 9\nk1 = 8\nlearning_rate = 0.001\n"
      "[evaluation]\nstrategies = minimum, luxury\n"
      "[strategies]\nminimum_drawdown = 0:0.03,70:0.08\nmodest = 30000\n"
      "[run]\nthreads = 2\n");
  EXPECT_EQ(c.age, 70);
  EXPECT_EQ(c.gender, mortality::Gender::Female);
  EXPECT_EQ(c.initial_wealth, 300000.0);
  EXPECT_EQ(c.utility.rho, 2.0);
  EXPECT_EQ(c.utility.phi, 0.0);
  EXPECT_EQ(c.paths, 100u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.shape.k1, 8);
  EXPECT_EQ(c.adam.alpha, 0.001);
  EXPECT_EQ(c.strategies, (std::vector<baselines::StrategyKind>{baselines::StrategyKind::Minimum,
                                                                  baselines::StrategyKind::Luxury}));
  ASSERT_EQ(c.strategy_params.minimum_drawdown.size(), 2u);
  EXPECT_EQ(c.strategy_params.minimum_rate(71), 0.08);
  EXPECT_EQ(c.strategy_params.modest, 30000.0);
  EXPECT_EQ(c.threads, 2u);
}

TEST(ParseConfig, RelativePathsResolveAgainstBase) {
  const auto c = parse("[data]\nhistory = ../data/h.csv\nlife_table = /abs/l.csv\n", "/root/cfg");
  EXPECT_EQ(c.history_file, "/root/data/h.csv");
  EXPECT_EQ(c.life_table_file, "/abs/l.csv");
}

TEST(ParseConfig, UnknownKeysAndSectionsRejected) {
  EXPECT_THROW(parse("[household]\nagee = 67\n"), ConfigError);
  EXPECT_THROW(parse("[houshold]\nage = 67\n"), ConfigError);
  EXPECT_THROW(parse("age = 67\n"), ConfigError);
}

TEST(ParseConfig, BadValuesRejected) {
  EXPECT_THROW(parse("[household]\nage = sixty\n"), ConfigError);
  EXPECT_THROW(parse("[training]\npaths = -4\n"), ConfigError);
  EXPECT_THROW(parse("[household]\ngender = x\n"), ConfigError);
  EXPECT_THROW(parse("[utility]\nrho = 1\n"), ConfigError);
  EXPECT_THROW(parse("[evaluation]\nstrategies = annuity\n"), ConfigError);
  EXPECT_THROW(parse("[strategies]\nminimum_drawdown = 65-0.05\n"), ConfigError);
  EXPECT_THROW(parse("[training]\npaths = 10\nbatch_size = 20\n"), ConfigError);
}

TEST(ParseConfig, TestSeedMustDifferFromTrainingSeed) {
  EXPECT_THROW(parse("[training]\nseed = 5\n[evaluation]\ntest_seed = 5\n"), ConfigError);
}

TEST(Echo, RoundTrips) {
  const auto c = parse("[household]\ngender = female\ninitial_wealth = 1000000\n[utility]\nphi = 0.25\n"
                       "[training]\nclip_norm = 0.5\n[evaluation]\nstrategies = modest\n");
  const auto again = parse(echo(c));
  EXPECT_EQ(echo(again), echo(c));
  EXPECT_EQ(training_hash(again), training_hash(c));
}

TEST(TrainingHash, IgnoresEvaluationSettings) {
  const auto a = parse("");
  const auto b = parse("[evaluation]\ntest_paths = 5\ntest_seed = 7\n[run]\nthreads = 4\n");
  const auto c = parse("[utility]\nphi = 0\n");
  EXPECT_EQ(training_hash(a), training_hash(b));
  EXPECT_NE(training_hash(a), training_hash(c));
}

TEST(ScenarioTag, Format) { EXPECT_EQ(scenario_tag(parse("")), "rho5_phi0.5_w500000_male"); }

TEST(BuildModel, BundledDataLoads) {
  const auto c = parse("");
  const auto m = build_model(c);
  EXPECT_EQ(m.horizon(), 41);
  EXPECT_EQ(m.curve.age, 67);
  const auto t = build_train_config(c);
  EXPECT_EQ(t.config_hash, training_hash(c));
  EXPECT_EQ(t.clip_norm, 1.0);
}

TEST(LoadConfig, MissingFile) { EXPECT_THROW(load_config("/nonexistent/run.ini"), IoError); }

TEST(LoadConfig, ShippedDeskConfig) {
  const auto c = load_config(std::string(DECUM_CONFIG_DIR) + "/desk.ini");
  EXPECT_EQ(c.paths, 5000u);
  EXPECT_EQ(c.iterations, 2000u);
  EXPECT_NO_THROW(build_model(c));
}
