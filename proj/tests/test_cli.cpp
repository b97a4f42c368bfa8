#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "decum/csv.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "decum_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(DECUM_CLI) + " " + args + " > " + (kWork / "stdout.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    std::ofstream cfg(kWork / "small.ini");
    cfg << "[household]\nhorizon = 5\n"
        << "[data]\nhistory = " << DECUM_DATA_DIR << "/historical_au_1992_2020.csv\nlife_table = " << DECUM_DATA_DIR
        << "/life_table_au_2015_17.csv\n"
        << "[training]\npaths = 64\niterations = 4\nbatch_size = 32\nseed = 5\ncheckpoint_every = 2\n"
        << "[evaluation]\ntest_paths = 40\ntest_seed = 6\nkde_points = 32\n";
  }
  static std::string config() { return "--config " + (kWork / "small.ini").string(); }
};

}  // namespace

TEST_F(Cli, Calibrate) {
  const auto out = kWork / "calib";
  ASSERT_EQ(run("calibrate --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "esg_params.txt"));
  EXPECT_EQ(count_lines(out / "residual_correlation.csv"), 8u);
  EXPECT_GT(count_lines(out / "residuals.csv"), 20u);
}

TEST_F(Cli, CalibrateMissingColumnIsDataError) {
  std::ofstream bad(kWork / "bad_history.csv");
  bad << "year,cpi,s,E,N,B,O\n2019,1,1,1,1,1,1\n2020,1,1,1,1,1,1\n";
  bad.close();
  EXPECT_EQ(run("calibrate --history " + (kWork / "bad_history.csv").string() + " --out " +
                (kWork / "calib_bad").string()),
            3);
  EXPECT_NE(slurp(kWork / "stdout.txt").find("HPI"), std::string::npos);
}

TEST_F(Cli, SimulateIsDeterministic) {
  const auto a = kWork / "panel_a.csv", b = kWork / "panel_b.csv";
  ASSERT_EQ(run("simulate " + config() + " --paths 7 --horizon 4 --seed 3 --out " + a.string()), 0);
  ASSERT_EQ(run("simulate " + config() + " --paths 7 --horizon 4 --seed 3 --out " + b.string()), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(count_lines(a), 1u + 7 * 5);
  EXPECT_TRUE(fs::exists(a.string() + ".config.ini"));
}

TEST_F(Cli, TrainEvaluateDemo) {
  const auto t1 = kWork / "train1", t2 = kWork / "train2";
  ASSERT_EQ(run("train " + config() + " --out " + t1.string()), 0);
  ASSERT_EQ(run("train " + config() + " --out " + t2.string()), 0);
  EXPECT_EQ(slurp(t1 / "policy.txt"), slurp(t2 / "policy.txt"));
  for (int it : {0, 2, 4}) EXPECT_TRUE(fs::exists(t1 / "checkpoints" / ("checkpoint_" + std::to_string(it) + ".txt")));
  EXPECT_EQ(count_lines(t1 / "training_report.csv"), 5u);
  EXPECT_TRUE(fs::exists(t1 / "config.ini"));

  const auto e1 = kWork / "eval1", e2 = kWork / "eval2";
  ASSERT_EQ(run("evaluate " + config() + " --checkpoint " + (t1 / "checkpoints").string() + " --out " + e1.string()),
            0);
  ASSERT_EQ(run("evaluate " + config() + " --checkpoint " + (t1 / "checkpoints").string() + " --out " + e2.string()),
            0);
  for (const char* f : {"utilities.csv", "outperformance.csv", "kde_minimum.csv", "kde_luxury.csv",
                        "medians_rho5_phi0.5_w500000_male.csv", "mean_utilities.csv", "config.ini"}) {
    EXPECT_TRUE(fs::exists(e1 / f)) << f;
    EXPECT_EQ(slurp(e1 / f), slurp(e2 / f)) << f;
  }
  EXPECT_EQ(count_lines(e1 / "utilities.csv"), 1u + 40 * 7);
  EXPECT_EQ(count_lines(e1 / "outperformance.csv"), 1u + 3 * 6);
  EXPECT_EQ(count_lines(e1 / "medians_rho5_phi0.5_w500000_male.csv"), 1u + 6);

  const auto d1 = kWork / "demo1.csv", d2 = kWork / "demo2.csv";
  ASSERT_EQ(run("demo-path " + config() + " --checkpoint " + (t1 / "policy.txt").string() + " --seed 11 --out " +
                d1.string()),
            0);
  ASSERT_EQ(run("demo-path " + config() + " --checkpoint " + (t1 / "policy.txt").string() + " --seed 11 --out " +
                d2.string()),
            0);
  EXPECT_EQ(slurp(d1), slurp(d2));
  std::ifstream in(d1);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "age,q,R,consumption_real,wealth_real,pension_real");
  int rows = 0;
  while (std::getline(in, line)) {
    const auto f = decum::csv::split(line, ',');
    ASSERT_EQ(f.size(), 6u);
    const double c = std::stod(f[3]), w = std::stod(f[4]), a = std::stod(f[5]);
    EXPECT_GT(c, 0.0);
    EXPECT_LE(c, (w + a) * (1 + 1e-12));
    ++rows;
  }
  EXPECT_EQ(rows, 6);

  ASSERT_EQ(run("demo-path " + config() + " --strategy luxury --out " + (kWork / "demo_lux.csv").string()), 0);
  EXPECT_EQ(run("demo-path " + config() + " --strategy annuity --out " + (kWork / "demo_x.csv").string()), 2);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("train --config /nonexistent.ini"), 2);
  std::ofstream bad(kWork / "bad.ini");
  bad << "[household]\nage = old\n";
  bad.close();
  EXPECT_EQ(run("train --config " + (kWork / "bad.ini").string() + " --out " + (kWork / "t_bad").string()), 2);
  EXPECT_EQ(run("evaluate " + config() + " --checkpoint /nonexistent/ckpt.txt --out " + (kWork / "e_bad").string()),
            5);
  std::ofstream corrupt(kWork / "corrupt.txt");
  corrupt << "decum-policy-checkpoint 1\nwidths x\n";
  corrupt.close();
  EXPECT_EQ(run("evaluate " + config() + " --checkpoint " + (kWork / "corrupt.txt").string() + " --out " +
                (kWork / "e_corrupt").string()),
            3);
  std::ofstream badpaths(kWork / "oversized.ini");
  badpaths << "[household]\nhorizon = 80\n";
  badpaths.close();
  EXPECT_EQ(run("simulate --config " + (kWork / "oversized.ini").string() + " --paths 2 --out " +
                (kWork / "x.csv").string()),
            0);
  EXPECT_EQ(run("train --config " + (kWork / "oversized.ini").string() + " --iterations 0 --out " +
                (kWork / "t_over").string()),
            3);
}
