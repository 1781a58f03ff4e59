// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/dmdfit.hpp"
#include "koopdmd/formats.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace koopdmd;

namespace {

const std::string kData = KOOPDMD_DATA_DIR;

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + KOOPDMD_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  ktest::TempDir tmp{"cli"};
  std::string out() const { return "--output \"" + tmp.path().string() + "\" "; }
  std::string at(const std::string& name) const { return "\"" + (tmp.path() / name).string() + "\""; }
};

}  // namespace

TEST_F(Cli, GenerateFitRollout) {
  ASSERT_EQ(run("--config " + kData + "/oscillator.json " + out() + "gen-data"), 0);
  ASSERT_EQ(run(out() + "fit " + at("snapshots.kpss")), 0);
  const auto report = nlohmann::json::parse(read_all(tmp.path() / "fit_report.json"));
  EXPECT_EQ(report.at("rank").get<int>(), 2);
  EXPECT_LT(report.at("relative_step_residual").get<double>(), 1e-12);

  ASSERT_EQ(run(out() + "rollout -N 20 --snapshots " + at("snapshots.kpss") + " " + at("model.kpdm")), 0);
  std::ifstream traj(tmp.path() / "trajectory.csv");
  std::string line;
  int lines = 0;
  while (std::getline(traj, line)) ++lines;
  EXPECT_EQ(lines, 22);  // header plus 21 frames
}

TEST_F(Cli, ConfigFitBlockAndOverride) {
  ASSERT_EQ(run("--config " + kData + "/oscillator.json " + out() + "gen-data"), 0);
  ASSERT_EQ(run(out() + "fit --rank 1 " + at("snapshots.kpss")), 0);
  EXPECT_EQ(nlohmann::json::parse(read_all(tmp.path() / "fit_report.json")).at("rank").get<int>(), 1);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("bogus"), 2);
  EXPECT_EQ(run("rollout model.kpdm"), 2);
  EXPECT_EQ(run("fit --rank 3 --energy 0.9 x.kpss"), 2);
}

TEST_F(Cli, DataErrorsExitThree) {
  EXPECT_EQ(run(out() + "fit " + at("missing.kpss")), 3);
  std::ofstream(tmp.path() / "junk.kpdm") << "junk";
  EXPECT_EQ(run(out() + "rollout -N 3 " + at("junk.kpdm")), 3);
  ASSERT_EQ(run("--config " + kData + "/oscillator.json " + out() + "gen-data"), 0);
  EXPECT_EQ(run(out() + "fit --rank 0 " + at("snapshots.kpss")), 3);
  ASSERT_EQ(run(out() + "fit " + at("snapshots.kpss")), 0);
  EXPECT_EQ(run(out() + "rollout -N 3 --snapshots " + at("snapshots.kpss") + " --frame 100000 " + at("model.kpdm")), 3);
  EXPECT_EQ(run(out() + "rollout -N 3 --damping 1.5 --snapshots " + at("snapshots.kpss") + " " + at("model.kpdm")), 3);
}

TEST_F(Cli, NumericalErrorsExitFour) {
  const KoopmanModel base = ktest::oscillator_fit().model;
  Eigen::VectorXcd lambda = base.eigenvalues();
  lambda[1] = 0.0;
  save_model(tmp.path() / "zero.kpdm", base.with_eigenvalues(lambda, base.h()));
  const SnapshotSet s = ktest::oscillator_data();
  save_snapshots(tmp.path() / "s.kpss", s);
  EXPECT_EQ(run(out() + "rollout -N 3 --h-rescale 0.05 --snapshots " + at("s.kpss") + " " + at("zero.kpdm")), 4);
}
