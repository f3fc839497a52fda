// Copyright 2026 The Shapval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the shapval binary end to end and checks exit codes and file contracts.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gtest/gtest.h"
#include "json.hpp"
#include "test_util.h"

namespace shapval {
namespace {

namespace fs = std::filesystem;

int RunCli(const std::string& args, std::string* out = nullptr) {
  const auto log = fs::temp_directory_path() / ("shapval_cli_" + std::to_string(::getpid()));
  const std::string cmd = std::string(SHAPVAL_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (out) {
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    *out = ss.str();
  }
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string FirstLine(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

nlohmann::json SmallConfig() {
  return {{"seed", 3},
          {"dataset",
           {{"generator",
             {{"classes", 3},
              {"per_class", 200},
              {"dim", 4},
              {"image_shape", {2, 2, 1}},
              {"sep", 2.0}}}}},
          {"splits", {{"train", 150}, {"validation", 100}, {"test", 100}, {"shadow", 150}}},
          {"model", {{"epochs", 3}, {"hidden_width", 8}}},
          {"valuation", {{"bins", 5}, {"utility_seeds", 2}}},
          {"mia", {{"challenges", 100}}},
          {"steal", {{"budgets", {10}}, {"seeds", {0, 1}}}},
          {"backdoor", {{"budgets", {0, 10}}, {"seeds", {0}}, {"fractions", {0.5}},
                        {"fraction_seeds", 2}}},
          {"duplicate", {{"targets", 5}, {"copies", 2}}},
          {"augment", {{"count", 10}}}};
}

fs::path WriteConfig(const fs::path& dir, const nlohmann::json& j) {
  const auto p = dir / "c.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testing::TempDir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    config_ = WriteConfig(dir_, SmallConfig());
  }
  std::string Base() const { return "--config " + config_.string(); }
  fs::path dir_, config_;
};

TEST_F(CliTest, ValueWritesImportanceAndResolvedConfig) {
  const auto out = dir_ / "r";
  ASSERT_EQ(RunCli("value " + Base() + " --out " + out.string()), 0);
  EXPECT_EQ(FirstLine(out / "importance.csv"), "id,value");
  EXPECT_EQ(FirstLine(out / "loss_bins.csv"), "bin,count,mean_importance,loss_sum");
  EXPECT_EQ(FirstLine(out / "utility.csv"), "seed,selection,accuracy");
  auto resolved = nlohmann::json::parse(Slurp(out / "config.resolved.json"));
  EXPECT_EQ(resolved["seed"], 3);
  EXPECT_FALSE(resolved.contains("threads"));
  EXPECT_TRUE(fs::exists(out / "run.log"));
}

TEST_F(CliTest, ResolvedConfigReproducesTheRun) {
  const auto a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(RunCli("value " + Base() + " --seed 11 --out " + a.string()), 0);
  ASSERT_EQ(RunCli("value --config " + (a / "config.resolved.json").string() + " --out " +
                b.string()),
            0);
  EXPECT_EQ(Slurp(a / "importance.csv"), Slurp(b / "importance.csv"));
  EXPECT_EQ(Slurp(a / "config.resolved.json"), Slurp(b / "config.resolved.json"));
}

TEST_F(CliTest, FlagsOverrideConfig) {
  const auto out = dir_ / "r";
  ASSERT_EQ(RunCli("value " + Base() + " --k 2 --bins 0 --out " + out.string()), 0);
  auto resolved = nlohmann::json::parse(Slurp(out / "config.resolved.json"));
  EXPECT_EQ(resolved["valuation"]["k"], 2);
  EXPECT_FALSE(fs::exists(out / "loss_bins.csv"));
}

TEST_F(CliTest, OracleCheckPrintsMaxDifference) {
  std::string text;
  ASSERT_EQ(RunCli("oracle-check --n 8 --k 2 --seeds 50 --out " + (dir_ / "o").string(), &text), 0);
  EXPECT_NE(text.find("max_abs_diff"), std::string::npos);
  auto j = nlohmann::json::parse(Slurp(dir_ / "o" / "oracle.json"));
  EXPECT_EQ(j["instances"], 50);
  EXPECT_LE(j["max_abs_diff"].get<double>(), 1e-9);
}

TEST_F(CliTest, OracleCheckFailsAboveTolerance) {
  EXPECT_EQ(RunCli("oracle-check --n 8 --k 2 --seeds 5 --tolerance -1 --out " +
                (dir_ / "o").string()),
            1);
}

TEST_F(CliTest, StratifiedMiaWritesFiveReportsAndTrend) {
  const auto out = dir_ / "m";
  ASSERT_EQ(RunCli("mia " + Base() + " --stratify 5 --out " + out.string()), 0);
  for (int s = 1; s <= 5; ++s) {
    const auto sd = out / "confidence" / ("stratum_" + std::to_string(s));
    EXPECT_TRUE(fs::exists(sd / "summary.json")) << sd;
    EXPECT_EQ(FirstLine(sd / "scores.csv"), "id,score,is_member,importance_bin");
  }
  EXPECT_EQ(FirstLine(out / "confidence" / "trend.csv").rfind("quintile,adv", 0), 0u);
  EXPECT_TRUE(fs::exists(out / "confidence" / "roc_log.csv"));
}

TEST_F(CliTest, ReportRecomputesFromScores) {
  const auto m = dir_ / "m", r = dir_ / "r";
  ASSERT_EQ(RunCli("mia " + Base() + " --out " + m.string()), 0);
  ASSERT_EQ(RunCli("report --scores " + (m / "confidence" / "scores.csv").string() + " --out " +
                r.string()),
            0);
  auto mj = nlohmann::json::parse(Slurp(m / "confidence" / "summary.json"));
  auto rj = nlohmann::json::parse(Slurp(r / "summary.json"));
  EXPECT_DOUBLE_EQ(mj["auc"].get<double>(), rj["auc"].get<double>());
  EXPECT_EQ(FirstLine(r / "roc.csv"), "fpr,tpr");
}

TEST_F(CliTest, EverySubcommandRuns) {
  for (std::string cmd : {"steal", "backdoor", "onion", "duplicate", "augment", "shadow"}) {
    const auto out = dir_ / cmd;
    std::string text;
    EXPECT_EQ(RunCli(cmd + " " + Base() + " --out " + out.string(), &text), 0) << cmd << text;
    EXPECT_TRUE(fs::exists(out / "config.resolved.json")) << cmd;
  }
  EXPECT_EQ(FirstLine(dir_ / "steal" / "steal.csv"),
            "budget,selection,seed,accuracy,query_class_entropy");
  EXPECT_EQ(FirstLine(dir_ / "backdoor" / "backdoor.csv"), "budget,selection,seed,asr,clean_acc");
  EXPECT_EQ(FirstLine(dir_ / "backdoor" / "fraction.csv"), "fraction,seed,pearson,spearman");
  EXPECT_EQ(FirstLine(dir_ / "onion" / "onion_top.csv"), "id,old,new,delta,group");
  EXPECT_TRUE(fs::exists(dir_ / "duplicate" / "duplicate.json"));
  EXPECT_TRUE(fs::exists(dir_ / "augment" / "augment.json"));
  EXPECT_EQ(FirstLine(dir_ / "shadow" / "shadow.csv"), "id,full,shadow");
}

TEST_F(CliTest, ThreadCountDoesNotChangePayloads) {
  const auto a = dir_ / "t1", b = dir_ / "t4";
  ASSERT_EQ(RunCli("mia " + Base() + " --stratify 2 --threads 1 --out " + a.string()), 0);
  ASSERT_EQ(RunCli("mia " + Base() + " --stratify 2 --threads 4 --out " + b.string()), 0);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().filename() == "run.log") continue;
    const auto rel = fs::relative(e.path(), a);
    EXPECT_EQ(Slurp(e.path()), Slurp(b / rel)) << rel;
  }
}

TEST_F(CliTest, SwitchesAndCommaLists) {
  const auto out = dir_ / "s";
  ASSERT_EQ(RunCli("mia " + Base() + " --calimem --metrics confidence,neg_entropy --out " +
                   out.string()),
            0);
  EXPECT_TRUE(fs::exists(out / "neg_entropy" / "calimem.csv"));
  auto j = nlohmann::json::parse(Slurp(out / "config.resolved.json"));
  EXPECT_TRUE(j["mia"]["calimem"].get<bool>());
  EXPECT_EQ(j["mia"]["metrics"].size(), 2u);
  const auto st = dir_ / "st";
  ASSERT_EQ(RunCli("steal " + Base() + " --cross-distribution --budgets 5,10 --out " +
                   st.string()),
            0);
  EXPECT_TRUE(fs::exists(st / "steal_cross.csv"));
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
  EXPECT_EQ(RunCli("value --bogus-flag"), 2);
  EXPECT_EQ(RunCli(""), 2);
  EXPECT_EQ(RunCli("value --config /nonexistent/c.json --out " + (dir_ / "x").string()), 2);
  auto bad = SmallConfig();
  bad["valuation"]["kk"] = 1;
  const auto p = WriteConfig(dir_, bad);
  EXPECT_EQ(RunCli("value --config " + p.string() + " --out " + (dir_ / "x").string()), 2);
  EXPECT_EQ(RunCli("value " + Base() + " --k 0 --out " + (dir_ / "x").string()), 2);
  EXPECT_EQ(RunCli("mia " + Base() + " --metrics loss --out " + (dir_ / "x").string()), 2);
}

TEST_F(CliTest, RuntimeFailuresExitOne) {
  auto cfg = SmallConfig();
  cfg["dataset"]["manifest"] = "missing/manifest.json";
  const auto p = WriteConfig(dir_, cfg);
  EXPECT_EQ(RunCli("value --config " + p.string() + " --out " + (dir_ / "x").string()), 1);
  EXPECT_EQ(RunCli("report --scores " + (dir_ / "none.csv").string() + " --out " +
                (dir_ / "y").string()),
            1);
}

TEST_F(CliTest, HelpExitsZero) { EXPECT_EQ(RunCli("--help"), 0); }

}  // namespace
}  // namespace shapval
