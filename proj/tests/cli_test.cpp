/* Copyright 2026 The vidseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "vidseg/cli.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace vidseg {
namespace {

namespace fs = std::filesystem;
using testing::ScratchDir;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::initializer_list<std::string> args) {
  std::vector<std::string> v{"vidseg"};
  v.insert(v.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : v) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

// Emits a small synthetic dataset through the synth subcommand.
struct Dataset {
  ScratchDir dir{"cli"};
  fs::path root;

  explicit Dataset(double noise = 0.0, bool moving = false) : root(dir / "data") {
    const std::string v = moving ? "1" : "0";
    write(dir / "spec.json", R"({"clips":[{"clip_id":"c0","width":24,"height":16,"num_classes":5,)"
                             R"("length":5,"seed":3,"label_noise":)" + std::to_string(noise) +
                             R"(,"labeled_frames":[1,2],"objects":[{"class_id":2,"x":3,"y":3,)"
                             R"("width":6,"height":5,"vx":)" + v + R"(,"vy":0}]}]})");
    const auto r = run({"synth", "--spec", (dir / "spec.json").string(), "--out", root.string()});
    EXPECT_EQ(r.code, 0) << r.err;
  }

  std::string manifest() const { return (root / "manifest.jsonl").string(); }
  std::string preds() const { return (root / "preds").string(); }
  std::string conf() const { return (root / "conf").string(); }
};

TEST(CliTest, HelpExitsZero) {
  EXPECT_EQ(run({"--help"}).code, 0);
  for (const char* sub : {"refine", "eval", "consis", "sweep", "rcs", "synth"}) {
    const auto r = run({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos);
  }
}

TEST(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({"rcs", "--freqs", "0.5", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run({"rcs", "--freqs", "0.5,x"}).code, 2);
  EXPECT_EQ(run({"rcs", "--freqs", "0.5", "--temperature", "0"}).code, 2);
  EXPECT_EQ(run({"eval", "--manifest", "m"}).code, 2);
}

TEST(CliTest, MaxConfidenceWithoutConfidenceDirIsUsageError) {
  Dataset ds;
  const auto r = run({"refine", "--manifest", ds.manifest(), "--pred-dir", ds.preds(),
                      "--strategy", "max_confidence", "--out-dir", (ds.dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--conf-dir"), std::string::npos);
  EXPECT_FALSE(fs::exists(ds.dir / "o"));
}

TEST(CliTest, RefineOracleReportsFullAccuracy) {
  Dataset ds(0.3);
  const auto r = run({"refine", "--manifest", ds.manifest(), "--pred-dir", ds.preds(),
                      "--num-classes", "5", "--strategy", "oracle", "--out-dir",
                      (ds.dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["retained_accuracy"], 100.0);
  EXPECT_EQ(j["pairs_total"], 2);
  EXPECT_EQ(nlohmann::json::parse(slurp(ds.dir / "o" / "report.json")), j);
}

TEST(CliTest, RefineConsistencyOnStaticScene) {
  Dataset ds;
  const auto r = run({"refine", "--manifest", ds.manifest(), "--pred-dir", ds.preds(),
                      "--num-classes", "5", "--strategy", "consistency", "--frame-distance", "1",
                      "--out-dir", (ds.dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["retained_fraction"], 1.0);
}

TEST(CliTest, RefineFailureBudgetExitsOne) {
  Dataset ds;
  write(ds.root / "preds" / "c0_000002.png", "not a png");
  const auto r = run({"refine", "--manifest", ds.manifest(), "--pred-dir", ds.preds(),
                      "--num-classes", "5", "--out-dir", (ds.dir / "o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(nlohmann::json::parse(r.out)["job_failed"], true);
}

TEST(CliTest, EvalPerfectPredictionsCsv) {
  Dataset ds;
  const auto out_file = ds.dir / "r" / "eval.csv";
  const auto r = run({"eval", "--manifest", ds.manifest(), "--pred-dir", ds.preds(),
                      "--num-classes", "5", "--out", out_file.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\nmean,100.00,100.00\n"), std::string::npos) << r.out;
  EXPECT_EQ(slurp(out_file), r.out);
}

TEST(CliTest, EvalMissingPredictionWarnsButSucceeds) {
  Dataset ds;
  fs::remove(ds.root / "preds" / "c0_000001.png");
  const auto r = run({"eval", "--manifest", ds.manifest(), "--pred-dir", ds.preds(),
                      "--num-classes", "5", "--format", "json"});
  EXPECT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["coverage_warning"], true);
  EXPECT_EQ(j["missing"].size(), 1u);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST(CliTest, EvalRestrictsToClassUniverse) {
  Dataset ds;
  const auto r = run({"eval", "--manifest", ds.manifest(), "--pred-dir", ds.preds(),
                      "--num-classes", "5", "--classes", "0,2", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["per_class"].size(), 2u);
  EXPECT_EQ(run({"eval", "--manifest", ds.manifest(), "--pred-dir", ds.preds(),
                 "--num-classes", "5", "--classes", "0,7"}).code,
            2);
}

TEST(CliTest, ConsisMetrics) {
  Dataset ds;
  for (const char* metric : {"predconsis", "warped", "consistency"}) {
    const auto r = run({"consis", "--manifest", ds.manifest(), "--pred-dir", ds.preds(),
                        "--num-classes", "5", "--frame-distance", "1", "--metric", metric,
                        "--format", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["miou"], 100.0) << metric;
    EXPECT_EQ(j["metric"], metric);
  }
}

TEST(CliTest, ConsistencyMetricEqualsRefineThenEval) {
  Dataset ds(0.2, true);
  const auto consis = run({"consis", "--manifest", ds.manifest(), "--pred-dir", ds.preds(),
                           "--num-classes", "5", "--frame-distance", "1", "--metric",
                           "consistency"});
  ASSERT_EQ(consis.code, 0) << consis.err;
  const auto refined = ds.dir / "refined";
  ASSERT_EQ(run({"refine", "--manifest", ds.manifest(), "--pred-dir", ds.preds(),
                 "--num-classes", "5", "--frame-distance", "1", "--out-dir", refined.string()})
                .code,
            0);
  const auto eval = run({"eval", "--manifest", ds.manifest(), "--pred-dir", refined.string(),
                         "--num-classes", "5"});
  ASSERT_EQ(eval.code, 0) << eval.err;
  EXPECT_EQ(consis.out, eval.out);
}

TEST(CliTest, SweepDefaultDistances) {
  Dataset ds;
  const auto r = run({"sweep", "--manifest", ds.manifest(), "--pred-dir", ds.preds(),
                      "--num-classes", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> ks;
  std::getline(lines, line);
  while (std::getline(lines, line)) ks.push_back(line.substr(0, line.find(',')));
  EXPECT_EQ(ks, (std::vector<std::string>{"1", "3", "6", "10"}));
  EXPECT_EQ(run({"sweep", "--manifest", ds.manifest(), "--pred-dir", ds.preds(), "--ks", "1,0"})
                .code,
            2);
}

TEST(CliTest, RcsOutputs) {
  const auto j = nlohmann::json::parse(run({"rcs", "--freqs", "0.9,0.1", "--temperature", "1"}).out);
  EXPECT_NEAR(j["probabilities"][0].get<double>(), 0.3100, 1e-3);
  EXPECT_NEAR(j["probabilities"][1].get<double>(), 0.6900, 1e-3);
  const auto sym = nlohmann::json::parse(run({"rcs", "--freqs", "0.5,0.5"}).out);
  EXPECT_EQ(sym["probabilities"][0], 0.5);
  const auto csv = run({"rcs", "--freqs", "0.9,0.1", "--temperature", "1", "--format", "csv"});
  EXPECT_EQ(csv.out, "class,probability\n0,0.310026\n1,0.689974\n");
}

TEST(CliTest, ConfigFileWithFlagPrecedence) {
  ScratchDir dir("cfg");
  write(dir / "c.json", R"({"freqs":[0.9,0.1],"temperature":1.0,"format":"csv"})");
  const auto from_config = run({"rcs", "--config", (dir / "c.json").string()});
  ASSERT_EQ(from_config.code, 0) << from_config.err;
  EXPECT_EQ(from_config.out, "class,probability\n0,0.310026\n1,0.689974\n");
  const auto overridden =
      run({"rcs", "--config", (dir / "c.json").string(), "--format", "json", "--freqs", "0.5,0.5"});
  ASSERT_EQ(overridden.code, 0) << overridden.err;
  EXPECT_EQ(nlohmann::json::parse(overridden.out)["probabilities"][1], 0.5);
  write(dir / "bad.json", "{oops");
  EXPECT_EQ(run({"rcs", "--config", (dir / "bad.json").string()}).code, 2);
}

TEST(CliTest, SynthIsIdempotent) {
  Dataset a;
  const auto second = a.dir / "again";
  ASSERT_EQ(run({"synth", "--spec", (a.dir / "spec.json").string(), "--out", second.string()}).code, 0);
  for (const auto& e : fs::recursive_directory_iterator(a.root)) {
    if (!e.is_regular_file()) continue;
    EXPECT_EQ(slurp(e.path()), slurp(second / fs::relative(e.path(), a.root)));
  }
  EXPECT_EQ(run({"synth", "--spec", (a.dir / "missing.json").string(), "--out", "x"}).code, 2);
}

}  // namespace
}  // namespace vidseg
