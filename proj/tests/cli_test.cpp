/*
 * Copyright 2026 The fhe-fedsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "fhe_fedsim/cli.hpp"
#include "fhe_fedsim/metrics/csv.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fhe_fedsim::cli;
using fhe_fedsim::ConfigError;

struct Result {
  int code = -1;
  std::string output;
};

// Runs the CLI with stderr folded into stdout.
Result run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + FHE_FEDSIM_CLI_PATH + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (const auto n = fread(buf, 1, sizeof buf, p)) r.output.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "fhe_fedsim_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

const std::string kSmall =
    "--clients 3 --rounds 2 --epochs 1 --batch 8 --synthetic 90x8 --sample-period 0.05";

TEST(Cli, HelpExitsZeroWithUsage) {
  const auto r = run_cli("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("Usage"), std::string::npos);
  EXPECT_NE(r.output.find("--ckks-scale-log2"), std::string::npos);
}

TEST(Cli, InvalidConfigExitsTwoNamingTheField) {
  const auto out = fresh_dir("invalid");
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"--mode sideways", "mode"},
      {"--clients 0", "clients"},
      {"--arch resnet", "arch"},
      {"--eval-fraction 0", "eval_fraction"},
      {"--synthetic 5x8", "synthetic"},
      {"--synthetic 90xq", "synthetic"},
      {"--seeds 1,x", "seeds"},
      {"--ckks-n 1000 --mode fhe", "ckks.poly_degree"},
      {"--data-dir /nonexistent/dir", "data_dir"},
      {"--clients abc", "--clients"},
  };
  for (const auto& [args, field] : cases) {
    const auto r = run_cli(args + " --out " + out.string());
    EXPECT_EQ(r.code, 2) << args << "\n" << r.output;
    EXPECT_NE(r.output.find(field), std::string::npos) << args << "\n" << r.output;
  }
  // Nothing ran, so nothing was written.
  EXPECT_TRUE(fs::is_empty(out));
}

TEST(Cli, GridEnumeratesEveryCell) {
  const auto out = fresh_dir("grid");
  const auto r = run_cli("--arch cnn --mode both --seeds 0,7 " + kSmall + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* mode : {"plain", "fhe"}) {
    for (const char* seed : {"0", "7"}) {
      const auto dir = out / "cnn" / mode / seed;
      for (const char* f : {"rounds.csv", "resources.csv", "summary.csv", "config.json", "run.json"})
        EXPECT_TRUE(fs::exists(dir / f)) << dir / f;
      EXPECT_EQ(fhe_fedsim::metrics::read_csv(dir / "rounds.csv").size(), 3u);
    }
    EXPECT_TRUE(fs::exists(out / "cnn" / mode / "summary.csv"));
  }
  const auto grid = fhe_fedsim::metrics::read_csv(out / "grid.csv");
  ASSERT_EQ(grid.size(), 5u);
  EXPECT_EQ(grid[0], grid_columns());
  std::set<std::string> cells;
  for (std::size_t i = 1; i < grid.size(); ++i) cells.insert(grid[i][1] + "/" + grid[i][2]);
  EXPECT_EQ(cells, (std::set<std::string>{"plain/0", "plain/7", "fhe/0", "fhe/7"}));
}

TEST(Cli, ConfigEchoIsCompleteAndReproducesTheRun) {
  const auto out = fresh_dir("echo");
  ASSERT_EQ(run_cli("--mode plain --seeds 3 " + kSmall + " --out " + out.string()).code, 0);
  const auto cfg_path = out / "cnn" / "plain" / "3" / "config.json";
  std::ifstream in(cfg_path);
  const auto j = Json::parse(in);
  for (const char* key : {"arch", "mode", "seeds", "clients", "rounds", "epochs", "batch", "lr",
                          "momentum", "fit_fraction", "eval_fraction", "synthetic", "data_dir",
                          "sample_period", "out", "ckks"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["ckks"]["poly_degree"], 8192);
  EXPECT_EQ(j["synthetic"], "90x8");

  // Feeding the echo back reproduces the run; timing columns aside, the
  // rounds match exactly.
  const auto again = fresh_dir("echo_again");
  ASSERT_EQ(run_cli("--config " + cfg_path.string() + " --out " + again.string()).code, 0);
  const auto a = fhe_fedsim::metrics::read_csv(out / "cnn" / "plain" / "3" / "rounds.csv");
  const auto b = fhe_fedsim::metrics::read_csv(again / "cnn" / "plain" / "3" / "rounds.csv");
  ASSERT_EQ(a.size(), b.size());
  const std::set<std::string> stable = {"trainable_parameters", "round", "central_accuracy_pct",
                                        "central_loss", "aggregated_accuracy_pct",
                                        "aggregated_recall", "aggregated_precision",
                                        "aggregated_f1", "aggregated_loss", "total_bytes_received",
                                        "total_bytes_sent", "bytes_sent_round",
                                        "bytes_received_round"};
  for (std::size_t row = 1; row < a.size(); ++row)
    for (std::size_t c = 0; c < a[0].size(); ++c)
      if (stable.count(a[0][c])) {
        EXPECT_EQ(a[row][c], b[row][c]) << a[0][c];
      }
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto dir = fresh_dir("override");
  const auto path = dir / "cfg.json";
  std::ofstream(path) << R"({"arch": "all", "mode": "fhe", "seeds": [1, 2], "rounds": 4,
                             "ckks": {"poly_degree": 4096}})";
  ExperimentConfig cfg = load_json_file({}, path);
  EXPECT_EQ(cfg.archs.size(), 6u);
  EXPECT_EQ(cfg.mode, "fhe");
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(cfg.base.rounds, 4u);
  EXPECT_EQ(cfg.base.ckks.poly_degree, 4096u);

  const auto out = dir / "out";
  const auto r = run_cli("--config " + path.string() + " --arch cnn --mode plain --seeds 5 " +
                         kSmall + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(out / "cnn" / "plain" / "5" / "rounds.csv"));
  EXPECT_FALSE(fs::exists(out / "cnn" / "fhe"));
  EXPECT_EQ(fhe_fedsim::metrics::read_csv(out / "cnn" / "plain" / "5" / "rounds.csv").size(), 3u);
}

TEST(Cli, BadConfigFileExitsTwo) {
  const auto dir = fresh_dir("badcfg");
  std::ofstream(dir / "unknown.json") << R"({"epochz": 3})";
  std::ofstream(dir / "type.json") << R"({"clients": "many"})";
  std::ofstream(dir / "syntax.json") << "{";
  for (const auto& [file, field] : std::vector<std::pair<std::string, std::string>>{
           {"unknown.json", "epochz"}, {"type.json", "clients"}, {"syntax.json", "config"}}) {
    const auto r = run_cli("--config " + (dir / file).string() + " --out " + dir.string());
    EXPECT_EQ(r.code, 2) << file;
    EXPECT_NE(r.output.find(field), std::string::npos) << r.output;
  }
  EXPECT_EQ(run_cli("--config " + (dir / "missing.json").string()).code, 2);
}

TEST(Cli, OutputDirectoryFallsBackToEnvironment) {
  const auto out = fresh_dir("env");
  const auto r = run_cli("--mode plain --seeds 0 " + kSmall, "FHE_FEDSIM_OUT=" + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(out / "grid.csv"));
}

TEST(Cli, RuntimeFailureExitsOneNamingTheCell) {
  const auto dir = fresh_dir("runtime");
  std::ofstream(dir / "blocker") << "not a directory";
  const auto r = run_cli("--mode plain --seeds 4 " + kSmall + " --out " + (dir / "blocker").string());
  EXPECT_EQ(r.code, 1) << r.output;
  EXPECT_NE(r.output.find("cnn/plain/4"), std::string::npos) << r.output;
}

TEST(CliConfig, ParsersAndDefaults) {
  fhe_fedsim::fed::RunConfig c;
  parse_synthetic("400x16", c);
  EXPECT_EQ(c.synthetic_count, 400u);
  EXPECT_EQ(c.synthetic_size, 16u);
  parse_synthetic("1000", c);
  EXPECT_EQ(c.synthetic_count, 1000u);
  EXPECT_EQ(c.synthetic_size, 16u);
  EXPECT_EQ(parse_seeds("0,7,42"), (std::vector<std::uint64_t>{0, 7, 42}));
  EXPECT_EQ(parse_bits("60,40,40,60"), (std::vector<int>{60, 40, 40, 60}));
  EXPECT_THROW(parse_bits("60,70"), ConfigError);
  const ExperimentConfig d;
  EXPECT_EQ(d.seeds, (std::vector<std::uint64_t>{0, 7, 42, 420, 2025}));
  EXPECT_EQ(d.base.clients, 8u);
  EXPECT_EQ(d.base.rounds, 10u);
  EXPECT_EQ(d.base.epochs, 3u);
  EXPECT_EQ(d.base.batch, 32u);
  EXPECT_EQ(d.base.synthetic_size, 32u);
  EXPECT_EQ(d.base.fit_fraction, 1.0);
  EXPECT_EQ(d.base.eval_fraction, 0.5);
  EXPECT_EQ(d.base.ckks.poly_degree, 8192u);
  EXPECT_EQ(d.base.ckks.bit_sizes, (std::vector<int>{60, 40, 40, 60}));
  EXPECT_EQ(d.base.ckks.scale_log2, 40);
  EXPECT_EQ(d.base.sample_period, 0.5);
}

}  // namespace
