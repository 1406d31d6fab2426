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

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "fhe_fedsim/metrics.hpp"

namespace {

using namespace fhe_fedsim::metrics;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fhe_fedsim_metrics_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(Stats, QuartilesOfOneToEightUseLinearInterpolation) {
  const Summary s = describe({8, 3, 1, 6, 2, 7, 4, 5});
  EXPECT_EQ(s.count, 8u);
  EXPECT_DOUBLE_EQ(s.q25, 2.75);
  EXPECT_DOUBLE_EQ(s.q50, 4.5);
  EXPECT_DOUBLE_EQ(s.q75, 6.25);
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.max, 8.0);
  EXPECT_DOUBLE_EQ(s.mean, 4.5);
  EXPECT_NEAR(s.std, std::sqrt(6.0), 1e-12);  // sample std of 1..8
}

TEST(Stats, ConstantSeriesHasZeroSpread) {
  const Summary s = describe(std::vector<double>(17, 3.25));
  EXPECT_DOUBLE_EQ(s.mean, 3.25);
  EXPECT_DOUBLE_EQ(s.min, 3.25);
  EXPECT_DOUBLE_EQ(s.max, 3.25);
  EXPECT_DOUBLE_EQ(s.q50, 3.25);
  EXPECT_DOUBLE_EQ(s.std, 0.0);
}

TEST(Stats, SingleValueAndEmpty) {
  const Summary one = describe({2.0});
  EXPECT_DOUBLE_EQ(one.q25, 2.0);
  EXPECT_DOUBLE_EQ(one.std, 0.0);
  EXPECT_EQ(describe({}).count, 0u);
}

TEST(Stats, QuantileEndpoints) {
  const std::vector<double> v = {1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.1), 1.4);
}

TEST(Csv, NumbersUseSixSignificantDigits) {
  EXPECT_EQ(format_number(3.14159265), "3.14159");
  EXPECT_EQ(format_number(1234567.0), "1.23457e+06");
  EXPECT_EQ(format_number(std::optional<double>{}), "");
  EXPECT_EQ(format_number(std::nan("")), "nan");
}

TEST(Csv, QuotingFollowsRfc4180) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_line({"a", "b\nc"}), "a,\"b\nc\"\r\n");
}

TEST(Csv, WriteReadRoundtrip) {
  const auto p = scratch("roundtrip.csv");
  CsvWriter w(p, {"x", "y"});
  w.row({"1,5", "q\"uote"});
  w.row({"", "3"});
  w.close();
  const auto rows = read_csv(p);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "1,5");
  EXPECT_EQ(rows[1][1], "q\"uote");
  EXPECT_EQ(rows[2][0], "");
}

TEST(Csv, RowWidthMustMatchHeader) {
  CsvWriter w(scratch("width.csv"), {"a", "b"});
  EXPECT_THROW(w.row({"1"}), fhe_fedsim::StructuralError);
}

// Snapshot of the per-round schema. Any edit to the column set or order
// must update this list deliberately.
TEST(Records, RoundSchemaSnapshot) {
  const std::vector<std::string> expected = {
      "trainable_parameters", "total_training_time_s", "server_round_time_s",
      "client_round_time_s", "round", "aggregation_time_s", "encryption_time_s",
      "decryption_time_s", "central_accuracy_pct", "central_loss",
      "aggregated_accuracy_pct", "aggregated_recall", "aggregated_precision",
      "aggregated_f1", "aggregated_loss", "server_vms_mb", "server_rss_mb",
      "server_cpu_pct", "client_vms_mb", "client_rss_mb", "client_cpu_pct",
      "total_bytes_received", "total_bytes_sent", "bytes_sent_round",
      "bytes_received_round"};
  EXPECT_EQ(round_columns(), expected);
  const std::set<std::string> unique(expected.begin(), expected.end());
  EXPECT_EQ(unique.size(), expected.size());
  EXPECT_EQ(round_row(RoundRecord{}).size(), expected.size());
}

TEST(Records, EmptyRunWritesHeadersOnly) {
  const auto rounds = scratch("rounds_empty.csv");
  const auto res = scratch("resources_empty.csv");
  const auto sum = scratch("summary_empty.csv");
  write_rounds_csv(rounds, {});
  write_resources_csv(res, {});
  write_summary_csv(sum, {});
  EXPECT_EQ(read_csv(rounds).size(), 1u);
  EXPECT_EQ(read_csv(res).size(), 1u);
  EXPECT_EQ(slurp(rounds), csv_line(round_columns()));
  // Summary lists every metric with a zero count.
  EXPECT_EQ(read_csv(sum).size(), round_columns().size() + 1);
}

TEST(Records, RowFormatting) {
  RoundRecord r;
  r.round = 3;
  r.trainable_parameters = 2068;
  r.client_round_times_s = {1.0, 3.0};
  r.aggregated_accuracy = 0.725;
  r.bytes_sent_round = 8272;
  const auto row = round_row(r);
  const auto& cols = round_columns();
  std::map<std::string, std::string> by_name;
  for (std::size_t i = 0; i < cols.size(); ++i) by_name[cols[i]] = row[i];
  EXPECT_EQ(by_name["round"], "3");
  EXPECT_EQ(by_name["client_round_time_s"], "2");
  EXPECT_EQ(by_name["aggregated_accuracy_pct"], "72.5");
  EXPECT_EQ(by_name["central_accuracy_pct"], "");
  EXPECT_EQ(by_name["encryption_time_s"], "");
  EXPECT_EQ(by_name["bytes_sent_round"], "8272");
}

TEST(Records, SummaryPoolsRows) {
  std::vector<RoundRecord> rounds(8);
  for (std::size_t i = 0; i < 8; ++i) rounds[i].round = i + 1;
  const auto p = scratch("summary.csv");
  write_summary_csv(p, round_rows(rounds));
  const auto rows = read_csv(p);
  EXPECT_EQ(rows[0], summary_columns());
  bool found = false;
  for (const auto& row : rows) {
    if (row[0] != "round") continue;
    found = true;
    EXPECT_EQ(row[1], "8");
    EXPECT_EQ(row[5], "2.75");
    EXPECT_EQ(row[6], "4.5");
    EXPECT_EQ(row[7], "6.25");
  }
  EXPECT_TRUE(found);
}

TEST(Records, AttachResourcesUsesWindowPeakAndMeanCpu) {
  std::vector<ResourceSample> s = {
      {0.5, "central", 10.0, 100.0, 20.0}, {0.5, "client0", 10.0, 100.0, 80.0},
      {1.0, "central", 12.0, 110.0, 40.0}, {1.0, "client0", 12.0, 110.0, 60.0},
      {1.5, "central", 11.0, 105.0, 0.0},
  };
  RoundRecord r;
  r.window_start_s = 0.4;
  r.window_end_s = 1.1;
  attach_resources(r, s);
  EXPECT_DOUBLE_EQ(*r.server_rss_mb, 12.0);
  EXPECT_DOUBLE_EQ(*r.server_vms_mb, 110.0);
  EXPECT_DOUBLE_EQ(*r.server_cpu_percent, 30.0);
  EXPECT_DOUBLE_EQ(*r.client_cpu_percent, 70.0);

  RoundRecord shorter;  // falls between samples
  shorter.window_start_s = 1.2;
  shorter.window_end_s = 1.3;
  attach_resources(shorter, s);
  EXPECT_DOUBLE_EQ(*shorter.server_rss_mb, 12.0);

  RoundRecord early;  // before any sample
  early.window_end_s = 0.1;
  attach_resources(early, s);
  EXPECT_FALSE(early.server_rss_mb.has_value());
}

TEST(Resources, ProcessMemoryIsNonzero) {
  const auto m = process_memory();
  ASSERT_TRUE(m.has_value());
  EXPECT_GT(m->rss_mb, 0.0);
  EXPECT_GE(m->vms_mb, m->rss_mb);
}

TEST(Resources, RejectsNonPositivePeriod) {
  EXPECT_THROW(ResourceSampler(0.0), fhe_fedsim::ConfigError);
}

// Period 0.5 s over a 10 s run gives 19 to 21 samples per role.
TEST(Resources, SamplerCadence) {
  ResourceSampler sampler(0.5);
  sampler.register_current_thread("central");
  std::thread client([&] {
    sampler.register_current_thread("client0");
    std::this_thread::sleep_for(std::chrono::milliseconds(10050));
    sampler.unregister_current_thread();
  });
  sampler.start();
  std::this_thread::sleep_for(std::chrono::milliseconds(10000));
  sampler.stop();
  client.join();
  std::map<std::string, int> per_role;
  for (const auto& s : sampler.samples()) {
    ++per_role[s.role];
    ASSERT_TRUE(s.rss_mb.has_value());
    EXPECT_GT(*s.rss_mb, 0.0);
    if (s.cpu_percent) {
      EXPECT_GE(*s.cpu_percent, 0.0);
    }
  }
  for (const char* role : {"central", "client0"}) {
    EXPECT_GE(per_role[role], 19) << role;
    EXPECT_LE(per_role[role], 21) << role;
  }
}

TEST(Resources, BusyThreadShowsCpu) {
  ResourceSampler sampler(0.1);
  sampler.register_current_thread("central");
  sampler.start();
  const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(500);
  volatile double sink = 0;
  while (std::chrono::steady_clock::now() < until) sink = sink + 1.0;
  sampler.stop();
  double peak = 0;
  for (const auto& s : sampler.samples()) peak = std::max(peak, s.cpu_percent.value_or(0.0));
  EXPECT_GT(peak, 30.0);
}

}  // namespace
