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

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/metrics/csv.hpp"
#include "fhe_fedsim/metrics/resources.hpp"
#include "fhe_fedsim/metrics/stats.hpp"

namespace fhe_fedsim::metrics {

// One training round. Per-client vectors are indexed by client id; the
// CSV reports their means.
struct RoundRecord {
  std::size_t round = 0;  // 1-based count of completed rounds
  std::size_t trainable_parameters = 0;
  double total_training_time_s = 0.0;  // run start to the end of this round
  double server_round_time_s = 0.0;    // fit broadcast to last update received
  std::vector<double> client_round_times_s;
  double aggregation_time_s = 0.0;
  std::vector<double> encryption_times_s;
  std::vector<double> decryption_times_s;
  std::optional<double> central_accuracy;  // plain runs only, fraction
  std::optional<double> central_loss;
  double aggregated_accuracy = 0.0;  // fraction
  double aggregated_recall = 0.0;
  double aggregated_precision = 0.0;
  double aggregated_f1 = 0.0;
  double aggregated_loss = 0.0;
  std::optional<double> server_vms_mb;
  std::optional<double> server_rss_mb;
  std::optional<double> server_cpu_percent;
  std::optional<double> client_vms_mb;
  std::optional<double> client_rss_mb;
  std::optional<double> client_cpu_percent;
  std::uint64_t total_bytes_received = 0;
  std::uint64_t total_bytes_sent = 0;  // to one client, cumulative
  std::uint64_t bytes_sent_round = 0;  // to one client
  std::uint64_t bytes_received_round = 0;  // from all clients
  // Sampler time window of the round; used to attach resource figures.
  double window_start_s = 0.0;
  double window_end_s = 0.0;
};

// rounds.csv header: one column per tracked metric.
inline const std::vector<std::string>& round_columns() {
  static const std::vector<std::string> cols = {
      "trainable_parameters",   "total_training_time_s", "server_round_time_s",
      "client_round_time_s",    "round",                 "aggregation_time_s",
      "encryption_time_s",      "decryption_time_s",     "central_accuracy_pct",
      "central_loss",           "aggregated_accuracy_pct", "aggregated_recall",
      "aggregated_precision",   "aggregated_f1",         "aggregated_loss",
      "server_vms_mb",          "server_rss_mb",         "server_cpu_pct",
      "client_vms_mb",          "client_rss_mb",         "client_cpu_pct",
      "total_bytes_received",   "total_bytes_sent",      "bytes_sent_round",
      "bytes_received_round"};
  return cols;
}

inline std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline std::optional<double> percent(std::optional<double> fraction) {
  if (!fraction) return std::nullopt;
  return *fraction * 100.0;
}

inline std::vector<std::string> round_row(const RoundRecord& r) {
  const auto n = [](double v) { return format_number(v); };
  const auto o = [](std::optional<double> v) { return format_number(v); };
  const auto i = [](std::uint64_t v) { return std::to_string(v); };
  return {i(r.trainable_parameters), n(r.total_training_time_s), n(r.server_round_time_s),
          o(mean_of(r.client_round_times_s)), i(r.round), n(r.aggregation_time_s),
          o(mean_of(r.encryption_times_s)), o(mean_of(r.decryption_times_s)),
          o(percent(r.central_accuracy)), o(r.central_loss), n(r.aggregated_accuracy * 100.0),
          n(r.aggregated_recall), n(r.aggregated_precision), n(r.aggregated_f1),
          n(r.aggregated_loss), o(r.server_vms_mb), o(r.server_rss_mb), o(r.server_cpu_percent),
          o(r.client_vms_mb), o(r.client_rss_mb), o(r.client_cpu_percent),
          i(r.total_bytes_received), i(r.total_bytes_sent), i(r.bytes_sent_round),
          i(r.bytes_received_round)};
}

// Fills the resource columns of a round from the samples inside its window:
// peak memory and mean CPU, split into the central role and all clients.
// A round shorter than the sampling period borrows the latest sample taken
// before its end.
inline void attach_resources(RoundRecord& r, const std::vector<ResourceSample>& samples) {
  const auto pick = [&](bool central) {
    std::vector<const ResourceSample*> in, before;
    for (const auto& s : samples) {
      if ((s.role == "central") != central) continue;
      if (s.time_s >= r.window_start_s && s.time_s <= r.window_end_s) in.push_back(&s);
      if (s.time_s <= r.window_end_s) before.push_back(&s);
    }
    if (in.empty() && !before.empty()) {
      const double last = before.back()->time_s;
      for (const auto* s : before)
        if (s->time_s == last) in.push_back(s);
    }
    return in;
  };
  const auto fill = [](const std::vector<const ResourceSample*>& in, std::optional<double>& vms,
                       std::optional<double>& rss, std::optional<double>& cpu) {
    std::vector<double> cpus;
    for (const auto* s : in) {
      if (s->vms_mb) vms = std::max(vms.value_or(0.0), *s->vms_mb);
      if (s->rss_mb) rss = std::max(rss.value_or(0.0), *s->rss_mb);
      if (s->cpu_percent) cpus.push_back(*s->cpu_percent);
    }
    cpu = mean_of(cpus);
  };
  fill(pick(true), r.server_vms_mb, r.server_rss_mb, r.server_cpu_percent);
  fill(pick(false), r.client_vms_mb, r.client_rss_mb, r.client_cpu_percent);
}

inline void write_rounds_csv(const std::filesystem::path& path,
                             const std::vector<RoundRecord>& rounds) {
  CsvWriter w(path, round_columns());
  for (const auto& r : rounds) w.row(round_row(r));
  w.close();
}

inline const std::vector<std::string>& resource_columns() {
  static const std::vector<std::string> cols = {"time_s", "role", "rss_mb", "vms_mb",
                                                "cpu_pct"};
  return cols;
}

inline void write_resources_csv(const std::filesystem::path& path,
                                const std::vector<ResourceSample>& samples) {
  CsvWriter w(path, resource_columns());
  for (const auto& s : samples) {
    w.row({format_number(s.time_s), s.role, format_number(s.rss_mb), format_number(s.vms_mb),
           format_number(s.cpu_percent)});
  }
  w.close();
}

inline const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols = {"metric", "count", "mean", "std", "min",
                                                "25%",    "50%",   "75%",  "max"};
  return cols;
}

// Descriptive statistics of every numeric rounds.csv column over the given
// rows (one run, or several runs pooled). Empty cells are skipped.
inline void write_summary_csv(const std::filesystem::path& path,
                              const std::vector<std::vector<std::string>>& round_rows) {
  CsvWriter w(path, summary_columns());
  const auto& cols = round_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    std::vector<double> values;
    for (const auto& row : round_rows) {
      if (c < row.size() && !row[c].empty()) values.push_back(std::stod(row[c]));
    }
    const Summary s = describe(values);
    if (s.count == 0) {
      w.row({cols[c], "0", "", "", "", "", "", "", ""});
      continue;
    }
    w.row({cols[c], std::to_string(s.count), format_number(s.mean), format_number(s.std),
           format_number(s.min), format_number(s.q25), format_number(s.q50),
           format_number(s.q75), format_number(s.max)});
  }
  w.close();
}

inline std::vector<std::vector<std::string>> round_rows(const std::vector<RoundRecord>& rounds) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : rounds) rows.push_back(round_row(r));
  return rows;
}

}  // namespace fhe_fedsim::metrics
