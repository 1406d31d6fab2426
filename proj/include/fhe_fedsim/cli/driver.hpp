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
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fhe_fedsim/cli/config.hpp"
#include "fhe_fedsim/common/access_audit.hpp"
#include "fhe_fedsim/fed/experiment.hpp"
#include "fhe_fedsim/metrics/csv.hpp"
#include "fhe_fedsim/metrics/records.hpp"

namespace fhe_fedsim::cli {

namespace fs = std::filesystem;

inline fs::path run_dir(const fs::path& out, const fed::RunConfig& c) {
  return out / c.arch / mode_name(c.encrypted) / std::to_string(c.seed);
}

inline void write_json(const fs::path& path, const Json& j) {
  std::ofstream f(path);
  f << j.dump(2) << '\n';
  if (!f) throw Error("write failed: " + path.string());
}

inline Json run_report(const fed::RunLog& log) {
  Json acc = Json::object();
  for (std::size_t r = 0; r < audit::kRoleCount; ++r)
    acc[std::string(audit::role_name(static_cast<audit::Role>(r)))] = log.secret_key_accesses[r];
  bool central = false;
  for (const auto& r : log.rounds) central = central || r.central_accuracy.has_value();
  return Json{{"arch", log.config.arch},
              {"mode", mode_name(log.config.encrypted)},
              {"seed", log.config.seed},
              {"rounds", log.rounds.size()},
              {"trainable_parameters", log.trainable_parameters},
              {"wall_time_s", log.wall_time_s},
              {"final_message_bytes", log.final_message.size()},
              {"central_evaluation", central},
              {"secret_key_accesses", acc}};
}

inline const std::vector<std::string>& grid_columns() {
  static const std::vector<std::string> cols = {
      "arch", "mode", "seed", "rounds", "trainable_parameters",
      "final_aggregated_accuracy_pct", "final_central_accuracy_pct", "mean_aggregation_time_s",
      "mean_bytes_sent_round", "mean_bytes_received_round", "peak_server_rss_mb",
      "central_secret_key_accesses", "wall_time_s"};
  return cols;
}

inline std::vector<std::string> grid_row(const fed::RunLog& log) {
  using metrics::format_number;
  const auto& rs = log.rounds;
  double agg = 0, sent = 0, recv = 0;
  std::optional<double> rss;
  for (const auto& r : rs) {
    agg += r.aggregation_time_s;
    sent += static_cast<double>(r.bytes_sent_round);
    recv += static_cast<double>(r.bytes_received_round);
    if (r.server_rss_mb) rss = std::max(rss.value_or(0.0), *r.server_rss_mb);
  }
  const double n = static_cast<double>(std::max<std::size_t>(rs.size(), 1));
  const auto& last = rs.back();
  return {log.config.arch,
          mode_name(log.config.encrypted),
          std::to_string(log.config.seed),
          std::to_string(rs.size()),
          std::to_string(log.trainable_parameters),
          format_number(last.aggregated_accuracy * 100.0),
          format_number(metrics::percent(last.central_accuracy)),
          format_number(agg / n),
          format_number(sent / n),
          format_number(recv / n),
          format_number(rss),
          std::to_string(log.accesses(audit::Role::central)),
          format_number(log.wall_time_s)};
}

// Runs one cell and writes its directory. Returns the run log.
inline fed::RunLog run_cell(const fed::RunConfig& c, const fs::path& out) {
  const auto dir = run_dir(out, c);
  fs::create_directories(dir);
  write_json(dir / "config.json", run_json(c, out));
  auto log = fed::run_experiment(c);
  metrics::write_rounds_csv(dir / "rounds.csv", log.rounds);
  metrics::write_resources_csv(dir / "resources.csv", log.samples);
  metrics::write_summary_csv(dir / "summary.csv", metrics::round_rows(log.rounds));
  write_json(dir / "run.json", run_report(log));
  return log;
}

// Every cell in order, then per-cell pooled summaries and grid.csv.
inline void run_grid(const ExperimentConfig& cfg, std::ostream& progress) {
  std::map<std::pair<std::string, bool>, std::vector<std::vector<std::string>>> pooled;
  std::vector<std::vector<std::string>> grid;
  for (const auto& c : cfg.cells()) {
    const std::string cell =
        c.arch + "/" + mode_name(c.encrypted) + "/" + std::to_string(c.seed);
    fed::RunLog log;
    try {
      log = run_cell(c, cfg.out);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("run " + cell + " failed: " + e.what());
    }
    auto& rows = pooled[{c.arch, c.encrypted}];
    for (auto& r : metrics::round_rows(log.rounds)) rows.push_back(std::move(r));
    grid.push_back(grid_row(log));
    progress << cell << ": " << log.rounds.size() << " rounds, aggregated accuracy "
             << metrics::format_number(log.rounds.back().aggregated_accuracy * 100.0) << "%, "
             << metrics::format_number(log.wall_time_s) << " s\n";
  }
  for (const auto& [key, rows] : pooled) {
    metrics::write_summary_csv(cfg.out / key.first / mode_name(key.second) / "summary.csv", rows);
  }
  metrics::CsvWriter w(cfg.out / "grid.csv", grid_columns());
  for (const auto& r : grid) w.row(r);
  w.close();
}

// Command-line entry point. Exit codes: 0 success, 1 runtime failure,
// 2 invalid configuration.
inline int main_entry(int argc, const char* const* argv) {
  CLI::App app{"Federated learning simulator with CKKS-encrypted FedAvg"};
  app.name("fhe_fedsim");
  std::string config_path, arch, mode, seeds, synthetic, data_dir, out, bits;
  std::size_t clients = 0, rounds = 0, epochs = 0, batch = 0, ckks_n = 0;
  double lr = 0, momentum = 0, fit_fraction = 0, eval_fraction = 0, sample_period = 0;
  int scale_log2 = 0;
  auto* o_config = app.add_option("--config", config_path, "JSON config file; flags override it");
  auto* o_arch = app.add_option("--arch", arch, "Architectures, comma separated, or 'all' [cnn]");
  auto* o_mode = app.add_option("--mode", mode, "plain, fhe or both [both]");
  auto* o_seeds = app.add_option("--seeds", seeds, "Comma separated seeds [0,7,42,420,2025]");
  auto* o_clients = app.add_option("--clients", clients, "Number of clients [8]");
  auto* o_rounds = app.add_option("--rounds", rounds, "Training rounds [10]");
  auto* o_epochs = app.add_option("--epochs", epochs, "Local epochs per round [3]");
  auto* o_batch = app.add_option("--batch", batch, "Minibatch size [32]");
  auto* o_lr = app.add_option("--lr", lr, "SGD learning rate [0.01]");
  auto* o_momentum = app.add_option("--momentum", momentum, "SGD momentum [0.9]");
  auto* o_fit = app.add_option("--fit-fraction", fit_fraction, "Share of clients fitting per round [1]");
  auto* o_eval = app.add_option("--eval-fraction", eval_fraction, "Share of clients evaluating per round [0.5]");
  auto* o_synth = app.add_option("--synthetic", synthetic, "Synthetic data COUNTxSIZE or COUNT [2000x32]");
  auto* o_data = app.add_option("--data-dir", data_dir, "Image folder with one subfolder per class");
  auto* o_out = app.add_option("--out", out, "Output directory [$FHE_FEDSIM_OUT or ./runs]");
  auto* o_n = app.add_option("--ckks-n", ckks_n, "CKKS polynomial degree [8192]");
  auto* o_bits = app.add_option("--ckks-bits", bits, "CKKS prime widths [60,40,40,60]");
  auto* o_scale = app.add_option("--ckks-scale-log2", scale_log2, "log2 of the CKKS scale [40]");
  auto* o_period = app.add_option("--sample-period", sample_period, "Resource sampling period in s [0.5]");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  ExperimentConfig cfg;
  try {
    cfg.out = default_out();
    if (*o_config) cfg = load_json_file(cfg, config_path);
    auto& b = cfg.base;
    if (*o_arch) cfg.archs = parse_archs(arch);
    if (*o_mode) cfg.mode = mode;
    if (*o_seeds) cfg.seeds = parse_seeds(seeds);
    if (*o_clients) b.clients = clients;
    if (*o_rounds) b.rounds = rounds;
    if (*o_epochs) b.epochs = epochs;
    if (*o_batch) b.batch = batch;
    if (*o_lr) b.lr = lr;
    if (*o_momentum) b.momentum = momentum;
    if (*o_fit) b.fit_fraction = fit_fraction;
    if (*o_eval) b.eval_fraction = eval_fraction;
    if (*o_synth) parse_synthetic(synthetic, b);
    if (*o_data) b.data_dir = data_dir;
    if (*o_out) cfg.out = out;
    if (*o_n) b.ckks.poly_degree = ckks_n;
    if (*o_bits) b.ckks.bit_sizes = parse_bits(bits);
    if (*o_scale) b.ckks.scale_log2 = scale_log2;
    if (*o_period) b.sample_period = sample_period;
    cfg.validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    run_grid(cfg, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace fhe_fedsim::cli
