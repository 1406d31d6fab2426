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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/fed/experiment.hpp"
#include "fhe_fedsim/nn/model.hpp"

namespace fhe_fedsim::cli {

using Json = nlohmann::json;

inline constexpr std::string_view kOutEnv = "FHE_FEDSIM_OUT";
inline constexpr std::string_view kDefaultOut = "runs";

// A grid of runs: every architecture, every requested mode, every seed,
// sharing one set of round, data and CKKS settings.
struct ExperimentConfig {
  std::vector<std::string> archs = {"cnn"};
  std::string mode = "both";  // plain | fhe | both
  std::vector<std::uint64_t> seeds = {0, 7, 42, 420, 2025};
  fed::RunConfig base;
  std::filesystem::path out;

  std::vector<bool> modes() const {
    if (mode == "plain") return {false};
    if (mode == "fhe") return {true};
    return {false, true};
  }

  // Cells in execution order: architecture, then mode, then seed.
  std::vector<fed::RunConfig> cells() const {
    std::vector<fed::RunConfig> out_cells;
    for (const auto& arch : archs) {
      for (bool enc : modes()) {
        for (auto seed : seeds) {
          auto c = base;
          c.arch = arch;
          c.encrypted = enc;
          c.seed = seed;
          out_cells.push_back(std::move(c));
        }
      }
    }
    return out_cells;
  }

  void validate() const {
    if (archs.empty()) throw ConfigError("arch", "no architecture selected");
    for (const auto& a : archs)
      if (!nn::is_architecture(a)) throw ConfigError("arch", "unknown architecture '" + a + "'");
    if (mode != "plain" && mode != "fhe" && mode != "both")
      throw ConfigError("mode", "expected plain, fhe or both, got '" + mode + "'");
    if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
    if (out.empty()) throw ConfigError("out", "output directory is empty");
    if (!base.data_dir.empty() && !std::filesystem::is_directory(base.data_dir))
      throw ConfigError("data_dir", "not a directory: " + base.data_dir);
    for (const auto& c : cells()) c.validate();
  }
};

inline std::string mode_name(bool encrypted) { return encrypted ? "fhe" : "plain"; }

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::uint64_t parse_unsigned(const std::string& field, const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(field, "expected a non-negative integer, got '" + s + "'");
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigError(field, "value out of range: '" + s + "'");
  }
}

inline std::vector<std::string> parse_archs(std::string_view s) {
  if (s == "all") {
    const auto& ids = nn::architectures();
    return {ids.begin(), ids.end()};
  }
  return split_list(s);
}

inline std::vector<std::uint64_t> parse_seeds(std::string_view s) {
  std::vector<std::uint64_t> out;
  for (const auto& t : split_list(s)) out.push_back(parse_unsigned("seeds", t));
  return out;
}

inline std::vector<int> parse_bits(std::string_view s) {
  std::vector<int> out;
  for (const auto& t : split_list(s)) {
    const auto v = parse_unsigned("ckks.bit_sizes", t);
    if (v > 62) throw ConfigError("ckks.bit_sizes", "prime width above 62 bits");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

// "COUNTxSIZE" (count of images and their side length) or just "COUNT".
inline void parse_synthetic(std::string_view s, fed::RunConfig& c) {
  const auto x = s.find('x');
  if (x == std::string_view::npos) {
    c.synthetic_count = parse_unsigned("synthetic", std::string(s));
    return;
  }
  c.synthetic_count = parse_unsigned("synthetic", std::string(s.substr(0, x)));
  c.synthetic_size = parse_unsigned("synthetic", std::string(s.substr(x + 1)));
}

namespace detail {

inline std::uint64_t json_unsigned(const Json& v, const std::string& field) {
  if (!v.is_number_unsigned()) throw ConfigError(field, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline double json_number(const Json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field, "expected a number");
  return v.get<double>();
}

inline std::string json_string(const Json& v, const std::string& field) {
  if (!v.is_string()) throw ConfigError(field, "expected a string");
  return v.get<std::string>();
}

}  // namespace detail

// Applies a JSON object onto `cfg`. Keys mirror the command-line flags
// with underscores; unknown keys are rejected.
inline void apply_json(ExperimentConfig& cfg, const Json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config", "top level must be a JSON object");
  auto& b = cfg.base;
  for (const auto& [key, v] : j.items()) {
    if (key == "arch") {
      if (v.is_array()) {
        cfg.archs.clear();
        for (const auto& a : v) cfg.archs.push_back(json_string(a, "arch"));
      } else {
        cfg.archs = parse_archs(json_string(v, "arch"));
      }
    } else if (key == "mode") {
      cfg.mode = json_string(v, "mode");
    } else if (key == "seeds") {
      if (v.is_array()) {
        cfg.seeds.clear();
        for (const auto& s : v) cfg.seeds.push_back(json_unsigned(s, "seeds"));
      } else {
        cfg.seeds = parse_seeds(json_string(v, "seeds"));
      }
    } else if (key == "clients") {
      b.clients = json_unsigned(v, key);
    } else if (key == "rounds") {
      b.rounds = json_unsigned(v, key);
    } else if (key == "epochs") {
      b.epochs = json_unsigned(v, key);
    } else if (key == "batch") {
      b.batch = json_unsigned(v, key);
    } else if (key == "lr") {
      b.lr = json_number(v, key);
    } else if (key == "momentum") {
      b.momentum = json_number(v, key);
    } else if (key == "fit_fraction") {
      b.fit_fraction = json_number(v, key);
    } else if (key == "eval_fraction") {
      b.eval_fraction = json_number(v, key);
    } else if (key == "sample_period") {
      b.sample_period = json_number(v, key);
    } else if (key == "synthetic") {
      if (v.is_number_unsigned()) {
        b.synthetic_count = v.get<std::uint64_t>();
      } else {
        parse_synthetic(json_string(v, key), b);
      }
    } else if (key == "data_dir") {
      b.data_dir = json_string(v, key);
    } else if (key == "out") {
      cfg.out = json_string(v, key);
    } else if (key == "ckks") {
      if (!v.is_object()) throw ConfigError("ckks", "expected an object");
      for (const auto& [ck, cv] : v.items()) {
        const std::string field = "ckks." + ck;
        if (ck == "poly_degree") {
          b.ckks.poly_degree = json_unsigned(cv, field);
        } else if (ck == "bit_sizes") {
          if (!cv.is_array()) throw ConfigError(field, "expected an array of integers");
          b.ckks.bit_sizes.clear();
          for (const auto& x : cv) {
            const auto bits = json_unsigned(x, field);
            if (bits > 62) throw ConfigError(field, "prime width above 62 bits");
            b.ckks.bit_sizes.push_back(static_cast<int>(bits));
          }
        } else if (ck == "scale_log2") {
          b.ckks.scale_log2 = static_cast<int>(std::min<std::uint64_t>(json_unsigned(cv, field), 1000));
        } else if (ck == "sigma") {
          b.ckks.sigma = json_number(cv, field);
        } else {
          throw ConfigError(field, "unknown key");
        }
      }
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
}

inline ExperimentConfig load_json_file(ExperimentConfig cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  apply_json(cfg, j);
  return cfg;
}

// Fully resolved settings of one run, in the format apply_json reads.
inline Json run_json(const fed::RunConfig& c, const std::filesystem::path& out) {
  return Json{
      {"arch", c.arch},
      {"mode", mode_name(c.encrypted)},
      {"seeds", Json::array({c.seed})},
      {"clients", c.clients},
      {"rounds", c.rounds},
      {"epochs", c.epochs},
      {"batch", c.batch},
      {"lr", c.lr},
      {"momentum", c.momentum},
      {"fit_fraction", c.fit_fraction},
      {"eval_fraction", c.eval_fraction},
      {"synthetic", std::to_string(c.synthetic_count) + "x" + std::to_string(c.synthetic_size)},
      {"data_dir", c.data_dir},
      {"sample_period", c.sample_period},
      {"out", out.string()},
      {"ckks",
       {{"poly_degree", c.ckks.poly_degree},
        {"bit_sizes", c.ckks.bit_sizes},
        {"scale_log2", c.ckks.scale_log2},
        {"sigma", c.ckks.sigma}}},
  };
}

inline std::filesystem::path default_out() {
  if (const char* env = std::getenv(std::string(kOutEnv).c_str()); env && *env) return env;
  return std::string(kDefaultOut);
}

}  // namespace fhe_fedsim::cli
