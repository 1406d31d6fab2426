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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Criteria can be selected by number on the command line.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fhe_fedsim/cli.hpp"
#include "fhe_fedsim/fed.hpp"
#include "fhe_fedsim/metrics/csv.hpp"
#include "fhe_fedsim/metrics/records.hpp"
#include "fhe_fedsim/metrics/stats.hpp"
#include "fhe_fedsim/qsim/templates.hpp"

namespace {

namespace fs = std::filesystem;
namespace ckks = fhe_fedsim::ckks;
namespace fed = fhe_fedsim::fed;
namespace metrics = fhe_fedsim::metrics;
namespace nn = fhe_fedsim::nn;
namespace qsim = fhe_fedsim::qsim;
namespace ring = fhe_fedsim::ring;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "failed: ";
      else detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_abs(std::span<const double> a, std::span<const double> b, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

std::vector<double> uniform(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pick(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = pick(rng);
  return v;
}

// 1. Encrypted FedAvg equals plain FedAvg for every architecture.
void keystone(Outcome& out) {
  const ckks::CkksContext ctx;
  ring::Rng rng(101);
  const auto keys = ckks::keygen(ctx, rng);
  std::mt19937_64 prng(102);
  std::uniform_real_distribution<float> weight(-1.0f, 1.0f);
  std::uniform_int_distribution<std::size_t> count(1, 500);
  constexpr int kTrials = 100;
  constexpr int kClients = 20;
  double worst = 0.0;
  int passed = 0;
  int total = 0;
  for (auto arch : nn::architectures()) {
    ring::Rng init(7);
    auto model = nn::build_model<float>(arch, 32, init);
    const auto layout = fed::extract_params(model);
    for (int trial = 0; trial < kTrials; ++trial) {
      std::vector<fed::PlainUpdate> plain;
      std::vector<fed::EncryptedUpdate> enc;
      for (int k = 0; k < kClients; ++k) {
        auto params = layout;
        for (auto& t : params)
          for (auto& v : t.values) v = weight(prng);
        const auto n = count(prng);
        enc.push_back({fed::encrypt_params(ctx, keys.pub, params, rng), n});
        plain.push_back({std::move(params), n});
      }
      const auto expected = fed::fedavg_plain(plain);
      const auto got = fed::decrypt_params(ctx, keys.secret, fed::fedavg_encrypted(ctx, enc));
      double err = 0.0;
      for (std::size_t t = 0; t < got.size(); ++t)
        for (std::size_t i = 0; i < got[t].values.size(); ++i)
          err = std::max(err, std::fabs(static_cast<double>(got[t].values[i]) -
                                        expected[t].values[i]));
      worst = std::max(worst, err);
      ++total;
      if (err < ckks::tolerance::kAggregation) ++passed;
    }
  }
  out.detail << passed << "/" << total << " trials under 1e-4, worst " << worst << "; ";
  out.require(passed == total, "some trials exceeded 1e-4");
}

// 2. Encode, encrypt and homomorphic operations at N=8192, bits {60,40,40,60}, 2^40.
void ckks_suite(Outcome& out) {
  const ckks::CkksContext ctx;
  ring::Rng rng(201);
  const auto keys = ckks::keygen(ctx, rng);
  std::mt19937_64 prng(202);
  const std::size_t slots = ctx.slot_count();
  double encode_err = 0.0, crypt_err = 0.0, add_err = 0.0, mul_err = 0.0;
  constexpr int kVectors = 100;
  for (int i = 0; i < kVectors; ++i) {
    const auto a = uniform(slots, -1.0, 1.0, prng);
    const auto b = uniform(slots, -1.0, 1.0, prng);
    const auto w = uniform(slots, -1.0, 1.0, prng);
    const auto pa = ckks::encode(ctx, a);
    encode_err = std::max(encode_err, max_abs(ckks::decode(ctx, pa), a, slots));

    const auto ca = ckks::encrypt(ctx, pa, keys.pub, rng);
    crypt_err = std::max(crypt_err, max_abs(ckks::decode(ctx, ckks::decrypt(ca, keys.secret)), a, slots));

    const auto cb = ckks::encrypt(ctx, ckks::encode(ctx, b), keys.pub, rng);
    const auto sum = ckks::decode(ctx, ckks::decrypt(ckks::ct_add(ca, cb), keys.secret));
    for (std::size_t j = 0; j < slots; ++j) add_err = std::max(add_err, std::fabs(sum[j] - (a[j] + b[j])));

    const auto prod = ckks::rescale(ckks::ct_mul_plain(ca, ckks::encode(ctx, w)));
    const auto got = ckks::decode(ctx, ckks::decrypt(prod, keys.secret));
    for (std::size_t j = 0; j < slots; ++j) mul_err = std::max(mul_err, std::fabs(got[j] - w[j] * a[j]));
  }
  out.detail << kVectors << " vectors; encode " << encode_err << ", encrypt " << crypt_err << ", add "
             << add_err << ", plain-mul+rescale " << mul_err << "; ";
  out.require(encode_err < ckks::tolerance::kEncodeRoundTrip, "encode roundtrip");
  out.require(crypt_err < ckks::tolerance::kFreshCiphertext, "encrypt roundtrip");
  out.require(add_err < ckks::tolerance::kHomomorphicOp, "addition");
  out.require(mul_err < ckks::tolerance::kHomomorphicOp, "plain multiplication");
}

// Negacyclic product by the double loop with sign flip on wraparound.
std::vector<ring::u64> schoolbook(std::span<const ring::u64> x, std::span<const ring::u64> y, ring::u64 q) {
  const std::size_t n = x.size();
  std::vector<ring::u64> z(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const ring::u64 p = ring::mul_mod(x[i], y[j], q);
      const std::size_t k = i + j;
      if (k < n) z[k] = ring::add_mod(z[k], p, q);
      else z[k - n] = ring::sub_mod(z[k - n], p, q);
    }
  return z;
}

// 3. NTT product against the schoolbook oracle.
void ring_oracle(Outcome& out) {
  ring::Rng rng(301);
  int checked = 0, mismatched = 0;
  for (std::size_t n : {8, 16, 32, 64}) {
    // A small prime and a 60-bit prime, both 1 mod 2N.
    const auto primes = ring::ModulusChain::generate(n, {20, 60}).primes();
    for (int i = 0; i < 100; ++i) {
      const auto a = ring::sample_poly(ring::Distribution::uniform, n, primes, rng);
      const auto b = ring::sample_poly(ring::Distribution::uniform, n, primes, rng);
      const auto c = ring::negacyclic_mul(a, b);
      for (std::size_t k = 0; k < primes.size(); ++k) {
        const auto expect = schoolbook(a.component(k), b.component(k), primes[k]);
        const auto got = c.component(k);
        if (!std::equal(got.begin(), got.end(), expect.begin())) ++mismatched;
      }
      ++checked;
    }
  }
  out.detail << checked << " pairs over N in {8,16,32,64}, two primes each, " << mismatched
             << " mismatches; ";
  out.require(mismatched == 0, "NTT product differs from schoolbook");
}

// Largest |parameter-shift - central difference| over every parameter and input.
double gradient_gap(const qsim::Circuit& c, const std::vector<double>& inputs,
                    const std::vector<double>& params, const std::vector<std::size_t>& readout) {
  const auto jac = qsim::param_shift_grad(c, inputs, params, readout);
  const double h = 1e-5;
  const std::size_t nr = readout.size();
  double gap = 0.0;
  const auto probe = [&](bool is_param, std::size_t j) {
    auto pp = params, pm = params, ip = inputs, im = inputs;
    (is_param ? pp : ip)[j] += h;
    (is_param ? pm : im)[j] -= h;
    const auto fp = qsim::expectations(c, ip, pp, readout);
    const auto fm = qsim::expectations(c, im, pm, readout);
    const auto& d = is_param ? jac.d_params : jac.d_inputs;
    const std::size_t width = is_param ? params.size() : inputs.size();
    for (std::size_t r = 0; r < nr; ++r)
      gap = std::max(gap, std::fabs(d[r * width + j] - (fp[r] - fm[r]) / (2 * h)));
  };
  for (std::size_t j = 0; j < params.size(); ++j) probe(true, j);
  for (std::size_t i = 0; i < inputs.size(); ++i) probe(false, i);
  return gap;
}

// 4. Parameter-shift gradients against central differences, plus norm drift.
void quantum_gradients(Outcome& out) {
  std::mt19937_64 rng(401);
  const double pi = std::numbers::pi;
  struct Case {
    std::string name;
    qsim::Circuit circuit;
    std::vector<std::size_t> readout;
  };
  const std::vector<Case> cases = {
      {"basic_entangler(6,4)", qsim::embed_then(qsim::basic_entangler(6, 4)), qsim::all_wires(6)},
      {"qcnn(21)", qsim::embed_then(qsim::qcnn_circuit(8)), qsim::qcnn_readout_wires(8)}};
  double worst_gap = 0.0, worst_drift = 0.0;
  for (const auto& c : cases) {
    double gap = 0.0;
    for (int i = 0; i < 100; ++i) {
      const auto inputs = uniform(c.circuit.n_inputs(), -pi, pi, rng);
      const auto params = uniform(c.circuit.n_params(), -pi, pi, rng);
      gap = std::max(gap, gradient_gap(c.circuit, inputs, params, c.readout));
      const auto state = c.circuit.run(inputs, params);
      worst_drift = std::max(worst_drift, std::fabs(state.norm_squared() - 1.0));
    }
    out.detail << c.name << " (" << c.circuit.n_params() << " params) gap " << gap << ", ";
    worst_gap = std::max(worst_gap, gap);
  }
  out.detail << "norm drift " << worst_drift << "; ";
  out.require(cases[1].circuit.n_params() == 21, "qcnn parameter count");
  out.require(worst_gap < 1e-6, "gradient gap above 1e-6");
  out.require(worst_drift < 1e-10, "norm drift above 1e-10");
}

// 5. Trainable parameter counts per architecture.
void parameter_counts(Outcome& out) {
  const std::map<std::string, std::size_t> expected = {
      {"cnn", 2068}, {"cnn-qnn", 2112}, {"cnn-qcnn", 2241},
      {"fx", 2052},  {"fx-qnn", 2096},  {"fx-qcnn", 4145}};
  for (auto arch : nn::architectures()) {
    ring::Rng rng(0);
    auto model = nn::build_model<float>(arch, 32, rng);
    const auto got = model.trainable_count();
    out.detail << arch << "=" << got << " ";
    out.require(expected.at(std::string(arch)) == got, std::string(arch) + " count");
  }
  out.detail << "; ";
}

struct Process {
  int code = -1;
  std::string output;
};

Process run_cli(const std::string& args) {
  const std::string cmd = std::string(FHE_FEDSIM_CLI_PATH) + " " + args + " 2>&1";
  Process r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (const auto n = fread(buf, 1, sizeof buf, p)) r.output.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "fhe_fedsim_acceptance" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// grid.csv rows keyed by "arch/mode/seed", each a column-name map.
std::map<std::string, std::map<std::string, std::string>> read_grid(const fs::path& path) {
  const auto rows = metrics::read_csv(path);
  std::map<std::string, std::map<std::string, std::string>> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::map<std::string, std::string> m;
    for (std::size_t c = 0; c < rows[0].size(); ++c) m[rows[0][c]] = rows[r][c];
    out[m["arch"] + "/" + m["mode"] + "/" + m["seed"]] = std::move(m);
  }
  return out;
}

double num(const std::map<std::string, std::string>& row, const std::string& key) {
  return std::stod(row.at(key));
}

// Paired cnn runs shared by criteria 6 and 8. Each mode runs in its own
// process so the process-wide RSS of one cannot leak into the other.
const fs::path& overhead_runs() {
  static const fs::path dir = [] {
    const auto d = scratch("overhead");
    for (const char* mode : {"plain", "fhe"}) {
      const auto r = run_cli(std::string("--arch cnn --mode ") + mode +
                             " --seeds 0 --clients 8 --rounds 10 --out " + (d / mode).string());
      if (r.code != 0) throw std::runtime_error(std::string(mode) + " run failed: " + r.output);
    }
    return d;
  }();
  return dir;
}

// 6. Encryption costs more time, bytes and central memory.
void overhead(Outcome& out) {
  const auto& d = overhead_runs();
  const auto plain = read_grid(d / "plain" / "grid.csv").at("cnn/plain/0");
  const auto fhe = read_grid(d / "fhe" / "grid.csv").at("cnn/fhe/0");
  const double agg = num(fhe, "mean_aggregation_time_s") / num(plain, "mean_aggregation_time_s");
  const double sent = num(fhe, "mean_bytes_sent_round") / num(plain, "mean_bytes_sent_round");
  const double recv = num(fhe, "mean_bytes_received_round") / num(plain, "mean_bytes_received_round");
  const double rss_plain = num(plain, "peak_server_rss_mb");
  const double rss_fhe = num(fhe, "peak_server_rss_mb");
  out.detail << "aggregation x" << agg << ", bytes sent x" << sent << ", bytes received x" << recv
             << ", central peak rss " << rss_fhe << " MB vs " << rss_plain << " MB; ";
  out.require(agg >= 10.0, "aggregation ratio below 10");
  out.require(sent >= 100.0 && recv >= 100.0, "byte ratio below 100");
  out.require(rss_fhe > rss_plain, "central peak rss not larger");
}

// 7. Aggregated accuracy agrees between paired encrypted and plain runs.
void accuracy_parity(Outcome& out) {
  const auto d = scratch("parity");
  const auto r = run_cli("--arch cnn,cnn-qnn --mode both --seeds 0,7,42 --clients 8 --rounds 20 "
                         "--epochs 5 --sample-period 2 --out " + d.string());
  out.require(r.code == 0, "runs failed: " + r.output);
  if (r.code != 0) return;
  const auto grid = read_grid(d / "grid.csv");
  double worst = 0.0;
  for (const char* arch : {"cnn", "cnn-qnn"}) {
    for (const char* seed : {"0", "7", "42"}) {
      const std::string cell = std::string(arch) + "/";
      const double p = num(grid.at(cell + "plain/" + seed), "final_aggregated_accuracy_pct");
      const double f = num(grid.at(cell + "fhe/" + seed), "final_aggregated_accuracy_pct");
      out.detail << arch << "/" << seed << " " << p << " vs " << f << ", ";
      worst = std::max(worst, std::fabs(p - f));
    }
  }
  out.detail << "largest gap " << worst << " points; ";
  out.require(worst <= 2.0, "accuracy gap above 2 points");
}

// 8. The central party never touches the secret key and reports no central accuracy.
void hygiene(Outcome& out) {
  const auto run = overhead_runs() / "fhe" / "cnn" / "fhe" / "0";
  std::ifstream in(run / "run.json");
  const auto j = fhe_fedsim::cli::Json::parse(in);
  const auto central = j["secret_key_accesses"]["central"].get<long long>();
  const auto client = j["secret_key_accesses"]["client"].get<long long>();
  const auto rows = metrics::read_csv(run / "rounds.csv");
  const auto col = std::find(rows[0].begin(), rows[0].end(), "central_accuracy_pct") - rows[0].begin();
  bool empty = true;
  for (std::size_t r = 1; r < rows.size(); ++r) empty = empty && rows[r][col].empty();
  out.detail << "central secret-key accesses " << central << ", client " << client
             << ", central accuracy column empty in " << rows.size() - 1 << " rounds; ";
  out.require(central == 0, "central accessed the secret key");
  out.require(client > 0, "client accesses not instrumented");
  out.require(empty, "central accuracy emitted");
  out.require(!j["central_evaluation"].get<bool>(), "central evaluation flagged");
}

// 9. Every tracked metric appears once; quartiles follow linear interpolation.
void schema(Outcome& out) {
  const std::vector<std::string> tracked = {
      "trainable_parameters", "total_training_time_s", "server_round_time_s",
      "client_round_time_s", "round", "aggregation_time_s", "encryption_time_s",
      "decryption_time_s", "central_accuracy_pct", "central_loss", "aggregated_accuracy_pct",
      "aggregated_recall", "aggregated_precision", "aggregated_f1", "aggregated_loss",
      "server_vms_mb", "server_rss_mb", "server_cpu_pct", "client_vms_mb", "client_rss_mb",
      "client_cpu_pct", "total_bytes_received", "total_bytes_sent", "bytes_sent_round",
      "bytes_received_round"};
  const auto& cols = metrics::round_columns();
  for (const auto& name : tracked)
    out.require(std::count(cols.begin(), cols.end(), name) == 1, name + " not present once");
  out.require(cols.size() == tracked.size(), "unexpected extra columns");
  const auto s = metrics::describe({1, 2, 3, 4, 5, 6, 7, 8});
  const auto c = metrics::describe({3.5, 3.5, 3.5});
  out.detail << cols.size() << " columns; quartiles of 1..8 " << s.q25 << "/" << s.q50 << "/" << s.q75
             << "; ";
  out.require(s.q25 == 2.75 && s.q50 == 4.5 && s.q75 == 6.25, "quartiles of 1..8");
  out.require(s.min == 1 && s.max == 8 && s.mean == 4.5 && std::fabs(s.std - std::sqrt(6.0)) < 1e-12,
              "summary of 1..8");
  out.require(c.mean == 3.5 && c.min == 3.5 && c.max == 3.5 && c.std == 0.0, "constant series");
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<void(Outcome&)> check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "encrypted fedavg equals plain", 300, keystone},
      {2, "ckks micro-suite", 120, ckks_suite},
      {3, "ntt equals schoolbook", 30, ring_oracle},
      {4, "quantum gradients", 120, quantum_gradients},
      {5, "parameter counts", 1, parameter_counts},
      {6, "overhead direction", 1200, overhead},
      {7, "accuracy parity", 1800, accuracy_parity},
      {8, "protocol hygiene", 1200, hygiene},
      {9, "metrics schema", 1, schema},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  bool all_pass = true;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome out;
    const auto t0 = Clock::now();
    try {
      c.check(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double took = seconds_since(t0);
    out.detail << "took " << took << " s of " << c.budget_s << " s";
    out.require(took < c.budget_s, "over time budget");
    all_pass = all_pass && out.pass;
    std::printf("criterion %d (%s): %s: %s\n", c.id, c.name, out.pass ? "PASS" : "FAIL",
                out.detail.str().c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
