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
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "fhe_fedsim/ckks/context.hpp"
#include "fhe_fedsim/ckks/keys.hpp"
#include "fhe_fedsim/common/access_audit.hpp"
#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/fed/aggregate.hpp"
#include "fhe_fedsim/fed/channel.hpp"
#include "fhe_fedsim/fed/messages.hpp"
#include "fhe_fedsim/metrics/records.hpp"
#include "fhe_fedsim/metrics/resources.hpp"
#include "fhe_fedsim/nn/dataset.hpp"
#include "fhe_fedsim/nn/model.hpp"
#include "fhe_fedsim/nn/train.hpp"

namespace fhe_fedsim::fed {

// Smallest shard that still leaves one local test example.
inline constexpr std::size_t kMinShard = 10;

struct RunConfig {
  std::string arch = "cnn";
  bool encrypted = false;
  std::uint64_t seed = 0;
  std::size_t clients = 8;
  std::size_t rounds = 10;
  std::size_t epochs = 3;
  std::size_t batch = 32;
  double lr = 0.01;
  double momentum = 0.9;
  double fit_fraction = 1.0;
  double eval_fraction = 0.5;
  std::size_t synthetic_count = 2000;
  std::size_t synthetic_size = 32;
  std::string data_dir;  // image folders; replaces the synthetic set when set
  ckks::CkksParameters ckks;
  double sample_period = 0.5;

  // Throws ConfigError naming the first invalid field.
  void validate() const {
    if (!nn::is_architecture(arch)) throw ConfigError("arch", "unknown architecture '" + arch + "'");
    if (clients == 0) throw ConfigError("clients", "must be at least 1");
    if (rounds == 0) throw ConfigError("rounds", "must be at least 1");
    if (batch == 0) throw ConfigError("batch", "must be at least 1");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr", "must be a finite value >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum", "must lie in [0, 1)");
    if (!(fit_fraction > 0.0 && fit_fraction <= 1.0))
      throw ConfigError("fit_fraction", "must lie in (0, 1]");
    if (!(eval_fraction > 0.0 && eval_fraction <= 1.0))
      throw ConfigError("eval_fraction", "must lie in (0, 1]");
    if (!(sample_period > 0.0) || !std::isfinite(sample_period))
      throw ConfigError("sample_period", "must be positive");
    if (data_dir.empty()) {
      if (synthetic_size < 8) throw ConfigError("synthetic", "image size must be at least 8");
      if (synthetic_count < kMinShard * clients) {
        throw ConfigError("synthetic", "count " + std::to_string(synthetic_count) +
                                           " leaves fewer than " + std::to_string(kMinShard) +
                                           " samples per client");
      }
    }
    if (encrypted) (void)ckks::CkksContext{ckks};
  }
};

// Generator keyed by the run seed and a path of small integers, so every
// party and round draws from its own stream.
inline std::mt19937_64 derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words = {static_cast<std::uint32_t>(seed),
                                      static_cast<std::uint32_t>(seed >> 32)};
  for (auto p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

// Stream tags for derive_rng.
enum : std::uint64_t {
  kStreamData = 1,
  kStreamHoldout,
  kStreamPartition,
  kStreamInit,
  kStreamKeys,
  kStreamFitSample,
  kStreamEvalSample,
  kStreamTrain,
  kStreamEncrypt,
};

// ceil(fraction * n) distinct clients, uniformly drawn, in index order.
inline std::vector<std::size_t> sample_clients(std::size_t n, double fraction,
                                               std::mt19937_64& rng) {
  const auto k = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::max<std::size_t>(k, 1));
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct ExperimentData {
  nn::DatasetPartition partition;
  std::size_t image_size = 0;
};

// Synthetic runs draw a separate hold-out set of count/10 images; image
// folders give up their first 10% (after a seeded shuffle) instead.
inline ExperimentData load_experiment_data(const RunConfig& cfg) {
  ExperimentData d;
  auto part_rng = derive_rng(cfg.seed, {kStreamPartition});
  if (cfg.data_dir.empty()) {
    const auto data = nn::synthetic_dataset(derive_rng(cfg.seed, {kStreamData})(),
                                            cfg.synthetic_count, cfg.synthetic_size);
    const auto holdout =
        nn::synthetic_dataset(derive_rng(cfg.seed, {kStreamHoldout})(),
                              std::max<std::size_t>(cfg.synthetic_count / 10, 1), cfg.synthetic_size);
    d.partition = nn::partition(data, cfg.clients, part_rng, holdout);
    d.image_size = cfg.synthetic_size;
    return d;
  }
  const auto all = nn::load_image_dir(cfg.data_dir);
  if (all.item_shape.size() != 3 || all.item_shape[1] < 8 || all.item_shape[1] != all.item_shape[2])
    throw ConfigError("data_dir", "images must be square and at least 8 pixels wide");
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), part_rng);
  const std::size_t n_hold = all.size() / 10;
  const std::span<const std::size_t> idx(order);
  const auto rest = all.subset(idx.subspan(n_hold));
  if (rest.size() < kMinShard * cfg.clients) {
    throw ConfigError("data_dir", std::to_string(all.size()) + " images leave fewer than " +
                                      std::to_string(kMinShard) + " per client");
  }
  d.partition = nn::partition(rest, cfg.clients, part_rng, all.subset(idx.first(n_hold)));
  d.image_size = all.item_shape[1];
  return d;
}

// One simulated client: its model, its precomputed head inputs and, in
// encrypted runs, the shared key pair handed out by the key dealer.
struct ClientState {
  std::size_t id = 0;
  nn::Model<float> model;
  nn::Examples train;
  nn::Examples test;
  std::shared_ptr<const ckks::CkksContext> ctx;
  std::optional<ckks::PublicKey> pk;
  std::optional<ckks::SecretKey> sk;
};

inline ClientState make_client(std::size_t id, const RunConfig& cfg, std::size_t image_size,
                               const nn::ClientShard& shard,
                               std::shared_ptr<const ckks::CkksContext> ctx,
                               std::optional<ckks::PublicKey> pk,
                               std::optional<ckks::SecretKey> sk) {
  ClientState c;
  c.id = id;
  nn::Rng rng(0);  // trainable values are overwritten by the first broadcast
  c.model = nn::build_model<float>(cfg.arch, image_size, rng);
  c.train = nn::head_inputs(c.model, shard.train);
  c.test = nn::head_inputs(c.model, shard.test);
  c.ctx = std::move(ctx);
  c.pk = std::move(pk);
  c.sk = std::move(sk);
  return c;
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Turns a received parameter payload into plaintext tensors, decrypting
// when needed. Returns the decryption time, zero for plaintext payloads.
inline double open_payload(ClientState& c, const Bytes& payload, ParamSet& out) {
  const auto msg = deserialize_message(payload, c.ctx.get());
  if (!msg.encrypted()) {
    out.clear();
    for (const auto& t : msg.tensors) {
      const auto* p = std::get_if<PlainTensor>(&t);
      if (!p) throw StructuralError("mixed plain and encrypted tensors");
      out.push_back(*p);
    }
    return 0.0;
  }
  if (!c.sk) throw StructuralError("encrypted parameters but no secret key");
  EncryptedSet enc;
  for (const auto& t : msg.tensors) {
    const auto* e = std::get_if<EncryptedTensor>(&t);
    if (!e) throw StructuralError("mixed plain and encrypted tensors");
    enc.push_back(*e);
  }
  const auto t0 = Clock::now();
  out = decrypt_params(*c.ctx, *c.sk, enc);
  return seconds_since(t0);
}

// Local round: open the global parameters, train, and seal the update.
inline Envelope client_fit(ClientState& c, const Envelope& cmd, const RunConfig& cfg) {
  const auto t0 = Clock::now();
  Envelope reply;
  reply.kind = EnvelopeKind::fit_result;
  reply.round = cmd.round;
  reply.client = static_cast<std::uint32_t>(c.id);
  ParamSet params;
  reply.decryption_time_s = open_payload(c, cmd.payload, params);
  load_params(c.model, params);
  nn::Sgd<float> opt(cfg.lr, cfg.momentum);
  auto rng = derive_rng(cfg.seed, {kStreamTrain, c.id, cmd.round});
  reply.loss = 0.0;
  const auto losses = nn::train_epochs(c.model, c.train, cfg.epochs, cfg.batch, opt, rng);
  if (!losses.empty()) reply.loss = losses.back();
  const auto updated = extract_params(c.model);
  if (cfg.encrypted) {
    auto enc_rng = derive_rng(cfg.seed, {kStreamEncrypt, c.id, cmd.round});
    const auto t1 = Clock::now();
    auto sealed = encrypt_params(*c.ctx, *c.pk, updated, enc_rng);
    reply.encryption_time_s = seconds_since(t1);
    reply.payload = serialize(encrypted_message(std::move(sealed)));
  } else {
    reply.payload = serialize(plain_message(updated));
  }
  reply.n_examples = c.train.size();
  reply.round_time_s = seconds_since(t0);
  return reply;
}

inline Envelope client_evaluate(ClientState& c, const Envelope& cmd) {
  Envelope reply;
  reply.kind = EnvelopeKind::eval_result;
  reply.round = cmd.round;
  reply.client = static_cast<std::uint32_t>(c.id);
  ParamSet params;
  reply.decryption_time_s = open_payload(c, cmd.payload, params);
  load_params(c.model, params);
  const auto r = nn::evaluate(c.model, c.test);
  reply.n_examples = r.n;
  reply.loss = r.loss;
  reply.accuracy = r.accuracy;
  reply.precision = r.precision;
  reply.recall = r.recall;
  reply.f1 = r.f1;
  return reply;
}

// Example-weighted mean of client reports.
inline nn::EvalReport weighted_report(const std::vector<Envelope>& replies) {
  nn::EvalReport r;
  for (const auto& e : replies) r.n += e.n_examples;
  if (r.n == 0) throw StructuralError("evaluation: sampled clients hold no test examples");
  for (const auto& e : replies) {
    const double w = static_cast<double>(e.n_examples) / static_cast<double>(r.n);
    r.loss += w * e.loss;
    r.accuracy += w * e.accuracy;
    r.precision += w * e.precision;
    r.recall += w * e.recall;
    r.f1 += w * e.f1;
  }
  return r;
}

struct RunLog {
  RunConfig config;
  std::size_t trainable_parameters = 0;
  std::vector<metrics::RoundRecord> rounds;
  std::vector<metrics::ResourceSample> samples;
  // Secret-key reads during the run, by audit role.
  std::array<std::uint64_t, audit::kRoleCount> secret_key_accesses{};
  Bytes final_message;                  // last global broadcast
  std::optional<ParamSet> final_params;  // plain runs only
  double wall_time_s = 0.0;

  std::uint64_t accesses(audit::Role r) const {
    return secret_key_accesses[static_cast<std::size_t>(r)];
  }
};

namespace detail {

// Client actor: serves commands from its inbox until told to stop. Any
// failure, including during setup, is reported back on the next command.
inline void client_loop(std::size_t id, const RunConfig& cfg, const ExperimentData& data,
                        std::shared_ptr<const ckks::CkksContext> ctx,
                        std::optional<ckks::PublicKey> pk, std::optional<ckks::SecretKey> sk,
                        Channel& inbox, Channel& central, metrics::ResourceSampler& sampler) {
  audit::RoleScope role(audit::Role::client);
  sampler.register_current_thread("client" + std::to_string(id));
  std::optional<ClientState> state;
  std::string setup_error;
  try {
    state = make_client(id, cfg, data.image_size, data.partition.clients[id], std::move(ctx),
                        std::move(pk), std::move(sk));
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  while (true) {
    const Envelope cmd = deserialize_envelope(inbox.receive());
    if (cmd.kind == EnvelopeKind::stop) break;
    Envelope reply;
    try {
      if (!state) throw Error("setup failed: " + setup_error);
      if (cmd.kind == EnvelopeKind::fit) {
        reply = client_fit(*state, cmd, cfg);
      } else if (cmd.kind == EnvelopeKind::evaluate) {
        reply = client_evaluate(*state, cmd);
      } else {
        throw StructuralError("unexpected command");
      }
    } catch (const std::exception& e) {
      reply = Envelope{};
      reply.kind = EnvelopeKind::failure;
      reply.round = cmd.round;
      reply.client = static_cast<std::uint32_t>(id);
      reply.error = e.what();
    }
    central.send(serialize(reply));
  }
  sampler.unregister_current_thread();
}

// Owns the client threads; stops and joins them on every exit path.
class ClientPool {
 public:
  explicit ClientPool(std::size_t n) : inboxes_(n) {}
  ~ClientPool() { shutdown(); }

  Channel& inbox(std::size_t k) { return inboxes_[k]; }
  Channel& central() { return central_; }

  template <typename F>
  void spawn(F&& body) {
    threads_.emplace_back(std::forward<F>(body));
  }

  void shutdown() {
    if (threads_.empty()) return;
    Envelope stop;
    stop.kind = EnvelopeKind::stop;
    for (auto& ch : inboxes_) ch.send(serialize(stop));
    for (auto& t : threads_) t.join();
    threads_.clear();
  }

 private:
  std::vector<Channel> inboxes_;
  Channel central_;
  std::vector<std::thread> threads_;
};

// Sends `cmd` to every listed client and gathers their replies in client
// order. Fails fast on the first reported failure.
inline std::vector<Envelope> exchange(ClientPool& pool, const std::vector<std::size_t>& ids,
                                      Envelope cmd, EnvelopeKind expected) {
  for (auto k : ids) {
    cmd.client = static_cast<std::uint32_t>(k);
    pool.inbox(k).send(serialize(cmd));
  }
  std::vector<Envelope> replies;
  std::string failure;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto e = deserialize_envelope(pool.central().receive());
    if (e.kind == EnvelopeKind::failure) {
      if (failure.empty()) {
        failure = "client " + std::to_string(e.client) + " failed in round " +
                  std::to_string(e.round) + ": " + e.error;
      }
    } else if (e.kind != expected) {
      failure = "unexpected reply from client " + std::to_string(e.client);
    }
    replies.push_back(std::move(e));
  }
  if (!failure.empty()) throw Error(failure);
  std::sort(replies.begin(), replies.end(),
            [](const Envelope& a, const Envelope& b) { return a.client < b.client; });
  return replies;
}

}  // namespace detail

// Runs the full protocol: the key dealer provisions clients, the calling
// thread acts as the central party, and each client runs on its own
// thread. The central party holds the CKKS context only.
inline RunLog run_experiment(const RunConfig& cfg) {
  cfg.validate();
  const auto run_start = Clock::now();
  std::array<std::uint64_t, audit::kRoleCount> sk_before{};
  for (std::size_t r = 0; r < audit::kRoleCount; ++r)
    sk_before[r] = audit::secret_key_accesses(static_cast<audit::Role>(r));

  audit::RoleScope central_role(audit::Role::central);
  RunLog log;
  log.config = cfg;
  const auto data = load_experiment_data(cfg);

  std::shared_ptr<const ckks::CkksContext> ctx;
  std::optional<ckks::KeyPair> keys;
  if (cfg.encrypted) {
    ctx = std::make_shared<const ckks::CkksContext>(cfg.ckks);
    std::thread dealer([&] {
      audit::RoleScope dealer_role(audit::Role::key_dealer);
      auto rng = derive_rng(cfg.seed, {kStreamKeys});
      keys.emplace(ckks::keygen(*ctx, rng));
    });
    dealer.join();
  }

  metrics::ResourceSampler sampler(cfg.sample_period);
  sampler.register_current_thread("central");
  sampler.start();

  detail::ClientPool pool(cfg.clients);
  for (std::size_t k = 0; k < cfg.clients; ++k) {
    std::optional<ckks::PublicKey> pk;
    std::optional<ckks::SecretKey> sk;
    if (keys) {
      pk = keys->pub;
      sk = keys->secret;
    }
    pool.spawn([&, k, pk = std::move(pk), sk = std::move(sk)]() mutable {
      detail::client_loop(k, cfg, data, ctx, std::move(pk), std::move(sk), pool.inbox(k),
                          pool.central(), sampler);
    });
  }
  keys.reset();  // the dealer's copy leaves with the dealer

  auto init_rng = derive_rng(cfg.seed, {kStreamInit});
  auto central_model = nn::build_model<float>(cfg.arch, data.image_size, init_rng);
  log.trainable_parameters = central_model.trainable_count();
  const nn::Examples holdout =
      cfg.encrypted ? nn::Examples{} : nn::head_inputs(central_model, data.partition.holdout);

  // Initial parameters go out in plaintext: nothing has been trained yet.
  Bytes global = serialize(plain_message(extract_params(central_model)));
  std::uint64_t total_sent = 0, total_received = 0;

  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    metrics::RoundRecord rec;
    rec.round = round;
    rec.trainable_parameters = log.trainable_parameters;
    rec.window_start_s = sampler.now();
    const auto round_start = Clock::now();

    auto fit_rng = derive_rng(cfg.seed, {kStreamFitSample, round});
    const auto fit_ids = sample_clients(cfg.clients, cfg.fit_fraction, fit_rng);
    Envelope fit;
    fit.kind = EnvelopeKind::fit;
    fit.round = static_cast<std::uint32_t>(round);
    fit.payload = global;
    rec.bytes_sent_round = global.size();
    const auto fits = detail::exchange(pool, fit_ids, std::move(fit), EnvelopeKind::fit_result);

    for (const auto& e : fits) {
      rec.bytes_received_round += e.payload.size();
      rec.client_round_times_s.push_back(e.round_time_s);
      if (cfg.encrypted) rec.encryption_times_s.push_back(e.encryption_time_s);
      if (e.decryption_time_s > 0.0) rec.decryption_times_s.push_back(e.decryption_time_s);
    }

    if (cfg.encrypted) {
      std::vector<EncryptedUpdate> updates;
      for (const auto& e : fits) {
        EncryptedUpdate u;
        u.n_examples = e.n_examples;
        for (auto& t : deserialize_message(e.payload, ctx.get()).tensors) {
          auto* enc = std::get_if<EncryptedTensor>(&t);
          if (!enc) throw StructuralError("plaintext update in an encrypted run");
          u.params.push_back(std::move(*enc));
        }
        updates.push_back(std::move(u));
      }
      const auto t0 = Clock::now();
      auto aggregate = fedavg_encrypted(*ctx, updates);
      rec.aggregation_time_s = seconds_since(t0);
      global = serialize(encrypted_message(std::move(aggregate)));
    } else {
      std::vector<PlainUpdate> updates;
      for (const auto& e : fits) {
        PlainUpdate u;
        u.n_examples = e.n_examples;
        for (auto& t : deserialize_message(e.payload, nullptr).tensors) {
          u.params.push_back(std::move(std::get<PlainTensor>(t)));
        }
        updates.push_back(std::move(u));
      }
      const auto t0 = Clock::now();
      auto aggregate = fedavg_plain(updates);
      rec.aggregation_time_s = seconds_since(t0);
      global = serialize(plain_message(aggregate));
      log.final_params = std::move(aggregate);
    }

    auto eval_rng = derive_rng(cfg.seed, {kStreamEvalSample, round});
    const auto eval_ids = sample_clients(cfg.clients, cfg.eval_fraction, eval_rng);
    Envelope ev;
    ev.kind = EnvelopeKind::evaluate;
    ev.round = static_cast<std::uint32_t>(round);
    ev.payload = global;
    const auto report =
        weighted_report(detail::exchange(pool, eval_ids, std::move(ev), EnvelopeKind::eval_result));
    rec.aggregated_accuracy = report.accuracy;
    rec.aggregated_precision = report.precision;
    rec.aggregated_recall = report.recall;
    rec.aggregated_f1 = report.f1;
    rec.aggregated_loss = report.loss;

    // Central evaluation needs plaintext parameters, so it exists only in
    // plain runs.
    if (!cfg.encrypted && holdout.size() > 0) {
      load_params(central_model, *log.final_params);
      const auto central = nn::evaluate(central_model, holdout);
      rec.central_accuracy = central.accuracy;
      rec.central_loss = central.loss;
    }

    total_sent += rec.bytes_sent_round;
    total_received += rec.bytes_received_round;
    rec.total_bytes_sent = total_sent;
    rec.total_bytes_received = total_received;
    rec.server_round_time_s = seconds_since(round_start);
    rec.total_training_time_s = seconds_since(run_start);
    rec.window_end_s = sampler.now();
    log.rounds.push_back(std::move(rec));
  }

  pool.shutdown();
  sampler.stop();
  sampler.unregister_current_thread();
  log.samples = sampler.samples();
  for (auto& r : log.rounds) metrics::attach_resources(r, log.samples);
  log.final_message = std::move(global);
  for (std::size_t r = 0; r < audit::kRoleCount; ++r)
    log.secret_key_accesses[r] =
        audit::secret_key_accesses(static_cast<audit::Role>(r)) - sk_before[r];
  log.wall_time_s = seconds_since(run_start);
  return log;
}

}  // namespace fhe_fedsim::fed
