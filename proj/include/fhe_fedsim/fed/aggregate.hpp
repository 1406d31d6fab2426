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
#include <span>
#include <string>
#include <vector>

#include "fhe_fedsim/ckks/context.hpp"
#include "fhe_fedsim/ckks/encoder.hpp"
#include "fhe_fedsim/ckks/evaluator.hpp"
#include "fhe_fedsim/ckks/keys.hpp"
#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/fed/messages.hpp"
#include "fhe_fedsim/nn/model.hpp"

namespace fhe_fedsim::fed {

// Trainable tensors of a model in model order, as float32.
template <typename T>
ParamSet extract_params(nn::Model<T>& model) {
  ParamSet out;
  for (auto* p : model.trainable()) {
    out.push_back({p->name, p->value.shape,
                   std::vector<float>(p->value.data.begin(), p->value.data.end())});
  }
  return out;
}

template <typename T>
void load_params(nn::Model<T>& model, const ParamSet& params) {
  const auto slots = model.trainable();
  if (slots.size() != params.size()) {
    throw StructuralError("load_params: expected " + std::to_string(slots.size()) +
                          " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]->name != params[i].name || slots[i]->value.shape != params[i].shape) {
      throw StructuralError("load_params: tensor '" + params[i].name + "' does not match '" +
                            slots[i]->name + "'");
    }
    std::copy(params[i].values.begin(), params[i].values.end(), slots[i]->value.data.begin());
  }
}

template <typename Set>
struct Update {
  Set params;
  std::size_t n_examples = 0;
};

using PlainUpdate = Update<ParamSet>;
using EncryptedUpdate = Update<EncryptedSet>;

namespace detail {

template <typename Set>
std::vector<double> fedavg_weights(std::span<const Update<Set>> updates) {
  if (updates.empty()) throw StructuralError("fedavg: no updates");
  double total = 0.0;
  for (const auto& u : updates) total += static_cast<double>(u.n_examples);
  if (!(total > 0.0)) throw StructuralError("fedavg: total example count is zero");
  std::vector<double> w;
  for (const auto& u : updates) w.push_back(static_cast<double>(u.n_examples) / total);
  return w;
}

template <typename A, typename B>
void check_same_layout(const A& ref, const B& other, std::size_t k) {
  if (ref.size() != other.size()) {
    throw StructuralError("fedavg: update " + std::to_string(k) + " has " +
                          std::to_string(other.size()) + " tensors, expected " +
                          std::to_string(ref.size()));
  }
  for (std::size_t t = 0; t < ref.size(); ++t) {
    if (ref[t].name != other[t].name) {
      throw StructuralError("fedavg: update " + std::to_string(k) + " is missing tensor '" +
                            ref[t].name + "'");
    }
    if (ref[t].shape != other[t].shape) {
      throw StructuralError("fedavg: tensor '" + ref[t].name + "' shape mismatch");
    }
  }
}

}  // namespace detail

// Sample-count weighted mean of every tensor, accumulated in double.
inline ParamSet fedavg_plain(std::span<const PlainUpdate> updates) {
  const auto w = detail::fedavg_weights(updates);
  const ParamSet& ref = updates.front().params;
  for (std::size_t k = 0; k < updates.size(); ++k) {
    detail::check_same_layout(ref, updates[k].params, k);
    for (const auto& t : updates[k].params) {
      if (t.values.size() != nn::element_count(t.shape)) {
        throw StructuralError("fedavg: tensor '" + t.name + "' size disagrees with its shape");
      }
    }
  }
  ParamSet out;
  std::vector<double> acc;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    acc.assign(ref[t].values.size(), 0.0);
    for (std::size_t k = 0; k < updates.size(); ++k) {
      const auto& v = updates[k].params[t].values;
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w[k] * static_cast<double>(v[i]);
    }
    out.push_back({ref[t].name, ref[t].shape, std::vector<float>(acc.begin(), acc.end())});
  }
  return out;
}

inline std::size_t chunk_count(const ckks::CkksContext& ctx, std::size_t elements) {
  return std::max<std::size_t>(1, (elements + ctx.slot_count() - 1) / ctx.slot_count());
}

inline EncryptedSet encrypt_params(const ckks::CkksContext& ctx, const ckks::PublicKey& pk,
                                   const ParamSet& params, ring::Rng& rng) {
  EncryptedSet out;
  const std::size_t slots = ctx.slot_count();
  std::vector<double> buf;
  for (const auto& t : params) {
    EncryptedTensor e{t.name, t.shape, {}};
    const std::size_t chunks = chunk_count(ctx, t.values.size());
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t lo = std::min(c * slots, t.values.size());
      const std::size_t hi = std::min(lo + slots, t.values.size());
      buf.assign(t.values.begin() + static_cast<long>(lo), t.values.begin() + static_cast<long>(hi));
      e.chunks.push_back(ckks::encrypt(ctx, ckks::encode(ctx, buf), pk, rng));
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline ParamSet decrypt_params(const ckks::CkksContext& ctx, const ckks::SecretKey& sk,
                               const EncryptedSet& params) {
  ParamSet out;
  const std::size_t slots = ctx.slot_count();
  for (const auto& e : params) {
    const std::size_t n = nn::element_count(e.shape);
    if (e.chunks.size() != chunk_count(ctx, n)) {
      throw StructuralError("decrypt_params: tensor '" + e.name + "' chunk count mismatch");
    }
    PlainTensor t{e.name, e.shape, std::vector<float>(n)};
    for (std::size_t c = 0; c < e.chunks.size(); ++c) {
      const auto values = ckks::decode(ctx, ckks::decrypt(e.chunks[c], sk));
      const std::size_t lo = std::min(c * slots, n);
      const std::size_t hi = std::min(lo + slots, n);
      for (std::size_t i = lo; i < hi; ++i) t.values[i] = static_cast<float>(values[i - lo]);
    }
    out.push_back(std::move(t));
  }
  return out;
}

// Encrypted FedAvg with public material only. Each client's chunk is
// multiplied by its weight n_k / sum(n) encoded at scale q_last, the
// products are summed at scale Delta * q_last, and one rescale brings the
// sum back to scale Delta one level down.
inline EncryptedSet fedavg_encrypted(const ckks::CkksContext& ctx,
                                     std::span<const EncryptedUpdate> updates) {
  const auto w = detail::fedavg_weights(updates);
  const EncryptedSet& ref = updates.front().params;
  for (std::size_t k = 0; k < updates.size(); ++k) {
    detail::check_same_layout(ref, updates[k].params, k);
  }
  if (ref.empty() || ref.front().chunks.empty()) return ref;
  const std::size_t level = ref.front().chunks.front().level();
  const double scale = ref.front().chunks.front().scale;
  for (std::size_t k = 0; k < updates.size(); ++k) {
    for (std::size_t t = 0; t < ref.size(); ++t) {
      const auto& e = updates[k].params[t];
      if (e.chunks.size() != ref[t].chunks.size()) {
        throw StructuralError("fedavg: tensor '" + e.name + "' chunk count mismatch");
      }
      for (const auto& ct : e.chunks) {
        if (ct.level() != level) throw StructuralError("fedavg: tensor '" + e.name + "' level mismatch");
        if (!ckks::detail::scales_match(ct.scale, scale)) {
          throw StructuralError("fedavg: tensor '" + e.name + "' scale mismatch");
        }
      }
    }
  }
  if (level < 2) throw LevelExhaustedError("fedavg: no level left for the rescale");

  const double q_last = static_cast<double>(ctx.primes_at(level).back());
  std::vector<ckks::Plaintext> weights;
  for (double wk : w) weights.push_back(ckks::encode_scalar(ctx, wk, level, q_last));

  EncryptedSet out;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    EncryptedTensor e{ref[t].name, ref[t].shape, {}};
    for (std::size_t c = 0; c < ref[t].chunks.size(); ++c) {
      auto acc = ckks::ct_mul_plain(updates[0].params[t].chunks[c], weights[0]);
      for (std::size_t k = 1; k < updates.size(); ++k) {
        const auto term = ckks::ct_mul_plain(updates[k].params[t].chunks[c], weights[k]);
        ring::add_inplace(acc.c0, term.c0);
        ring::add_inplace(acc.c1, term.c1);
      }
      e.chunks.push_back(ckks::rescale(acc));
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace fhe_fedsim::fed
