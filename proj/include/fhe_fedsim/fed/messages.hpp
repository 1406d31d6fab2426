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

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fhe_fedsim/ckks/ciphertext.hpp"
#include "fhe_fedsim/ckks/context.hpp"
#include "fhe_fedsim/common/bytes.hpp"
#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/nn/tensor.hpp"

namespace fhe_fedsim::fed {

struct PlainTensor {
  std::string name;
  nn::Shape shape;
  std::vector<float> values;

  friend bool operator==(const PlainTensor&, const PlainTensor&) = default;
};

// One model tensor packed into ceil(size / slots) ciphertexts; the last
// chunk is zero-padded.
struct EncryptedTensor {
  std::string name;
  nn::Shape shape;
  std::vector<ckks::Ciphertext> chunks;
};

using ParamSet = std::vector<PlainTensor>;
using EncryptedSet = std::vector<EncryptedTensor>;
using TensorPayload = std::variant<PlainTensor, EncryptedTensor>;

// Parameters exchanged in one hop, in model order.
struct ParameterMessage {
  std::vector<TensorPayload> tensors;

  bool encrypted() const {
    for (const auto& t : tensors)
      if (std::holds_alternative<EncryptedTensor>(t)) return true;
    return false;
  }
};

inline ParameterMessage plain_message(const ParamSet& params) {
  ParameterMessage m;
  for (const auto& t : params) m.tensors.emplace_back(t);
  return m;
}

inline ParameterMessage encrypted_message(EncryptedSet params) {
  ParameterMessage m;
  for (auto& t : params) m.tensors.emplace_back(std::move(t));
  return m;
}

inline constexpr std::uint8_t kPlainTag = 0;
inline constexpr std::uint8_t kEncryptedTag = 1;

// Wire layout, little-endian:
//   u32 tensor count
//   per tensor: u32 name length, name bytes, u8 tag (0 plain, 1 encrypted),
//               u32 rank, u32 dims[rank], then
//               plain:     f32 values[prod(dims)]
//               encrypted: u32 chunk count, ciphertexts back to back
inline Bytes serialize(const ParameterMessage& m) {
  Bytes out;
  ByteWriter w(out);
  w.u32(static_cast<std::uint32_t>(m.tensors.size()));
  for (const auto& payload : m.tensors) {
    const auto& name = std::visit([](const auto& t) -> const std::string& { return t.name; },
                                  payload);
    const auto& shape = std::visit([](const auto& t) -> const nn::Shape& { return t.shape; },
                                   payload);
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name);
    w.u8(std::holds_alternative<PlainTensor>(payload) ? kPlainTag : kEncryptedTag);
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) w.u32(static_cast<std::uint32_t>(d));
    if (const auto* p = std::get_if<PlainTensor>(&payload)) {
      if (p->values.size() != nn::element_count(p->shape)) {
        throw StructuralError("tensor '" + p->name + "' size disagrees with its shape");
      }
      for (float v : p->values) w.f32(v);
    } else {
      const auto& e = std::get<EncryptedTensor>(payload);
      w.u32(static_cast<std::uint32_t>(e.chunks.size()));
      for (const auto& ct : e.chunks) ckks::serialize(ct, out);
    }
  }
  return out;
}

// Encrypted payloads need the context to rebuild their prime sets; a null
// context rejects them.
inline ParameterMessage deserialize_message(std::span<const std::uint8_t> bytes,
                                            const ckks::CkksContext* ctx) {
  ByteReader in(bytes);
  ParameterMessage m;
  const std::size_t count = in.u32();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t name_len = in.u32();
    std::string name = in.raw(name_len);
    const auto tag = in.u8();
    const std::size_t rank = in.u32();
    nn::Shape shape;
    std::size_t elements = 1;
    for (std::size_t d = 0; d < rank; ++d) {
      shape.push_back(in.u32());
      if (shape.back() != 0 && elements > std::numeric_limits<std::size_t>::max() / shape.back())
        throw ParseError("tensor '" + name + "' shape overflows");
      elements *= shape.back();
    }
    if (tag == kPlainTag) {
      if (elements > in.remaining() / 4) throw ParseError("tensor '" + name + "' truncated");
      PlainTensor t{std::move(name), std::move(shape), std::vector<float>(elements)};
      for (auto& v : t.values) v = in.f32();
      m.tensors.emplace_back(std::move(t));
    } else if (tag == kEncryptedTag) {
      if (ctx == nullptr) throw ParseError("encrypted tensor without a CKKS context");
      EncryptedTensor t{std::move(name), std::move(shape), {}};
      const std::size_t chunks = in.u32();
      const std::size_t expected = (elements + ctx->slot_count() - 1) / ctx->slot_count();
      if (chunks != expected) throw ParseError("tensor '" + t.name + "' chunk count mismatch");
      for (std::size_t c = 0; c < chunks; ++c) {
        t.chunks.push_back(ckks::deserialize_ciphertext(*ctx, in));
      }
      m.tensors.emplace_back(std::move(t));
    } else {
      throw ParseError("unknown tensor tag " + std::to_string(tag));
    }
  }
  if (in.remaining() != 0) throw ParseError("trailing bytes after parameter message");
  return m;
}

// Control envelope between the central party and a client. Only `payload`
// (a serialized ParameterMessage) counts toward communication volume; the
// rest is bookkeeping.
enum class EnvelopeKind : std::uint8_t { fit = 1, evaluate, stop, fit_result, eval_result, failure };

struct Envelope {
  EnvelopeKind kind = EnvelopeKind::stop;
  std::uint32_t round = 0;
  std::uint32_t client = 0;
  std::uint64_t n_examples = 0;
  double round_time_s = 0.0;
  double encryption_time_s = 0.0;
  double decryption_time_s = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::string error;
  Bytes payload;
};

inline Bytes serialize(const Envelope& e) {
  Bytes out;
  ByteWriter w(out);
  w.u8(static_cast<std::uint8_t>(e.kind));
  w.u32(e.round);
  w.u32(e.client);
  w.u64(e.n_examples);
  for (double v : {e.round_time_s, e.encryption_time_s, e.decryption_time_s, e.loss,
                   e.accuracy, e.precision, e.recall, e.f1})
    w.f64(v);
  w.u32(static_cast<std::uint32_t>(e.error.size()));
  w.raw(e.error);
  w.u64(e.payload.size());
  out.insert(out.end(), e.payload.begin(), e.payload.end());
  return out;
}

inline Envelope deserialize_envelope(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  Envelope e;
  const auto kind = in.u8();
  if (kind < 1 || kind > 6) throw ParseError("unknown envelope kind");
  e.kind = static_cast<EnvelopeKind>(kind);
  e.round = in.u32();
  e.client = in.u32();
  e.n_examples = in.u64();
  for (double* v : {&e.round_time_s, &e.encryption_time_s, &e.decryption_time_s, &e.loss,
                    &e.accuracy, &e.precision, &e.recall, &e.f1})
    *v = in.f64();
  e.error = in.raw(in.u32());
  const std::size_t n = in.u64();
  if (n != in.remaining()) throw ParseError("envelope payload length mismatch");
  e.payload.assign(bytes.begin() + static_cast<long>(in.position()), bytes.end());
  return e;
}

}  // namespace fhe_fedsim::fed
