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

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "fhe_fedsim/ckks/context.hpp"
#include "fhe_fedsim/common/bytes.hpp"
#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/ring/rns_poly.hpp"

namespace fhe_fedsim::ckks {

// RLWE pair (c0, c1) in coefficient form; decrypts as c0 + c1*s.
struct Ciphertext {
  ring::RnsPoly c0;
  ring::RnsPoly c1;
  double scale = 1.0;

  std::size_t level() const noexcept { return c0.level(); }
  std::size_t degree() const noexcept { return c0.degree(); }

  friend bool operator==(const Ciphertext& a, const Ciphertext& b) {
    return a.c0 == b.c0 && a.c1 == b.c1 &&
           std::bit_cast<std::uint64_t>(a.scale) ==
               std::bit_cast<std::uint64_t>(b.scale);
  }
};

// Wire layout, little-endian:
//   u8  version (=1)
//   u8  level L
//   u16 reserved (=0)
//   u32 N
//   f64 scale (IEEE-754 binary64)
//   L*N u64 residues of c0, prime-major, then the same for c1
inline constexpr std::uint8_t kCiphertextVersion = 1;
inline constexpr std::size_t kCiphertextHeaderBytes = 16;

inline std::size_t serialized_size(std::size_t degree, std::size_t level) {
  return kCiphertextHeaderBytes + 2 * level * degree * 8;
}

inline std::size_t serialized_size(const Ciphertext& ct) {
  return serialized_size(ct.degree(), ct.level());
}

inline void serialize(const Ciphertext& ct, Bytes& out) {
  if (ct.level() > 255) throw StructuralError("level does not fit the header");
  out.reserve(out.size() + serialized_size(ct));
  ByteWriter w(out);
  w.u8(kCiphertextVersion);
  w.u8(static_cast<std::uint8_t>(ct.level()));
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(ct.degree()));
  w.f64(ct.scale);
  for (const auto* poly : {&ct.c0, &ct.c1}) {
    const auto coeff = poly->to_coefficient();
    for (std::size_t k = 0; k < coeff.level(); ++k) {
      for (u64 v : coeff.component(k)) w.u64(v);
    }
  }
}

inline Bytes serialize(const Ciphertext& ct) {
  Bytes out;
  serialize(ct, out);
  return out;
}

// Reads one ciphertext; the prime set is the context chain prefix.
inline Ciphertext deserialize_ciphertext(const CkksContext& ctx,
                                         ByteReader& in) {
  const auto version = in.u8();
  if (version != kCiphertextVersion) {
    throw ParseError("unsupported ciphertext version " + std::to_string(version));
  }
  const std::size_t level = in.u8();
  if (in.u16() != 0) throw ParseError("reserved header bits set");
  const std::size_t degree = in.u32();
  const double scale = in.f64();
  if (degree != ctx.degree()) throw ParseError("ciphertext degree mismatch");
  if (level == 0 || level > ctx.top_level()) {
    throw ParseError("ciphertext level out of range");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ParseError("ciphertext scale must be positive and finite");
  }
  const auto primes = ctx.primes_at(level);
  Ciphertext ct{ring::RnsPoly(degree, primes), ring::RnsPoly(degree, primes),
                scale};
  for (auto* poly : {&ct.c0, &ct.c1}) {
    for (std::size_t k = 0; k < level; ++k) {
      for (auto& v : poly->component(k)) {
        v = in.u64();
        if (v >= primes[k]) throw ParseError("residue not reduced");
      }
    }
  }
  return ct;
}

inline Ciphertext deserialize_ciphertext(const CkksContext& ctx,
                                         std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  auto ct = deserialize_ciphertext(ctx, in);
  if (in.remaining() != 0) throw ParseError("trailing bytes after ciphertext");
  return ct;
}

}  // namespace fhe_fedsim::ckks
