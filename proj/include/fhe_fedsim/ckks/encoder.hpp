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

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fhe_fedsim/ckks/context.hpp"
#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/ring/rns_poly.hpp"

namespace fhe_fedsim::ckks {

using ring::i128;
using ring::u128;

// Encoded message: coefficient-form polynomial at some level and scale.
struct Plaintext {
  ring::RnsPoly poly;
  double scale = 1.0;

  std::size_t level() const noexcept { return poly.level(); }
};

namespace detail {

// Rounds a real to the nearest integer as a signed 128-bit value.
inline i128 round_to_i128(double x) {
  const double r = std::nearbyint(x);
  if (!std::isfinite(r) || std::fabs(r) >= 0x1p126) {
    throw CapacityError("encoded coefficient exceeds 126 bits; lower the scale");
  }
  if (std::fabs(r) < 0x1p63) return static_cast<std::int64_t>(r);
  const double mag = std::fabs(r);
  const double hi = std::floor(mag * 0x1p-64);
  const double lo = mag - hi * 0x1p64;
  const u128 v = (static_cast<u128>(static_cast<std::uint64_t>(hi)) << 64) |
                 static_cast<std::uint64_t>(lo);
  return r < 0 ? -static_cast<i128>(v) : static_cast<i128>(v);
}

inline ring::RnsPoly lift(const std::vector<i128>& coeffs,
                          std::vector<u64> primes) {
  ring::RnsPoly p(coeffs.size(), std::move(primes));
  for (std::size_t k = 0; k < p.level(); ++k) {
    const u64 q = p.primes()[k];
    auto dst = p.component(k);
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
      dst[j] = ring::reduce_signed(coeffs[j], q);
    }
  }
  return p;
}

// Centered integer coefficients of a coefficient-form polynomial. Garner
// reconstruction over the longest prime prefix whose product stays below
// 2^126; values are exact whenever |coefficient| is below half that product,
// which holds for any decryptable message.
inline std::vector<i128> centered_coefficients(const ring::RnsPoly& p) {
  const auto& primes = p.primes();
  std::size_t used = 1;
  double log_product = std::log2(static_cast<double>(primes[0]));
  while (used < primes.size() &&
         log_product + std::log2(static_cast<double>(primes[used])) < 126.0) {
    log_product += std::log2(static_cast<double>(primes[used]));
    ++used;
  }
  // inv[i][j] = q_j^{-1} mod q_i for j < i.
  std::vector<ring::BarrettReducer> reducers;
  for (std::size_t i = 0; i < used; ++i) reducers.emplace_back(primes[i]);
  std::vector<std::vector<u64>> inv(used);
  for (std::size_t i = 1; i < used; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      inv[i].push_back(ring::inverse_mod(primes[j] % primes[i], primes[i]));
    }
  }
  u128 modulus = 1;
  for (std::size_t i = 0; i < used; ++i) modulus *= primes[i];

  std::vector<i128> out(p.degree());
  std::vector<u64> digits(used);
  for (std::size_t c = 0; c < p.degree(); ++c) {
    for (std::size_t i = 0; i < used; ++i) {
      const u64 qi = primes[i];
      u64 t = p.component(i)[c];
      for (std::size_t j = 0; j < i; ++j) {
        const u64 dj = digits[j] < qi ? digits[j] : digits[j] % qi;
        t = reducers[i].mul(ring::sub_mod(t, dj, qi), inv[i][j]);
      }
      digits[i] = t;
    }
    u128 value = 0;
    u128 radix = 1;
    for (std::size_t i = 0; i < used; ++i) {
      value += static_cast<u128>(digits[i]) * radix;
      radix *= primes[i];
    }
    out[c] = value > modulus / 2 ? -static_cast<i128>(modulus - value)
                                 : static_cast<i128>(value);
  }
  return out;
}

}  // namespace detail

// Inverse canonical embedding of the zero-padded vector, scaled and rounded.
inline Plaintext encode(const CkksContext& ctx, std::span<const double> values,
                        std::size_t level, double scale) {
  const std::size_t slots = ctx.slot_count();
  if (values.size() > slots) {
    throw CapacityError("encode: " + std::to_string(values.size()) +
                        " values exceed " + std::to_string(slots) + " slots");
  }
  if (level == 0 || level > ctx.top_level()) {
    throw StructuralError("encode: level out of range");
  }
  if (!(scale > 0.0)) throw StructuralError("encode: scale must be positive");

  std::vector<std::complex<double>> vals(slots);
  for (std::size_t i = 0; i < values.size(); ++i) vals[i] = values[i];
  ctx.embedding().inverse(vals);

  std::vector<i128> coeffs(ctx.degree());
  for (std::size_t i = 0; i < slots; ++i) {
    coeffs[i] = detail::round_to_i128(vals[i].real() * scale);
    coeffs[i + slots] = detail::round_to_i128(vals[i].imag() * scale);
  }
  return {detail::lift(coeffs, ctx.primes_at(level)), scale};
}

inline Plaintext encode(const CkksContext& ctx, std::span<const double> values) {
  return encode(ctx, values, ctx.top_level(), ctx.scale());
}

// Encoding of a vector holding one value in every slot. The canonical
// embedding maps constants to constant polynomials, so no transform is
// needed.
inline Plaintext encode_scalar(const CkksContext& ctx, double value,
                               std::size_t level, double scale) {
  if (level == 0 || level > ctx.top_level()) {
    throw StructuralError("encode_scalar: level out of range");
  }
  std::vector<i128> coeffs(ctx.degree(), 0);
  coeffs[0] = detail::round_to_i128(value * scale);
  return {detail::lift(coeffs, ctx.primes_at(level)), scale};
}

// Forward canonical embedding divided by the plaintext scale; returns one
// real per slot.
inline std::vector<double> decode(const CkksContext& ctx, const Plaintext& pt) {
  if (pt.poly.degree() != ctx.degree()) {
    throw StructuralError("decode: degree mismatch");
  }
  const std::size_t slots = ctx.slot_count();
  const auto coeffs = detail::centered_coefficients(pt.poly.to_coefficient());
  std::vector<std::complex<double>> vals(slots);
  const long double inv_scale = 1.0L / static_cast<long double>(pt.scale);
  for (std::size_t i = 0; i < slots; ++i) {
    vals[i] = {static_cast<double>(static_cast<long double>(coeffs[i]) * inv_scale),
               static_cast<double>(static_cast<long double>(coeffs[i + slots]) *
                                   inv_scale)};
  }
  ctx.embedding().forward(vals);
  std::vector<double> out(slots);
  for (std::size_t i = 0; i < slots; ++i) out[i] = vals[i].real();
  return out;
}

}  // namespace fhe_fedsim::ckks
