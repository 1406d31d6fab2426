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

namespace fhe_fedsim::ring {

using u64 = std::uint64_t;
using u128 = unsigned __int128;
using i128 = __int128;

// Largest modulus accepted anywhere in the ring layer. Shoup multiplication
// needs q < 2^62 so that the lazy result stays below 2q.
inline constexpr int kMaxModulusBits = 61;

inline u64 add_mod(u64 a, u64 b, u64 q) noexcept {
  u64 s = a + b;
  return s >= q ? s - q : s;
}

inline u64 sub_mod(u64 a, u64 b, u64 q) noexcept {
  return a >= b ? a - b : a + q - b;
}

inline u64 negate_mod(u64 a, u64 q) noexcept { return a == 0 ? 0 : q - a; }

inline u64 mul_mod(u64 a, u64 b, u64 q) noexcept {
  return static_cast<u64>(static_cast<u128>(a) * b % q);
}

inline u64 pow_mod(u64 base, u64 exp, u64 q) noexcept {
  u64 result = 1 % q;
  base %= q;
  while (exp > 0) {
    if (exp & 1) result = mul_mod(result, base, q);
    base = mul_mod(base, base, q);
    exp >>= 1;
  }
  return result;
}

// q must be prime.
inline u64 inverse_mod(u64 a, u64 q) noexcept { return pow_mod(a, q - 2, q); }

// Deterministic Miller-Rabin; the base set is exact for all 64-bit inputs.
inline bool is_prime(u64 n) noexcept {
  if (n < 2) return false;
  for (u64 p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL,
                29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  u64 d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  for (u64 a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL,
                29ULL, 31ULL, 37ULL}) {
    u64 x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < r; ++i) {
      x = mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

// Barrett reduction of 128-bit products for a fixed q < 2^62, using the
// precomputed ratio floor(2^128 / q).
class BarrettReducer {
 public:
  explicit BarrettReducer(u64 q) noexcept : q_(q) {
    // floor(2^128 / q) = floor((2^128 - 1) / q) unless q divides 2^128.
    ratio_ = ~static_cast<u128>(0) / q;
    if (~static_cast<u128>(0) % q == q - 1) ++ratio_;
  }

  u64 modulus() const noexcept { return q_; }

  u64 reduce(u128 x) const noexcept {
    const u64 x0 = static_cast<u64>(x);
    const u64 x1 = static_cast<u64>(x >> 64);
    const u64 m0 = static_cast<u64>(ratio_);
    const u64 m1 = static_cast<u64>(ratio_ >> 64);
    const u128 low = static_cast<u128>(x0) * m0;
    const u128 mid1 = static_cast<u128>(x1) * m0;
    const u128 mid2 = static_cast<u128>(x0) * m1;
    const u128 sum = (low >> 64) + static_cast<u64>(mid1) + static_cast<u64>(mid2);
    const u128 estimate = static_cast<u128>(x1) * m1 + (mid1 >> 64) +
                          (mid2 >> 64) + (sum >> 64);
    u64 r = x0 - static_cast<u64>(estimate) * q_;
    while (r >= q_) r -= q_;
    return r;
  }

  u64 mul(u64 a, u64 b) const noexcept {
    return reduce(static_cast<u128>(a) * b);
  }

 private:
  u64 q_;
  u128 ratio_;
};

// Multiplicand with a precomputed quotient floor(w * 2^64 / q).
struct ShoupOperand {
  u64 value = 0;
  u64 quotient = 0;

  ShoupOperand() = default;
  ShoupOperand(u64 w, u64 q) noexcept
      : value(w), quotient(static_cast<u64>((static_cast<u128>(w) << 64) / q)) {}
};

// a * w mod q up to one extra q: result in [0, 2q).
inline u64 mul_shoup_lazy(u64 a, const ShoupOperand& w, u64 q) noexcept {
  const u64 hi = static_cast<u64>((static_cast<u128>(a) * w.quotient) >> 64);
  return a * w.value - hi * q;
}

inline u64 mul_shoup(u64 a, const ShoupOperand& w, u64 q) noexcept {
  const u64 hi = static_cast<u64>((static_cast<u128>(a) * w.quotient) >> 64);
  const u64 r = a * w.value - hi * q;
  return r >= q ? r - q : r;
}

// Residue of a signed 64-bit integer.
inline u64 reduce_signed(std::int64_t v, u64 q) noexcept {
  if (v >= 0) {
    const auto u = static_cast<u64>(v);
    return u < q ? u : u % q;
  }
  const u64 mag = static_cast<u64>(-(v + 1)) + 1;
  const u64 r = mag < q ? mag : mag % q;
  return r == 0 ? 0 : q - r;
}

// Residue of a signed 128-bit integer.
inline u64 reduce_signed(i128 v, u64 q) noexcept {
  if (v >= INT64_MIN && v <= INT64_MAX) {
    return reduce_signed(static_cast<std::int64_t>(v), q);
  }
  if (v >= 0) return static_cast<u64>(static_cast<u128>(v) % q);
  const u64 r = static_cast<u64>(static_cast<u128>(-v) % q);
  return r == 0 ? 0 : q - r;
}

}  // namespace fhe_fedsim::ring
