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

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/ring/modarith.hpp"
#include "fhe_fedsim/ring/modulus_chain.hpp"

namespace fhe_fedsim::ring {

inline std::size_t bit_reverse(std::size_t x, int bits) noexcept {
  std::size_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

// Twiddle tables for the negacyclic NTT of length N modulo q. The forward
// transform evaluates a(X) at the odd powers of a primitive 2N-th root psi
// (output in bit-reversed order), so pointwise products realize
// multiplication modulo X^N + 1.
class NttTables {
 public:
  NttTables(u64 modulus, std::size_t degree)
      : modulus_(modulus), degree_(degree) {
    if (!is_power_of_two(degree) || degree < 2) {
      throw StructuralError("NTT degree must be a power of two >= 2");
    }
    const u64 two_n = 2 * static_cast<u64>(degree);
    if (modulus % two_n != 1 || !is_prime(modulus)) {
      throw StructuralError("modulus is not an NTT-friendly prime");
    }
    log_degree_ = 0;
    while ((std::size_t{1} << log_degree_) < degree) ++log_degree_;

    psi_ = find_primitive_root(two_n);
    const u64 psi_inv = inverse_mod(psi_, modulus);

    psi_rev_.resize(degree);
    psi_inv_rev_.resize(degree);
    u64 power = 1;
    u64 inv_power = 1;
    std::vector<u64> powers(degree), inv_powers(degree);
    for (std::size_t i = 0; i < degree; ++i) {
      powers[i] = power;
      inv_powers[i] = inv_power;
      power = mul_mod(power, psi_, modulus);
      inv_power = mul_mod(inv_power, psi_inv, modulus);
    }
    for (std::size_t i = 0; i < degree; ++i) {
      const std::size_t r = bit_reverse(i, log_degree_);
      psi_rev_[i] = ShoupOperand(powers[r], modulus);
      psi_inv_rev_[i] = ShoupOperand(inv_powers[r], modulus);
    }
    n_inv_ = ShoupOperand(inverse_mod(static_cast<u64>(degree) % modulus, modulus),
                          modulus);
  }

  u64 modulus() const noexcept { return modulus_; }
  std::size_t degree() const noexcept { return degree_; }
  u64 root() const noexcept { return psi_; }

  // Cooley-Tukey, natural order in, bit-reversed out. Butterflies are lazy
  // (values kept in [0, 4q)) and reduced once at the end.
  void forward(std::span<u64> a) const {
    check(a);
    const u64 q = modulus_;
    const u64 two_q = 2 * q;
    std::size_t t = degree_;
    for (std::size_t m = 1; m < degree_; m <<= 1) {
      t >>= 1;
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j1 = 2 * i * t;
        const ShoupOperand& s = psi_rev_[m + i];
        u64* x = a.data() + j1;
        u64* y = x + t;
        for (std::size_t j = 0; j < t; ++j) {
          u64 u = x[j];
          if (u >= two_q) u -= two_q;
          const u64 v = mul_shoup_lazy(y[j], s, q);
          x[j] = u + v;
          y[j] = u + two_q - v;
        }
      }
    }
    for (auto& v : a) {
      if (v >= two_q) v -= two_q;
      if (v >= q) v -= q;
    }
  }

  // Gentleman-Sande, bit-reversed in, natural order out, scaled by 1/N.
  // Values stay in [0, 2q) between stages.
  void inverse(std::span<u64> a) const {
    check(a);
    const u64 q = modulus_;
    const u64 two_q = 2 * q;
    std::size_t t = 1;
    for (std::size_t m = degree_; m > 1; m >>= 1) {
      const std::size_t h = m >> 1;
      std::size_t j1 = 0;
      for (std::size_t i = 0; i < h; ++i) {
        const ShoupOperand& s = psi_inv_rev_[h + i];
        u64* x = a.data() + j1;
        u64* y = x + t;
        for (std::size_t j = 0; j < t; ++j) {
          const u64 u = x[j];
          const u64 v = y[j];
          u64 sum = u + v;
          if (sum >= two_q) sum -= two_q;
          x[j] = sum;
          y[j] = mul_shoup_lazy(u + two_q - v, s, q);
        }
        j1 += 2 * t;
      }
      t <<= 1;
    }
    for (auto& v : a) v = mul_shoup(v, n_inv_, q);
  }

 private:
  void check(std::span<u64> a) const {
    if (a.size() != degree_) throw StructuralError("NTT length mismatch");
  }

  u64 find_primitive_root(u64 order) const {
    const u64 q = modulus_;
    for (u64 g = 2; g < q; ++g) {
      const u64 candidate = pow_mod(g, (q - 1) / order, q);
      // candidate^(order/2) == -1 pins the order to exactly `order`.
      if (pow_mod(candidate, order / 2, q) == q - 1) return candidate;
    }
    throw StructuralError("no primitive root found");
  }

  u64 modulus_;
  std::size_t degree_;
  int log_degree_ = 0;
  u64 psi_ = 0;
  std::vector<ShoupOperand> psi_rev_;
  std::vector<ShoupOperand> psi_inv_rev_;
  ShoupOperand n_inv_;
};

// Process-wide table cache keyed by (q, N). Tables are immutable once built.
inline const NttTables& ntt_tables(u64 modulus, std::size_t degree) {
  static std::mutex mutex;
  static std::map<std::pair<u64, std::size_t>, std::unique_ptr<NttTables>>
      cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{modulus, degree}];
  if (!slot) slot = std::make_unique<NttTables>(modulus, degree);
  return *slot;
}

}  // namespace fhe_fedsim::ring
