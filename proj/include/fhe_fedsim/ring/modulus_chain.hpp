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
#include <cstddef>
#include <string>
#include <vector>

#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/ring/modarith.hpp"

namespace fhe_fedsim::ring {

inline bool is_power_of_two(std::size_t n) noexcept {
  return n != 0 && (n & (n - 1)) == 0;
}

// Ordered list of distinct NTT-friendly primes q_0..q_{L-1} for degree N.
// The product of the primes is the ciphertext modulus Q.
class ModulusChain {
 public:
  ModulusChain() = default;

  // Validates an explicit prime list.
  ModulusChain(std::size_t degree, std::vector<u64> primes)
      : degree_(degree), primes_(std::move(primes)) {
    validate();
  }

  // First-fit deterministic search: for each requested width b, scan
  // downwards from 2^b over candidates congruent to 1 mod 2N, skipping
  // primes already taken by earlier entries.
  static ModulusChain generate(std::size_t degree,
                               const std::vector<int>& bit_sizes) {
    if (!is_power_of_two(degree) || degree < 2) {
      throw ConfigError("degree", "must be a power of two >= 2");
    }
    if (bit_sizes.empty()) {
      throw ConfigError("bit_sizes", "at least one prime is required");
    }
    const u64 step = 2 * static_cast<u64>(degree);
    std::vector<u64> primes;
    primes.reserve(bit_sizes.size());
    for (int bits : bit_sizes) {
      if (bits < 2 || bits > kMaxModulusBits) {
        throw ConfigError("bit_sizes", "prime widths must lie in [2, " +
                                           std::to_string(kMaxModulusBits) +
                                           "], got " + std::to_string(bits));
      }
      const u64 upper = (u64{1} << bits) - 1;
      const u64 lower = u64{1} << (bits - 1);
      if (upper < step + 1) {
        throw ConfigError("bit_sizes", std::to_string(bits) +
                                           "-bit primes cannot be 1 mod 2N");
      }
      u64 candidate = (upper - 1) / step * step + 1;
      bool found = false;
      while (candidate >= lower) {
        if (is_prime(candidate) &&
            std::find(primes.begin(), primes.end(), candidate) ==
                primes.end()) {
          primes.push_back(candidate);
          found = true;
          break;
        }
        if (candidate < step) break;
        candidate -= step;
      }
      if (!found) {
        throw ConfigError("bit_sizes", "no free " + std::to_string(bits) +
                                           "-bit prime congruent to 1 mod " +
                                           std::to_string(step));
      }
    }
    return ModulusChain(degree, std::move(primes));
  }

  std::size_t degree() const noexcept { return degree_; }
  std::size_t size() const noexcept { return primes_.size(); }
  const std::vector<u64>& primes() const noexcept { return primes_; }
  u64 operator[](std::size_t i) const { return primes_.at(i); }

  // First `count` primes.
  std::vector<u64> prefix(std::size_t count) const {
    if (count == 0 || count > primes_.size()) {
      throw StructuralError("prefix length out of range");
    }
    return {primes_.begin(), primes_.begin() + static_cast<long>(count)};
  }

  friend bool operator==(const ModulusChain&, const ModulusChain&) = default;

 private:
  void validate() const {
    if (!is_power_of_two(degree_) || degree_ < 2) {
      throw ConfigError("degree", "must be a power of two >= 2");
    }
    if (primes_.empty()) throw ConfigError("primes", "empty modulus chain");
    const u64 two_n = 2 * static_cast<u64>(degree_);
    for (std::size_t i = 0; i < primes_.size(); ++i) {
      const u64 p = primes_[i];
      if (p >= (u64{1} << kMaxModulusBits)) {
        throw ConfigError("primes", "prime exceeds 61 bits");
      }
      if (!is_prime(p)) {
        throw ConfigError("primes", std::to_string(p) + " is not prime");
      }
      if (p % two_n != 1) {
        throw ConfigError("primes",
                          std::to_string(p) + " is not 1 mod " +
                              std::to_string(two_n));
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (primes_[j] == p) {
          throw ConfigError("primes", "duplicate prime " + std::to_string(p));
        }
      }
    }
  }

  std::size_t degree_ = 0;
  std::vector<u64> primes_;
};

}  // namespace fhe_fedsim::ring
