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
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/ring/modulus_chain.hpp"
#include "fhe_fedsim/ring/sampler.hpp"

namespace fhe_fedsim::ckks {

using ring::u64;

struct CkksParameters {
  std::size_t poly_degree = 8192;
  std::vector<int> bit_sizes = {60, 40, 40, 60};
  int scale_log2 = 40;
  double sigma = ring::kDefaultSigma;
};

// Twiddles for the CKKS canonical embedding: slot j holds m(zeta^(5^j)) with
// zeta = exp(i pi / N).
class CanonicalEmbedding {
 public:
  explicit CanonicalEmbedding(std::size_t degree)
      : degree_(degree), slots_(degree / 2), m_(2 * degree) {
    rot_group_.resize(slots_);
    std::size_t five_pow = 1;
    for (std::size_t j = 0; j < slots_; ++j) {
      rot_group_[j] = five_pow;
      five_pow = five_pow * 5 % m_;
    }
    roots_.resize(m_ + 1);
    for (std::size_t k = 0; k <= m_; ++k) {
      const double angle =
          2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(m_);
      roots_[k] = {std::cos(angle), std::sin(angle)};
    }
  }

  std::size_t slot_count() const noexcept { return slots_; }

  // Slot values -> coefficient-space values (before scaling), in place.
  void inverse(std::vector<std::complex<double>>& vals) const {
    const std::size_t n = vals.size();
    for (std::size_t len = n; len >= 2; len >>= 1) {
      const std::size_t half = len >> 1;
      const std::size_t quarter_period = len << 2;
      for (std::size_t i = 0; i < n; i += len) {
        for (std::size_t j = 0; j < half; ++j) {
          const std::size_t idx =
              (quarter_period - rot_group_[j] % quarter_period) * m_ /
              quarter_period;
          const auto u = vals[i + j] + vals[i + j + half];
          const auto v = (vals[i + j] - vals[i + j + half]) * roots_[idx];
          vals[i + j] = u;
          vals[i + j + half] = v;
        }
      }
    }
    bit_reverse(vals);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& v : vals) v *= inv_n;
  }

  // Coefficient-space values -> slot values, in place.
  void forward(std::vector<std::complex<double>>& vals) const {
    const std::size_t n = vals.size();
    bit_reverse(vals);
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len >> 1;
      const std::size_t quarter_period = len << 2;
      for (std::size_t i = 0; i < n; i += len) {
        for (std::size_t j = 0; j < half; ++j) {
          const std::size_t idx =
              rot_group_[j] % quarter_period * m_ / quarter_period;
          const auto u = vals[i + j];
          const auto v = vals[i + j + half] * roots_[idx];
          vals[i + j] = u + v;
          vals[i + j + half] = u - v;
        }
      }
    }
  }

 private:
  static void bit_reverse(std::vector<std::complex<double>>& vals) {
    const std::size_t n = vals.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(vals[i], vals[j]);
    }
  }

  std::size_t degree_;
  std::size_t slots_;
  std::size_t m_;
  std::vector<std::size_t> rot_group_;
  std::vector<std::complex<double>> roots_;
};

// Immutable CKKS parameter set: ring degree, RNS modulus chain, scale and
// encoder tables. Shared by every party; holds no key material.
//
// The RNS order keeps the first requested prime at position 0 and places the
// remaining primes by descending width, so for {60, 40, 40, 60} the chain is
// (60, 60, 40, 40): fresh ciphertexts carry all four primes and each rescale
// drops a scale-sized 40-bit prime.
class CkksContext {
 public:
  explicit CkksContext(CkksParameters params = {}) : params_(std::move(params)) {
    const std::size_t n = params_.poly_degree;
    if (!ring::is_power_of_two(n) || n < 4) {
      throw ConfigError("ckks.poly_degree", "must be a power of two >= 4");
    }
    if (params_.bit_sizes.empty()) {
      throw ConfigError("ckks.bit_sizes", "at least one prime is required");
    }
    if (params_.scale_log2 < 1 || params_.scale_log2 > 60) {
      throw ConfigError("ckks.scale_log2", "must lie in [1, 60]");
    }
    if (!(params_.sigma > 0.0)) {
      throw ConfigError("ckks.sigma", "must be positive");
    }
    if (params_.bit_sizes.front() <= params_.scale_log2) {
      throw ConfigError("ckks.bit_sizes",
                        "first prime must be wider than the scale");
    }
    for (std::size_t i = 1; i < params_.bit_sizes.size(); ++i) {
      if (params_.bit_sizes[i] < params_.scale_log2) {
        throw ConfigError("ckks.bit_sizes",
                          "rescale primes must be at least as wide as the scale");
      }
    }

    const auto generated = ring::ModulusChain::generate(n, params_.bit_sizes);
    std::vector<std::size_t> order(generated.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin() + 1, order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return params_.bit_sizes[a] > params_.bit_sizes[b];
                     });
    std::vector<u64> primes;
    for (std::size_t i : order) primes.push_back(generated[i]);
    chain_ = ring::ModulusChain(n, std::move(primes));
    embedding_ = std::make_shared<const CanonicalEmbedding>(n);
  }

  const CkksParameters& parameters() const noexcept { return params_; }
  std::size_t degree() const noexcept { return params_.poly_degree; }
  std::size_t slot_count() const noexcept { return params_.poly_degree / 2; }
  std::size_t top_level() const noexcept { return chain_.size(); }
  double scale() const noexcept { return std::ldexp(1.0, params_.scale_log2); }
  double sigma() const noexcept { return params_.sigma; }
  const ring::ModulusChain& chain() const noexcept { return chain_; }
  std::vector<u64> primes_at(std::size_t level) const {
    return chain_.prefix(level);
  }
  const CanonicalEmbedding& embedding() const noexcept { return *embedding_; }

 private:
  CkksParameters params_;
  ring::ModulusChain chain_;
  std::shared_ptr<const CanonicalEmbedding> embedding_;
};

}  // namespace fhe_fedsim::ckks
