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

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/ring/rns_poly.hpp"

namespace fhe_fedsim::ring {

// Deterministic generator used for every sampler. Not a CSPRNG: the
// simulator measures overhead and correctness, not security.
using Rng = std::mt19937_64;

inline constexpr double kDefaultSigma = 3.2;

enum class Distribution { uniform, ternary, gaussian };

namespace detail {

// Maps the high 32 bits of a draw onto [0, range) by multiply-shift.
inline std::uint64_t bounded(std::uint64_t draw, std::uint64_t range) noexcept {
  return ((draw >> 32) * range) >> 32;
}

}  // namespace detail

// Discrete gaussian on Z truncated at 6 sigma, sampled by inversion of a
// cumulative table: one 64-bit draw and a short guided scan per sample.
class DiscreteGaussian {
 public:
  explicit DiscreteGaussian(double sigma = kDefaultSigma) : sigma_(sigma) {
    if (!(sigma > 0.0)) throw ConfigError("sigma", "must be positive");
    bound_ = static_cast<std::int64_t>(std::floor(6.0 * sigma));
    std::vector<double> weights;
    double total = 0.0;
    for (std::int64_t x = -bound_; x <= bound_; ++x) {
      weights.push_back(
          std::exp(-static_cast<double>(x * x) / (2.0 * sigma * sigma)));
      total += weights.back();
    }
    // cumulative_[i] = P(X <= i - bound) scaled to 2^64, last entry saturated.
    cumulative_.resize(weights.size());
    double running = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      running += weights[i] / total;
      cumulative_[i] = running >= 1.0
                           ? ~std::uint64_t{0}
                           : static_cast<std::uint64_t>(std::ldexp(running, 64));
    }
    cumulative_.back() = ~std::uint64_t{0};
    // guide_[h] is the first entry whose top byte reaches h, so a search
    // starts at most a few steps short of its answer.
    for (std::size_t h = 0; h < guide_.size(); ++h) {
      std::size_t i = 0;
      while ((cumulative_[i] >> 56) < h) ++i;
      guide_[h] = static_cast<std::uint8_t>(i);
    }
  }

  double sigma() const noexcept { return sigma_; }
  std::int64_t bound() const noexcept { return bound_; }

  std::int64_t operator()(Rng& rng) const {
    const std::uint64_t draw = rng();
    std::size_t i = guide_[draw >> 56];
    while (cumulative_[i] < draw) ++i;
    return static_cast<std::int64_t>(i) - bound_;
  }

 private:
  double sigma_;
  std::int64_t bound_ = 0;
  std::vector<std::uint64_t> cumulative_;
  std::array<std::uint8_t, 256> guide_{};
};

inline std::vector<std::int64_t> sample_ternary_coeffs(std::size_t degree,
                                                       Rng& rng) {
  std::vector<std::int64_t> c(degree);
  for (auto& v : c) v = static_cast<std::int64_t>(detail::bounded(rng(), 3)) - 1;
  return c;
}

inline std::vector<std::int64_t> sample_gaussian_coeffs(
    std::size_t degree, const DiscreteGaussian& gaussian, Rng& rng) {
  std::vector<std::int64_t> c(degree);
  for (auto& v : c) v = gaussian(rng);
  return c;
}

// Coefficient-form sample. Ternary and gaussian draw one integer vector and
// lift it to every prime; uniform draws each residue independently.
inline RnsPoly sample_poly(Distribution kind, std::size_t degree,
                           const std::vector<u64>& primes, Rng& rng,
                           double sigma = kDefaultSigma) {
  switch (kind) {
    case Distribution::uniform: {
      RnsPoly p(degree, primes);
      for (std::size_t i = 0; i < primes.size(); ++i) {
        std::uniform_int_distribution<u64> pick(0, primes[i] - 1);
        for (auto& v : p.component(i)) v = pick(rng);
      }
      return p;
    }
    case Distribution::ternary:
      return RnsPoly::from_signed(sample_ternary_coeffs(degree, rng), primes);
    case Distribution::gaussian:
      return RnsPoly::from_signed(
          sample_gaussian_coeffs(degree, DiscreteGaussian(sigma), rng), primes);
  }
  throw StructuralError("unknown distribution");
}

}  // namespace fhe_fedsim::ring
