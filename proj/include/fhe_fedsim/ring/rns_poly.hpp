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
#include <span>
#include <string>
#include <vector>

#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/ring/modarith.hpp"
#include "fhe_fedsim/ring/modulus_chain.hpp"
#include "fhe_fedsim/ring/ntt.hpp"

namespace fhe_fedsim::ring {

enum class Domain { coefficient, ntt };

// Element of Z_Q[X]/(X^N + 1) stored as one length-N residue vector per
// active prime. Residues are always reduced.
class RnsPoly {
 public:
  RnsPoly() = default;

  // Zero polynomial.
  RnsPoly(std::size_t degree, std::vector<u64> primes,
          Domain domain = Domain::coefficient)
      : degree_(degree),
        primes_(std::move(primes)),
        domain_(domain),
        data_(degree_ * primes_.size(), 0) {
    if (!is_power_of_two(degree_) || degree_ < 2) {
      throw StructuralError("degree must be a power of two >= 2");
    }
    if (primes_.empty()) throw StructuralError("no active primes");
  }

  // Lifts one signed coefficient vector to every prime.
  static RnsPoly from_signed(std::span<const std::int64_t> coeffs,
                             std::vector<u64> primes) {
    RnsPoly p(coeffs.size(), std::move(primes));
    for (std::size_t i = 0; i < p.level(); ++i) {
      auto comp = p.component(i);
      const u64 q = p.primes_[i];
      for (std::size_t j = 0; j < p.degree_; ++j) {
        // Branch-free for |v| < q; anything else lands >= q and is redone.
        const std::int64_t v = coeffs[j];
        const u64 r = static_cast<u64>(v) + (q & static_cast<u64>(v >> 63));
        comp[j] = r < q ? r : reduce_signed(v, q);
      }
    }
    return p;
  }

  std::size_t degree() const noexcept { return degree_; }
  std::size_t level() const noexcept { return primes_.size(); }
  const std::vector<u64>& primes() const noexcept { return primes_; }
  Domain domain() const noexcept { return domain_; }

  std::span<u64> component(std::size_t i) {
    return {data_.data() + i * degree_, degree_};
  }
  std::span<const u64> component(std::size_t i) const {
    return {data_.data() + i * degree_, degree_};
  }

  bool same_structure(const RnsPoly& other) const noexcept {
    return degree_ == other.degree_ && primes_ == other.primes_ &&
           domain_ == other.domain_;
  }

  bool is_zero() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](u64 v) { return v == 0; });
  }

  // True when every non-constant coefficient is zero (coefficient form only).
  bool is_constant() const noexcept {
    if (domain_ != Domain::coefficient) return false;
    for (std::size_t i = 0; i < level(); ++i) {
      auto c = component(i);
      if (!std::all_of(c.begin() + 1, c.end(), [](u64 v) { return v == 0; })) {
        return false;
      }
    }
    return true;
  }

  void transform_to_ntt() {
    if (domain_ == Domain::ntt) return;
    for (std::size_t i = 0; i < level(); ++i) {
      ntt_tables(primes_[i], degree_).forward(component(i));
    }
    domain_ = Domain::ntt;
  }

  void transform_to_coefficient() {
    if (domain_ == Domain::coefficient) return;
    for (std::size_t i = 0; i < level(); ++i) {
      ntt_tables(primes_[i], degree_).inverse(component(i));
    }
    domain_ = Domain::coefficient;
  }

  RnsPoly to_ntt() const {
    RnsPoly r = *this;
    r.transform_to_ntt();
    return r;
  }

  RnsPoly to_coefficient() const {
    RnsPoly r = *this;
    r.transform_to_coefficient();
    return r;
  }

  // Keeps the first `count` components (no scaling).
  RnsPoly prefix(std::size_t count) const {
    if (count == 0 || count > level()) {
      throw StructuralError("prefix length out of range");
    }
    RnsPoly r;
    r.degree_ = degree_;
    r.primes_.assign(primes_.begin(), primes_.begin() + static_cast<long>(count));
    r.domain_ = domain_;
    r.data_.assign(data_.begin(),
                   data_.begin() + static_cast<long>(count * degree_));
    return r;
  }

  friend bool operator==(const RnsPoly&, const RnsPoly&) = default;

 private:
  std::size_t degree_ = 0;
  std::vector<u64> primes_;
  Domain domain_ = Domain::coefficient;
  std::vector<u64> data_;
};

namespace detail {

inline void require_same(const RnsPoly& a, const RnsPoly& b, const char* op) {
  if (a.degree() != b.degree()) {
    throw StructuralError(std::string(op) + ": degree mismatch");
  }
  if (a.primes() != b.primes()) {
    throw StructuralError(std::string(op) + ": prime set mismatch");
  }
  if (a.domain() != b.domain()) {
    throw StructuralError(std::string(op) + ": domain mismatch");
  }
}

template <typename F>
RnsPoly zip(const RnsPoly& a, const RnsPoly& b, F&& f) {
  RnsPoly r = a;
  for (std::size_t i = 0; i < a.level(); ++i) {
    const u64 q = a.primes()[i];
    auto dst = r.component(i);
    auto rhs = b.component(i);
    for (std::size_t j = 0; j < a.degree(); ++j) dst[j] = f(dst[j], rhs[j], q);
  }
  return r;
}

}  // namespace detail

inline RnsPoly add(const RnsPoly& a, const RnsPoly& b) {
  detail::require_same(a, b, "add");
  return detail::zip(a, b, add_mod);
}

// a += b over the primes of a; b may carry extra trailing primes.
inline void add_inplace(RnsPoly& a, const RnsPoly& b) {
  if (a.degree() != b.degree() || a.domain() != b.domain() ||
      b.level() < a.level() ||
      !std::equal(a.primes().begin(), a.primes().end(), b.primes().begin())) {
    throw StructuralError("add_inplace: structure mismatch");
  }
  for (std::size_t i = 0; i < a.level(); ++i) {
    const u64 q = a.primes()[i];
    auto dst = a.component(i);
    auto rhs = b.component(i);
    for (std::size_t j = 0; j < a.degree(); ++j) dst[j] = add_mod(dst[j], rhs[j], q);
  }
}

inline RnsPoly sub(const RnsPoly& a, const RnsPoly& b) {
  detail::require_same(a, b, "sub");
  return detail::zip(a, b, sub_mod);
}

inline RnsPoly negate(const RnsPoly& a) {
  RnsPoly r = a;
  for (std::size_t i = 0; i < a.level(); ++i) {
    const u64 q = a.primes()[i];
    for (auto& v : r.component(i)) v = negate_mod(v, q);
  }
  return r;
}

// Pointwise product; both operands must already be in NTT form.
inline RnsPoly pointwise_mul(const RnsPoly& a, const RnsPoly& b) {
  detail::require_same(a, b, "pointwise_mul");
  if (a.domain() != Domain::ntt) {
    throw StructuralError("pointwise_mul: operands must be in NTT form");
  }
  RnsPoly r = a;
  for (std::size_t i = 0; i < a.level(); ++i) {
    const BarrettReducer reducer(a.primes()[i]);
    auto dst = r.component(i);
    auto rhs = b.component(i);
    for (std::size_t j = 0; j < a.degree(); ++j) {
      dst[j] = reducer.mul(dst[j], rhs[j]);
    }
  }
  return r;
}

// Product in Z_Q[X]/(X^N + 1). The result keeps the operands' domain.
inline RnsPoly negacyclic_mul(const RnsPoly& a, const RnsPoly& b) {
  detail::require_same(a, b, "negacyclic_mul");
  if (a.domain() == Domain::ntt) return pointwise_mul(a, b);
  return pointwise_mul(a.to_ntt(), b.to_ntt()).to_coefficient();
}

// Multiplies every coefficient by an integer constant given per prime.
inline RnsPoly mul_scalar(const RnsPoly& a, std::span<const u64> scalar) {
  if (scalar.size() != a.level()) {
    throw StructuralError("mul_scalar: one residue per prime required");
  }
  RnsPoly r = a;
  for (std::size_t i = 0; i < a.level(); ++i) {
    const u64 q = a.primes()[i];
    const ShoupOperand s(scalar[i] % q, q);
    for (auto& v : r.component(i)) v = mul_shoup(v, s, q);
  }
  return r;
}

// Removes the last residue component. With `round` the result approximates
// a / q_last (divide-and-round in RNS); without it the value is merely
// projected onto the smaller modulus. The input domain is preserved.
inline RnsPoly drop_last_prime(const RnsPoly& a, bool round) {
  if (a.level() < 2) {
    throw LevelExhaustedError("drop_last_prime: only one prime left");
  }
  const std::size_t keep = a.level() - 1;
  if (!round) return a.prefix(keep);

  const RnsPoly coeff = a.to_coefficient();
  const u64 q_last = a.primes().back();
  const u64 half = q_last >> 1;
  auto last = coeff.component(keep);

  RnsPoly r = coeff.prefix(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const u64 q = a.primes()[i];
    const u64 half_mod = half % q;
    const ShoupOperand inv_last(inverse_mod(q_last % q, q), q);
    auto dst = r.component(i);
    for (std::size_t j = 0; j < a.degree(); ++j) {
      // (last + half) mod q_last is the centered remainder shifted by half.
      const u64 shifted = add_mod(last[j], half, q_last);
      const u64 correction = sub_mod(shifted % q, half_mod, q);
      dst[j] = mul_shoup(sub_mod(dst[j], correction, q), inv_last, q);
    }
  }
  return a.domain() == Domain::ntt ? r.to_ntt() : r;
}

}  // namespace fhe_fedsim::ring
