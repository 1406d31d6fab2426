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

#include "fhe_fedsim/ckks/context.hpp"
#include "fhe_fedsim/common/access_audit.hpp"
#include "fhe_fedsim/ring/rns_poly.hpp"
#include "fhe_fedsim/ring/sampler.hpp"

namespace fhe_fedsim::ckks {

// Ternary secret s, kept in NTT form at the top level. Every read goes
// through poly(), which reports the access to the role audit.
class SecretKey {
 public:
  explicit SecretKey(ring::RnsPoly s) : s_(std::move(s)) {}

  const ring::RnsPoly& poly() const {
    audit::note_secret_key_access();
    return s_;
  }

  friend bool operator==(const SecretKey& a, const SecretKey& b) {
    return a.s_ == b.s_;
  }

 private:
  ring::RnsPoly s_;
};

// (b, a) = (-a*s + e, a) in NTT form at the top level.
struct PublicKey {
  ring::RnsPoly b;
  ring::RnsPoly a;

  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

struct KeyPair {
  SecretKey secret;
  PublicKey pub;
};

inline KeyPair keygen(const CkksContext& ctx, ring::Rng& rng) {
  const auto primes = ctx.primes_at(ctx.top_level());
  const std::size_t n = ctx.degree();
  const auto s = ring::sample_poly(ring::Distribution::ternary, n, primes, rng)
                     .to_ntt();
  const auto a = ring::sample_poly(ring::Distribution::uniform, n, primes, rng)
                     .to_ntt();
  const auto e =
      ring::sample_poly(ring::Distribution::gaussian, n, primes, rng, ctx.sigma())
          .to_ntt();
  auto b = ring::add(ring::negate(ring::pointwise_mul(a, s)), e);
  return {SecretKey(s), PublicKey{std::move(b), a}};
}

}  // namespace fhe_fedsim::ckks
