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
#include <vector>

#include "fhe_fedsim/ckks/ciphertext.hpp"
#include "fhe_fedsim/ckks/context.hpp"
#include "fhe_fedsim/ckks/encoder.hpp"
#include "fhe_fedsim/ckks/keys.hpp"
#include "fhe_fedsim/ckks/tolerances.hpp"
#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/ring/sampler.hpp"

namespace fhe_fedsim::ckks {

// Public-key RLWE encryption: c0 = b*u + e0 + m, c1 = a*u + e1.
inline Ciphertext encrypt(const CkksContext& ctx, const Plaintext& pt,
                          const PublicKey& pk, ring::Rng& rng) {
  const std::size_t level = pt.level();
  if (level == 0 || level > pk.b.level() || pt.poly.degree() != ctx.degree()) {
    throw StructuralError("encrypt: plaintext does not fit the public key");
  }
  const auto primes = ctx.primes_at(level);
  const std::size_t n = ctx.degree();
  auto u = ring::sample_poly(ring::Distribution::ternary, n, primes, rng);
  u.transform_to_ntt();
  const auto e0 =
      ring::sample_poly(ring::Distribution::gaussian, n, primes, rng, ctx.sigma());
  const auto e1 =
      ring::sample_poly(ring::Distribution::gaussian, n, primes, rng, ctx.sigma());

  // b*u and a*u straight from the key's leading components, no prefix copies.
  ring::RnsPoly c0(n, primes, ring::Domain::ntt);
  ring::RnsPoly c1(n, primes, ring::Domain::ntt);
  for (std::size_t i = 0; i < level; ++i) {
    const ring::BarrettReducer reducer(primes[i]);
    const auto b = pk.b.component(i);
    const auto a = pk.a.component(i);
    const auto ui = u.component(i);
    auto d0 = c0.component(i);
    auto d1 = c1.component(i);
    for (std::size_t j = 0; j < n; ++j) {
      d0[j] = reducer.mul(b[j], ui[j]);
      d1[j] = reducer.mul(a[j], ui[j]);
    }
  }
  c0.transform_to_coefficient();
  c1.transform_to_coefficient();
  ring::add_inplace(c0, e0);
  if (pt.poly.domain() == ring::Domain::coefficient) {
    ring::add_inplace(c0, pt.poly);
  } else {
    ring::add_inplace(c0, pt.poly.to_coefficient());
  }
  ring::add_inplace(c1, e1);
  return {std::move(c0), std::move(c1), pt.scale};
}

inline Plaintext decrypt(const Ciphertext& ct, const SecretKey& sk) {
  const auto& s = sk.poly();
  if (ct.level() > s.level() || ct.degree() != s.degree()) {
    throw StructuralError("decrypt: ciphertext does not match the secret key");
  }
  const auto c1s =
      ring::pointwise_mul(ct.c1.to_ntt(), s.prefix(ct.level())).to_coefficient();
  return {ring::add(ct.c0.to_coefficient(), c1s), ct.scale};
}

namespace detail {

inline bool scales_match(double a, double b) {
  return std::fabs(a - b) <= tolerance::kScaleMatch * std::max(a, b);
}

}  // namespace detail

inline Ciphertext ct_add(const Ciphertext& x, const Ciphertext& y) {
  if (x.level() != y.level()) throw StructuralError("ct_add: level mismatch");
  if (!detail::scales_match(x.scale, y.scale)) {
    throw StructuralError("ct_add: scale mismatch");
  }
  return {ring::add(x.c0, y.c0), ring::add(x.c1, y.c1), x.scale};
}

// Ciphertext times plaintext. The result scale is the product of scales.
// Constant plaintexts (scalar weights) multiply coefficient-wise; anything
// else goes through the NTT.
inline Ciphertext ct_mul_plain(const Ciphertext& x, const Plaintext& w) {
  if (x.level() != w.level()) {
    throw StructuralError("ct_mul_plain: level mismatch");
  }
  if (x.degree() != w.poly.degree()) {
    throw StructuralError("ct_mul_plain: degree mismatch");
  }
  const double scale = x.scale * w.scale;
  const auto wp = w.poly.to_coefficient();
  if (wp.is_constant()) {
    std::vector<u64> scalar(wp.level());
    for (std::size_t k = 0; k < wp.level(); ++k) scalar[k] = wp.component(k)[0];
    return {ring::mul_scalar(x.c0, scalar), ring::mul_scalar(x.c1, scalar), scale};
  }
  const auto wn = wp.to_ntt();
  return {ring::pointwise_mul(x.c0.to_ntt(), wn).to_coefficient(),
          ring::pointwise_mul(x.c1.to_ntt(), wn).to_coefficient(), scale};
}

// Divides by the last prime: level decreases by one and the scale by q_last.
inline Ciphertext rescale(const Ciphertext& x) {
  if (x.level() < 2) throw LevelExhaustedError("rescale: no level left");
  const double q_last = static_cast<double>(x.c0.primes().back());
  return {ring::drop_last_prime(x.c0, true), ring::drop_last_prime(x.c1, true),
          x.scale / q_last};
}

}  // namespace fhe_fedsim::ckks
