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

// Error budgets for CKKS at scale 2^40 with sigma 3.2. Tests, the
// acceptance suite and the README all read these values.
namespace fhe_fedsim::ckks::tolerance {

// decode(encode(v)) for |v| <= 10^3.
inline constexpr double kEncodeRoundTrip = 1e-7;

// Dec(Enc(v)) for a fresh ciphertext, |v| <= 10^3.
inline constexpr double kFreshCiphertext = 1e-6;

// One add or one plaintext multiply followed by rescale.
inline constexpr double kHomomorphicOp = 1e-5;

// Encrypted weighted average against the plaintext average.
inline constexpr double kAggregation = 1e-4;

// Relative scale mismatch tolerated by ciphertext addition (2^-30).
inline constexpr double kScaleMatch = 1.0 / 1073741824.0;

}  // namespace fhe_fedsim::ckks::tolerance
