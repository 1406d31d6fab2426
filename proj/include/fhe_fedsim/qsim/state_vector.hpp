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
#include <vector>

#include "fhe_fedsim/common/error.hpp"

namespace fhe_fedsim::qsim {

using Complex = std::complex<double>;

inline constexpr std::size_t kMaxQubits = 12;

// Dense 2^n amplitude vector. Wire w is bit w of the basis index
// (little-endian), so wire 0 is the least significant bit.
class StateVector {
 public:
  explicit StateVector(std::size_t n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits == 0 || n_qubits > kMaxQubits) {
      throw StructuralError("qubit count must be in [1, 12]");
    }
    amplitudes_.assign(std::size_t{1} << n_qubits, Complex{0.0, 0.0});
    amplitudes_[0] = 1.0;
  }

  std::size_t n_qubits() const noexcept { return n_qubits_; }
  std::size_t dimension() const noexcept { return amplitudes_.size(); }
  std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
  std::span<Complex> amplitudes() noexcept { return amplitudes_; }

  double norm_squared() const noexcept {
    double s = 0.0;
    for (const auto& a : amplitudes_) s += std::norm(a);
    return s;
  }

  void apply_rx(double theta, std::size_t wire) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    apply_1q(wire, Complex{c, 0}, Complex{0, -s}, Complex{0, -s}, Complex{c, 0});
  }

  void apply_ry(double theta, std::size_t wire) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    apply_1q(wire, Complex{c, 0}, Complex{-s, 0}, Complex{s, 0}, Complex{c, 0});
  }

  // diag(e^{-i theta/2}, e^{i theta/2})
  void apply_rz(double theta, std::size_t wire) {
    check_wire(wire);
    const Complex lo = std::polar(1.0, -theta / 2);
    const Complex hi = std::polar(1.0, theta / 2);
    const std::size_t bit = std::size_t{1} << wire;
    for (std::size_t i = 0; i < amplitudes_.size(); ++i) {
      amplitudes_[i] *= (i & bit) ? hi : lo;
    }
  }

  void apply_cnot(std::size_t control, std::size_t target) {
    check_wire(control);
    check_wire(target);
    if (control == target) throw StructuralError("CNOT needs two distinct wires");
    const std::size_t cbit = std::size_t{1} << control;
    const std::size_t tbit = std::size_t{1} << target;
    for (std::size_t i = 0; i < amplitudes_.size(); ++i) {
      if ((i & cbit) && !(i & tbit)) std::swap(amplitudes_[i], amplitudes_[i | tbit]);
    }
  }

  // <Z_w> = P(bit w = 0) - P(bit w = 1).
  double expectation_z(std::size_t wire) const {
    check_wire(wire);
    const std::size_t bit = std::size_t{1} << wire;
    double e = 0.0;
    for (std::size_t i = 0; i < amplitudes_.size(); ++i) {
      e += (i & bit) ? -std::norm(amplitudes_[i]) : std::norm(amplitudes_[i]);
    }
    return e;
  }

 private:
  void check_wire(std::size_t wire) const {
    if (wire >= n_qubits_) throw StructuralError("wire index out of range");
  }

  // [[m00, m01], [m10, m11]] acting on `wire`.
  void apply_1q(std::size_t wire, Complex m00, Complex m01, Complex m10,
                Complex m11) {
    check_wire(wire);
    const std::size_t bit = std::size_t{1} << wire;
    for (std::size_t i = 0; i < amplitudes_.size(); ++i) {
      if (i & bit) continue;
      const Complex a0 = amplitudes_[i];
      const Complex a1 = amplitudes_[i | bit];
      amplitudes_[i] = m00 * a0 + m01 * a1;
      amplitudes_[i | bit] = m10 * a0 + m11 * a1;
    }
  }

  std::size_t n_qubits_;
  std::vector<Complex> amplitudes_;
};

}  // namespace fhe_fedsim::qsim
