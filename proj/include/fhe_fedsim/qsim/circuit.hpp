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
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/qsim/state_vector.hpp"

namespace fhe_fedsim::qsim {

enum class GateKind { rx, ry, rz, cnot };

enum class AngleSource { constant, param, input };

// Rotation angle = coeff * value + offset, where value is a trainable
// parameter, an input feature, or zero for constant angles.
struct Angle {
  AngleSource source = AngleSource::constant;
  std::size_t index = 0;
  double coeff = 1.0;
  double offset = 0.0;

  static Angle constant(double value) { return {AngleSource::constant, 0, 0.0, value}; }
  static Angle param(std::size_t j, double coeff = 1.0) {
    return {AngleSource::param, j, coeff, 0.0};
  }
  static Angle input(std::size_t i, double coeff = 1.0) {
    return {AngleSource::input, i, coeff, 0.0};
  }
};

struct Gate {
  GateKind kind = GateKind::rx;
  std::size_t wire = 0;    // rotation wire, or control for CNOT
  std::size_t target = 0;  // CNOT only
  Angle angle;
};

inline void apply_gate(StateVector& state, const Gate& gate, double angle) {
  switch (gate.kind) {
    case GateKind::rx: state.apply_rx(angle, gate.wire); return;
    case GateKind::ry: state.apply_ry(angle, gate.wire); return;
    case GateKind::rz: state.apply_rz(angle, gate.wire); return;
    case GateKind::cnot: state.apply_cnot(gate.wire, gate.target); return;
  }
}

// Ordered gate list over a fixed register, with symbolic angles bound to
// parameter and input vectors at evaluation time.
class Circuit {
 public:
  Circuit(std::size_t n_qubits, std::size_t n_inputs, std::size_t n_params)
      : n_qubits_(n_qubits), n_inputs_(n_inputs), n_params_(n_params) {
    if (n_qubits == 0 || n_qubits > kMaxQubits) {
      throw StructuralError("qubit count must be in [1, 12]");
    }
  }

  std::size_t n_qubits() const noexcept { return n_qubits_; }
  std::size_t n_inputs() const noexcept { return n_inputs_; }
  std::size_t n_params() const noexcept { return n_params_; }
  const std::vector<Gate>& ops() const noexcept { return ops_; }

  Circuit& rx(std::size_t wire, Angle a) { return rotation(GateKind::rx, wire, a); }
  Circuit& ry(std::size_t wire, Angle a) { return rotation(GateKind::ry, wire, a); }
  Circuit& rz(std::size_t wire, Angle a) { return rotation(GateKind::rz, wire, a); }

  Circuit& cnot(std::size_t control, std::size_t target) {
    check_wire(control);
    check_wire(target);
    if (control == target) throw StructuralError("CNOT needs two distinct wires");
    ops_.push_back({GateKind::cnot, control, target, Angle::constant(0.0)});
    return *this;
  }

  // Controlled RY as RY(t/2), CNOT, RY(-t/2), CNOT on the target, which
  // keeps every gate a single-angle rotation for the shift rule.
  Circuit& cry(std::size_t control, std::size_t target, Angle a) {
    Angle half = a, neg_half = a;
    half.coeff *= 0.5;
    half.offset *= 0.5;
    neg_half.coeff *= -0.5;
    neg_half.offset *= -0.5;
    ry(target, half);
    cnot(control, target);
    ry(target, neg_half);
    return cnot(control, target);
  }

  // Appends `other`, which must act on the same register and bindings.
  Circuit& append(const Circuit& other) {
    if (other.n_qubits_ != n_qubits_ || other.n_inputs_ > n_inputs_ ||
        other.n_params_ > n_params_) {
      throw StructuralError("append: incompatible circuits");
    }
    ops_.insert(ops_.end(), other.ops_.begin(), other.ops_.end());
    return *this;
  }

  // Op indices whose angle reads parameter j (or input i).
  std::vector<std::size_t> param_slots(std::size_t j) const {
    return slots(AngleSource::param, j);
  }
  std::vector<std::size_t> input_slots(std::size_t i) const {
    return slots(AngleSource::input, i);
  }

  // Every declared parameter must drive at least one gate.
  void validate() const {
    for (std::size_t j = 0; j < n_params_; ++j) {
      if (param_slots(j).empty()) {
        throw StructuralError("parameter " + std::to_string(j) + " drives no gate");
      }
    }
  }

  double resolve(const Gate& g, std::span<const double> inputs,
                 std::span<const double> params) const {
    switch (g.angle.source) {
      case AngleSource::constant: return g.angle.offset;
      case AngleSource::param: return g.angle.coeff * params[g.angle.index] + g.angle.offset;
      case AngleSource::input: return g.angle.coeff * inputs[g.angle.index] + g.angle.offset;
    }
    return 0.0;
  }

  void check_shapes(std::span<const double> inputs,
                    std::span<const double> params) const {
    if (inputs.size() != n_inputs_) {
      throw StructuralError("expected " + std::to_string(n_inputs_) +
                            " inputs, got " + std::to_string(inputs.size()));
    }
    if (params.size() != n_params_) {
      throw StructuralError("expected " + std::to_string(n_params_) +
                            " parameters, got " + std::to_string(params.size()));
    }
  }

  StateVector run(std::span<const double> inputs,
                  std::span<const double> params) const {
    check_shapes(inputs, params);
    StateVector state(n_qubits_);
    for (const auto& g : ops_) apply_gate(state, g, resolve(g, inputs, params));
    return state;
  }

 private:
  Circuit& rotation(GateKind kind, std::size_t wire, Angle a) {
    check_wire(wire);
    if (a.source == AngleSource::param && a.index >= n_params_) {
      throw StructuralError("parameter index out of range");
    }
    if (a.source == AngleSource::input && a.index >= n_inputs_) {
      throw StructuralError("input index out of range");
    }
    ops_.push_back({kind, wire, 0, a});
    return *this;
  }

  void check_wire(std::size_t wire) const {
    if (wire >= n_qubits_) throw StructuralError("wire index out of range");
  }

  std::vector<std::size_t> slots(AngleSource src, std::size_t index) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < ops_.size(); ++k) {
      const auto& a = ops_[k].angle;
      if (ops_[k].kind != GateKind::cnot && a.source == src && a.index == index) {
        out.push_back(k);
      }
    }
    return out;
  }

  std::size_t n_qubits_;
  std::size_t n_inputs_;
  std::size_t n_params_;
  std::vector<Gate> ops_;
};

inline std::vector<double> readout_z(const StateVector& state,
                                     std::span<const std::size_t> wires) {
  std::vector<double> out;
  out.reserve(wires.size());
  for (auto w : wires) out.push_back(state.expectation_z(w));
  return out;
}

inline std::vector<double> expectations(const Circuit& circuit,
                                        std::span<const double> inputs,
                                        std::span<const double> params,
                                        std::span<const std::size_t> readout) {
  return readout_z(circuit.run(inputs, params), readout);
}

// Row-major Jacobians: d_params[r * n_params + j] = d<Z_{readout r}>/d phi_j,
// and likewise for inputs.
struct Jacobians {
  std::size_t n_readout = 0;
  std::vector<double> d_params;
  std::vector<double> d_inputs;
};

// Two-term shift rule per gate slot: for angle = c*v + o,
// d f/d v = c * (f(angle + pi/2) - f(angle - pi/2)) / 2, summed over every
// slot sharing v. States before each gate are cached so a shifted run only
// replays the suffix.
inline Jacobians param_shift_grad(const Circuit& circuit,
                                  std::span<const double> inputs,
                                  std::span<const double> params,
                                  std::span<const std::size_t> readout) {
  circuit.check_shapes(inputs, params);
  const auto& ops = circuit.ops();
  std::vector<StateVector> prefix;
  prefix.reserve(ops.size());
  std::vector<double> angles(ops.size());
  StateVector state(circuit.n_qubits());
  for (std::size_t k = 0; k < ops.size(); ++k) {
    prefix.push_back(state);
    angles[k] = circuit.resolve(ops[k], inputs, params);
    apply_gate(state, ops[k], angles[k]);
  }

  const std::size_t nr = readout.size();
  Jacobians jac;
  jac.n_readout = nr;
  jac.d_params.assign(nr * circuit.n_params(), 0.0);
  jac.d_inputs.assign(nr * circuit.n_inputs(), 0.0);

  const auto shifted = [&](std::size_t k, double delta) {
    StateVector s = prefix[k];
    apply_gate(s, ops[k], angles[k] + delta);
    for (std::size_t m = k + 1; m < ops.size(); ++m) apply_gate(s, ops[m], angles[m]);
    return readout_z(s, readout);
  };

  constexpr double kShift = std::numbers::pi / 2;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    const auto& a = ops[k].angle;
    if (ops[k].kind == GateKind::cnot || a.source == AngleSource::constant) continue;
    const auto plus = shifted(k, kShift);
    const auto minus = shifted(k, -kShift);
    auto& dst = a.source == AngleSource::param ? jac.d_params : jac.d_inputs;
    const std::size_t width =
        a.source == AngleSource::param ? circuit.n_params() : circuit.n_inputs();
    for (std::size_t r = 0; r < nr; ++r) {
      dst[r * width + a.index] += a.coeff * (plus[r] - minus[r]) / 2;
    }
  }
  return jac;
}

}  // namespace fhe_fedsim::qsim
