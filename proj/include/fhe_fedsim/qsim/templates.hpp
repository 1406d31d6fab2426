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
#include <vector>

#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/qsim/circuit.hpp"

namespace fhe_fedsim::qsim {

// RX(x_i) on wire i.
inline Circuit angle_embed(std::size_t n_qubits) {
  Circuit c(n_qubits, n_qubits, 0);
  for (std::size_t w = 0; w < n_qubits; ++w) c.rx(w, Angle::input(w));
  return c;
}

// Per layer: RX(phi[layer][w]) on every wire, then a CNOT ring
// w -> w+1 mod n (a single CNOT for two wires, none for one).
inline Circuit basic_entangler(std::size_t n_qubits, std::size_t n_layers) {
  if (n_layers == 0) throw StructuralError("basic_entangler: need at least one layer");
  Circuit c(n_qubits, 0, n_qubits * n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    for (std::size_t w = 0; w < n_qubits; ++w) c.rx(w, Angle::param(l * n_qubits + w));
    if (n_qubits == 2) {
      c.cnot(0, 1);
    } else if (n_qubits > 2) {
      for (std::size_t w = 0; w < n_qubits; ++w) c.cnot(w, (w + 1) % n_qubits);
    }
  }
  return c;
}

inline std::size_t qcnn_stage_count(std::size_t n_qubits) {
  if (n_qubits < 4 || (n_qubits & (n_qubits - 1)) != 0) {
    throw StructuralError("qcnn: qubit count must be a power of two >= 4");
  }
  std::size_t stages = 0;
  for (std::size_t n = n_qubits; n > 1; n >>= 1) ++stages;
  return stages;
}

inline std::size_t qcnn_param_count(std::size_t n_qubits) {
  return 6 * qcnn_stage_count(n_qubits) + 3;
}

// Wires read out after the QCNN: the four quarter marks, {0, 2, 4, 6} at 8.
inline std::vector<std::size_t> qcnn_readout_wires(std::size_t n_qubits) {
  qcnn_stage_count(n_qubits);
  const std::size_t q = n_qubits / 4;
  return {0, q, 2 * q, 3 * q};
}

// Quantum convolutional network. Each stage pairs up the active wires
// (a0,a1), (a2,a3), ... and applies, with 3 shared conv parameters,
//   RY(c0) a_even, RY(c1) a_odd, CNOT a_even -> a_odd, RY(c2) on both,
// then pools with 3 shared parameters: CRY(p0) controlled by the odd wire
// onto the even one, followed by RZ(p1) and RY(p2) on the even survivor.
// Odd wires are never touched again, so 8 -> 4 -> 2 -> 1 active wires.
// A final RZ.RY.RZ block with 3 shared parameters acts on the readout wires.
// The layout is a modeling choice sized to 6 * stages + 3 parameters
// (21 at eight qubits) and four readouts.
inline Circuit qcnn_circuit(std::size_t n_qubits = 8) {
  const std::size_t stages = qcnn_stage_count(n_qubits);
  Circuit c(n_qubits, 0, 6 * stages + 3);
  std::vector<std::size_t> active(n_qubits);
  for (std::size_t w = 0; w < n_qubits; ++w) active[w] = w;
  for (std::size_t s = 0; s < stages; ++s) {
    const std::size_t base = 6 * s;
    std::vector<std::size_t> survivors;
    for (std::size_t k = 0; k + 1 < active.size(); k += 2) {
      const std::size_t a = active[k], b = active[k + 1];
      c.ry(a, Angle::param(base)).ry(b, Angle::param(base + 1)).cnot(a, b);
      c.ry(a, Angle::param(base + 2)).ry(b, Angle::param(base + 2));
    }
    for (std::size_t k = 0; k + 1 < active.size(); k += 2) {
      const std::size_t keep = active[k], drop = active[k + 1];
      c.cry(drop, keep, Angle::param(base + 3));
      c.rz(keep, Angle::param(base + 4)).ry(keep, Angle::param(base + 5));
      survivors.push_back(keep);
    }
    active = std::move(survivors);
  }
  const std::size_t last = 6 * stages;
  for (auto w : qcnn_readout_wires(n_qubits)) {
    c.rz(w, Angle::param(last)).ry(w, Angle::param(last + 1)).rz(w, Angle::param(last + 2));
  }
  c.validate();
  return c;
}

// Angle embedding of n inputs followed by `body`.
inline Circuit embed_then(const Circuit& body) {
  Circuit c(body.n_qubits(), body.n_qubits(), body.n_params());
  c.append(angle_embed(body.n_qubits()));
  c.append(body);
  return c;
}

inline std::vector<std::size_t> all_wires(std::size_t n_qubits) {
  std::vector<std::size_t> w(n_qubits);
  for (std::size_t i = 0; i < n_qubits; ++i) w[i] = i;
  return w;
}

}  // namespace fhe_fedsim::qsim
