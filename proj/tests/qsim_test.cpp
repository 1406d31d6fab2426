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

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "fhe_fedsim/qsim.hpp"

namespace {

using namespace fhe_fedsim::qsim;
using fhe_fedsim::StructuralError;
using Matrix = std::vector<std::vector<Complex>>;

constexpr double kPi = std::numbers::pi;

// Dense-matrix oracle: builds the full 2^n unitary of a gate as a Kronecker
// product, wire n-1 leftmost so that wire 0 is the least significant bit.
Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix r(a.size() * b.size(), std::vector<Complex>(a.size() * b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k)
        for (std::size_t l = 0; l < b.size(); ++l)
          r[i * b.size() + k][j * b.size() + l] = a[i][j] * b[k][l];
  return r;
}

Matrix single_qubit_unitary(GateKind kind, double t, std::size_t wire,
                            std::size_t n) {
  const double c = std::cos(t / 2), s = std::sin(t / 2);
  const Complex I{0, 1};
  Matrix g;
  if (kind == GateKind::rx) g = {{c, -I * s}, {-I * s, c}};
  if (kind == GateKind::ry) g = {{c, -s}, {s, c}};
  if (kind == GateKind::rz) g = {{std::exp(-I * (t / 2)), 0}, {0, std::exp(I * (t / 2))}};
  const Matrix id = {{1, 0}, {0, 1}};
  Matrix full = {{1}};
  for (std::size_t w = n; w-- > 0;) full = kron(full, w == wire ? g : id);
  return full;
}

Matrix cnot_unitary(std::size_t control, std::size_t target, std::size_t n) {
  const std::size_t dim = std::size_t{1} << n;
  Matrix m(dim, std::vector<Complex>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    const std::size_t j = (i >> control & 1) ? i ^ (std::size_t{1} << target) : i;
    m[j][i] = 1;
  }
  return m;
}

std::vector<Complex> mat_vec(const Matrix& m, const std::vector<Complex>& v) {
  std::vector<Complex> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) r[i] += m[i][j] * v[j];
  return r;
}

std::vector<double> uniform(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pick(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = pick(rng);
  return v;
}

// Central finite differences of every readout, h = 1e-5.
void expect_matches_finite_differences(const Circuit& c,
                                       const std::vector<double>& inputs,
                                       const std::vector<double>& params,
                                       const std::vector<std::size_t>& readout,
                                       double tol) {
  const auto jac = param_shift_grad(c, inputs, params, readout);
  const double h = 1e-5;
  const std::size_t nr = readout.size();
  for (std::size_t j = 0; j < params.size(); ++j) {
    auto p = params, m = params;
    p[j] += h;
    m[j] -= h;
    const auto fp = expectations(c, inputs, p, readout);
    const auto fm = expectations(c, inputs, m, readout);
    for (std::size_t r = 0; r < nr; ++r) {
      ASSERT_NEAR(jac.d_params[r * params.size() + j], (fp[r] - fm[r]) / (2 * h), tol)
          << "param " << j << " readout " << r;
    }
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto p = inputs, m = inputs;
    p[i] += h;
    m[i] -= h;
    const auto fp = expectations(c, p, params, readout);
    const auto fm = expectations(c, m, params, readout);
    for (std::size_t r = 0; r < nr; ++r) {
      ASSERT_NEAR(jac.d_inputs[r * inputs.size() + i], (fp[r] - fm[r]) / (2 * h), tol)
          << "input " << i << " readout " << r;
    }
  }
}

TEST(StateVectorTest, StartsInZeroState) {
  StateVector s(3);
  EXPECT_EQ(s.dimension(), 8u);
  EXPECT_EQ(s.amplitudes()[0], Complex(1.0));
  EXPECT_THROW(StateVector(0), StructuralError);
  EXPECT_THROW(StateVector(13), StructuralError);
}

TEST(StateVectorTest, RxZeroIsIdentity) {
  std::mt19937_64 rng(1);
  StateVector s(3);
  for (int k = 0; k < 6; ++k) s.apply_ry(uniform(1, 0, 2 * kPi, rng)[0], k % 3);
  const auto before = std::vector<Complex>(s.amplitudes().begin(), s.amplitudes().end());
  s.apply_rx(0.0, 1);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(s.amplitudes()[i], before[i]);
}

TEST(StateVectorTest, RxPiFlipsWithMinusI) {
  StateVector s(1);
  s.apply_rx(kPi, 0);
  EXPECT_NEAR(std::abs(s.amplitudes()[0]), 0.0, 1e-15);
  EXPECT_NEAR(s.amplitudes()[1].real(), 0.0, 1e-15);
  EXPECT_NEAR(s.amplitudes()[1].imag(), -1.0, 1e-15);
}

TEST(StateVectorTest, CnotMakesBellState) {
  // (|0> + |1>)/sqrt2 on wire 0, |0> on wire 1.
  StateVector s(2);
  s.apply_ry(kPi / 2, 0);
  s.apply_cnot(0, 1);
  const double r = 1 / std::sqrt(2.0);
  EXPECT_NEAR(s.amplitudes()[0].real(), r, 1e-15);
  EXPECT_NEAR(std::abs(s.amplitudes()[1]), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s.amplitudes()[2]), 0.0, 1e-15);
  EXPECT_NEAR(s.amplitudes()[3].real(), r, 1e-15);
  EXPECT_NEAR(s.norm_squared(), 1.0, 1e-15);
}

TEST(StateVectorTest, WireOutOfRangeThrows) {
  StateVector s(2);
  EXPECT_THROW(s.apply_rx(0.1, 2), StructuralError);
  EXPECT_THROW(s.apply_cnot(0, 2), StructuralError);
  EXPECT_THROW(s.apply_cnot(1, 1), StructuralError);
  EXPECT_THROW(s.expectation_z(5), StructuralError);
  Circuit c(2, 0, 0);
  EXPECT_THROW(c.rx(2, Angle::constant(0.0)), StructuralError);
  EXPECT_THROW(c.cnot(0, 3), StructuralError);
}

TEST(StateVectorTest, GatesMatchKroneckerOracle) {
  std::mt19937_64 rng(7);
  const std::size_t n = 3;
  StateVector s(n);
  std::vector<Complex> ref(8);
  ref[0] = 1;
  std::uniform_int_distribution<int> kind(0, 3), wire(0, n - 1);
  for (int step = 0; step < 60; ++step) {
    const int k = kind(rng);
    if (k == 3) {
      const std::size_t c = wire(rng);
      std::size_t t = wire(rng);
      while (t == c) t = wire(rng);
      s.apply_cnot(c, t);
      ref = mat_vec(cnot_unitary(c, t, n), ref);
      continue;
    }
    const double theta = uniform(1, -kPi, kPi, rng)[0];
    const std::size_t w = wire(rng);
    const auto g = static_cast<GateKind>(k);
    apply_gate(s, Gate{g, w, 0, {}}, theta);
    ref = mat_vec(single_qubit_unitary(g, theta, w, n), ref);
  }
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_NEAR(std::abs(s.amplitudes()[i] - ref[i]), 0.0, 1e-12) << i;
  }
}

TEST(StateVectorTest, NormDriftOverThousandGates) {
  std::mt19937_64 rng(11);
  StateVector s(6);
  std::uniform_int_distribution<int> kind(0, 3), wire(0, 5);
  double worst = 0.0;
  for (int step = 0; step < 1000; ++step) {
    const int k = kind(rng);
    const std::size_t w = wire(rng);
    if (k == 3) {
      s.apply_cnot(w, (w + 1) % 6);
    } else {
      apply_gate(s, Gate{static_cast<GateKind>(k), w, 0, {}}, uniform(1, -kPi, kPi, rng)[0]);
    }
    worst = std::max(worst, std::fabs(s.norm_squared() - 1.0));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(StateVectorTest, GateThenInverseRestoresState) {
  std::mt19937_64 rng(12);
  StateVector s(4);
  for (std::size_t w = 0; w < 4; ++w) s.apply_ry(uniform(1, 0, kPi, rng)[0], w);
  s.apply_cnot(0, 2);
  const std::vector<Complex> start(s.amplitudes().begin(), s.amplitudes().end());
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = static_cast<GateKind>(trial % 3);
    const std::size_t w = trial % 4;
    const double t = uniform(1, -kPi, kPi, rng)[0];
    apply_gate(s, Gate{g, w, 0, {}}, t);
    apply_gate(s, Gate{g, w, 0, {}}, -t);
    s.apply_cnot(w, (w + 1) % 4);
    s.apply_cnot(w, (w + 1) % 4);
  }
  for (std::size_t i = 0; i < start.size(); ++i) {
    EXPECT_NEAR(std::abs(s.amplitudes()[i] - start[i]), 0.0, 1e-12);
  }
}

TEST(CircuitTest, CryMatchesControlledRotation) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto prep = uniform(4, 0, 2 * kPi, rng);
    const double theta = uniform(1, -kPi, kPi, rng)[0];
    Circuit c(2, 0, 1);
    c.ry(0, Angle::constant(prep[0])).rx(1, Angle::constant(prep[1]));
    c.cry(0, 1, Angle::param(0));
    const auto s = c.run({}, std::vector<double>{theta});

    // Oracle: |control=1> block gets RY(theta) on the target.
    StateVector ref(2);
    ref.apply_ry(prep[0], 0);
    ref.apply_rx(prep[1], 1);
    auto a = ref.amplitudes();
    const double cs = std::cos(theta / 2), sn = std::sin(theta / 2);
    const Complex a01 = a[1], a11 = a[3];  // control bit set, target 0 / 1
    a[1] = cs * a01 - sn * a11;
    a[3] = sn * a01 + cs * a11;
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(std::abs(s.amplitudes()[i] - a[i]), 0.0, 1e-12);
    }
  }
}

TEST(CircuitTest, ShapeMismatchThrows) {
  const auto c = embed_then(basic_entangler(4, 6));
  EXPECT_THROW(c.run(std::vector<double>(3), std::vector<double>(24)), StructuralError);
  EXPECT_THROW(c.run(std::vector<double>(4), std::vector<double>(23)), StructuralError);
  EXPECT_THROW(expectations(qcnn_circuit(8), {}, std::vector<double>(20), qcnn_readout_wires(8)),
               StructuralError);
}

TEST(CircuitTest, UnusedParameterFailsValidation) {
  Circuit c(2, 0, 2);
  c.rx(0, Angle::param(0));
  EXPECT_THROW(c.validate(), StructuralError);
  c.rz(1, Angle::param(1));
  EXPECT_NO_THROW(c.validate());
}

TEST(EmbeddingTest, ZerosLeaveGroundState) {
  const auto c = angle_embed(4);
  const auto s = c.run(std::vector<double>(4, 0.0), {});
  EXPECT_EQ(s.amplitudes()[0], Complex(1.0));
  EXPECT_NEAR(s.norm_squared(), 1.0, 1e-15);
}

TEST(EmbeddingTest, PiFlipsWireZero) {
  const auto z = expectations(angle_embed(4), std::vector<double>{kPi, 0, 0, 0}, {},
                              all_wires(4));
  EXPECT_NEAR(z[0], -1.0, 1e-12);
  for (std::size_t w = 1; w < 4; ++w) EXPECT_NEAR(z[w], 1.0, 1e-12);
}

TEST(EmbeddingTest, PeriodicInEachFeature) {
  std::mt19937_64 rng(5);
  const auto c = embed_then(basic_entangler(4, 6));
  const auto params = uniform(24, 0, 2 * kPi, rng);
  for (int sweep = 0; sweep < 20; ++sweep) {
    const auto x = uniform(4, -3, 3, rng);
    const auto base = expectations(c, x, params, all_wires(4));
    for (std::size_t i = 0; i < 4; ++i) {
      auto shifted = x;
      shifted[i] += 2 * kPi;
      const auto z = expectations(c, shifted, params, all_wires(4));
      for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(z[r], base[r], 1e-12);
    }
  }
}

TEST(EntanglerTest, ParameterCountAndZeroParams) {
  const auto c = basic_entangler(4, 6);
  EXPECT_EQ(c.n_params(), 24u);
  const auto z = expectations(c, {}, std::vector<double>(24, 0.0), all_wires(4));
  for (double v : z) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(EntanglerTest, RingOfCnots) {
  // One layer on 3 qubits with RX(pi) on wire 0 only: |001> -> CNOT 0->1 ->
  // |011> -> CNOT 1->2 -> |111> -> CNOT 2->0 -> |110>.
  const auto c = basic_entangler(3, 1);
  const auto s = c.run({}, std::vector<double>{kPi, 0, 0});
  EXPECT_NEAR(std::norm(s.amplitudes()[6]), 1.0, 1e-12);
}

TEST(QcnnTest, ParameterCountAndReadout) {
  const auto c = qcnn_circuit(8);
  EXPECT_EQ(c.n_params(), 21u);
  EXPECT_EQ(qcnn_param_count(8), 21u);
  EXPECT_EQ(qcnn_readout_wires(8), (std::vector<std::size_t>{0, 2, 4, 6}));
  EXPECT_THROW(qcnn_circuit(6), StructuralError);
  EXPECT_THROW(qcnn_circuit(2), StructuralError);
}

TEST(QcnnTest, ZeroParamsReadPlusOne) {
  const auto c = qcnn_circuit(8);
  const auto z = expectations(c, {}, std::vector<double>(21, 0.0), qcnn_readout_wires(8));
  ASSERT_EQ(z.size(), 4u);
  for (double v : z) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(ExpectationTest, GroundStateAndHalfTurn) {
  const auto z0 = expectations(angle_embed(3), std::vector<double>(3, 0.0), {}, all_wires(3));
  for (double v : z0) EXPECT_EQ(v, 1.0);
  const auto z = expectations(angle_embed(1), std::vector<double>{kPi / 2}, {}, all_wires(1));
  EXPECT_NEAR(z[0], 0.0, 1e-12);
}

TEST(ExpectationTest, AlwaysWithinUnitInterval) {
  std::mt19937_64 rng(9);
  const auto qnn = embed_then(basic_entangler(4, 6));
  const auto qcnn = embed_then(qcnn_circuit(8));
  for (int draw = 0; draw < 1000; ++draw) {
    const bool use_qcnn = draw % 2 == 1;
    const auto& c = use_qcnn ? qcnn : qnn;
    const auto readout = use_qcnn ? qcnn_readout_wires(8) : all_wires(4);
    const auto z = expectations(c, uniform(c.n_inputs(), -kPi, kPi, rng),
                                uniform(c.n_params(), 0, 2 * kPi, rng), readout);
    for (double v : z) {
      ASSERT_GE(v, -1.0 - 1e-12);
      ASSERT_LE(v, 1.0 + 1e-12);
    }
  }
}

TEST(GradientTest, SingleRxIsMinusSine) {
  Circuit c(1, 0, 1);
  c.rx(0, Angle::param(0));
  for (double t : {0.0, kPi / 4, kPi / 2}) {
    const auto jac = param_shift_grad(c, {}, std::vector<double>{t}, all_wires(1));
    EXPECT_NEAR(jac.d_params[0], -std::sin(t), 1e-12);
  }
}

TEST(GradientTest, ParameterWithoutEffectHasZeroGradient) {
  // RZ on |0> only adds a phase.
  Circuit c(2, 0, 2);
  c.rz(0, Angle::param(0)).ry(1, Angle::param(1));
  const auto jac = param_shift_grad(c, {}, std::vector<double>{0.7, 0.3}, all_wires(2));
  EXPECT_NEAR(jac.d_params[0], 0.0, 1e-15);
  EXPECT_NEAR(jac.d_params[2], 0.0, 1e-15);
}

TEST(GradientTest, SharedParameterSumsSlotGradients) {
  // Same gate pattern, once with one shared parameter and once with a
  // separate parameter per slot.
  std::mt19937_64 rng(4);
  Circuit shared(3, 0, 1), split(3, 0, 3);
  for (std::size_t w = 0; w < 3; ++w) {
    shared.ry(w, Angle::param(0));
    split.ry(w, Angle::param(w));
  }
  shared.cnot(0, 1).cnot(1, 2);
  split.cnot(0, 1).cnot(1, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const double t = uniform(1, -kPi, kPi, rng)[0];
    const auto a = param_shift_grad(shared, {}, std::vector<double>{t}, all_wires(3));
    const auto b = param_shift_grad(split, {}, std::vector<double>(3, t), all_wires(3));
    for (std::size_t r = 0; r < 3; ++r) {
      EXPECT_NEAR(a.d_params[r], b.d_params[r * 3] + b.d_params[r * 3 + 1] + b.d_params[r * 3 + 2],
                  1e-12);
    }
  }
}

TEST(GradientTest, EntanglerMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  const auto c = embed_then(basic_entangler(4, 6));
  for (int trial = 0; trial < 100; ++trial) {
    expect_matches_finite_differences(c, uniform(4, -kPi, kPi, rng),
                                      uniform(24, 0, 2 * kPi, rng), all_wires(4), 1e-6);
  }
}

TEST(GradientTest, QcnnMatchesFiniteDifferences) {
  std::mt19937_64 rng(22);
  const auto c = embed_then(qcnn_circuit(8));
  for (int trial = 0; trial < 100; ++trial) {
    expect_matches_finite_differences(c, uniform(8, -kPi, kPi, rng),
                                      uniform(21, 0, 2 * kPi, rng), qcnn_readout_wires(8),
                                      1e-6);
  }
}

}  // namespace
