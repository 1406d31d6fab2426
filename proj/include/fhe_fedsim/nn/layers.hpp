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

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/nn/tensor.hpp"
#include "fhe_fedsim/qsim.hpp"

namespace fhe_fedsim::nn {

using Rng = std::mt19937_64;

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, Shape shape, bool train = true)
      : name(std::move(n)), value(shape), grad(shape), trainable(train) {}
};

// Uniform fan-in initialisation: weights U(-sqrt(6/fan_in), sqrt(6/fan_in)),
// biases U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
void init_fan_in(Param<T>& weight, Param<T>& bias, std::size_t fan_in, Rng& rng) {
  const double wb = std::sqrt(6.0 / static_cast<double>(fan_in));
  const double bb = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> w(-wb, wb), b(-bb, bb);
  for (auto& v : weight.value.data) v = static_cast<T>(w(rng));
  for (auto& v : bias.value.data) v = static_cast<T>(b(rng));
}

// Every layer caches what its backward pass needs during forward.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string kind() const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  // Accumulates parameter gradients; returns d loss / d input when asked.
  virtual Tensor<T> backward(const Tensor<T>& grad_out, bool input_grad) = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

// 3x3 convolution, stride 1, zero padding 1, NCHW.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, Rng& rng,
         bool trainable = true)
      : in_(in_ch),
        out_(out_ch),
        weight_(name + ".weight", {out_ch, in_ch, 3, 3}, trainable),
        bias_(name + ".bias", {out_ch}, trainable) {
    init_fan_in(weight_, bias_, in_ch * 9, rng);
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }
  std::string kind() const override { return "Conv2d"; }
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }

  Tensor<T> forward(const Tensor<T>& x) override {
    if (x.rank() != 4 || x.dim(1) != in_) {
      throw StructuralError("Conv2d: expected [B, " + std::to_string(in_) +
                            ", H, W], got " + shape_string(x.shape));
    }
    batch_ = x.dim(0);
    h_ = x.dim(2);
    w_ = x.dim(3);
    const std::size_t hw = h_ * w_, k = in_ * 9;
    cols_.assign(batch_ * k * hw, T{});
    Tensor<T> y({batch_, out_, h_, w_});
    ConstMatMap<T> wmat(weight_.value.ptr(), out_, k);
    for (std::size_t b = 0; b < batch_; ++b) {
      T* cols = cols_.data() + b * k * hw;
      im2col(x.ptr() + b * in_ * hw, cols);
      MatMap<T> out(y.ptr() + b * out_ * hw, out_, hw);
      out.noalias() = wmat * ConstMatMap<T>(cols, k, hw);
      for (std::size_t o = 0; o < out_; ++o) out.row(o).array() += bias_.value.data[o];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool input_grad) override {
    const std::size_t hw = h_ * w_, k = in_ * 9;
    MatMap<T> dw(weight_.grad.ptr(), out_, k);
    ConstMatMap<T> wmat(weight_.value.ptr(), out_, k);
    Tensor<T> dx;
    if (input_grad) dx = Tensor<T>({batch_, in_, h_, w_});
    RowMatrix<T> dcols;
    for (std::size_t b = 0; b < batch_; ++b) {
      ConstMatMap<T> gout(g.ptr() + b * out_ * hw, out_, hw);
      ConstMatMap<T> cols(cols_.data() + b * k * hw, k, hw);
      dw.noalias() += gout * cols.transpose();
      for (std::size_t o = 0; o < out_; ++o) bias_.grad.data[o] += gout.row(o).sum();
      if (input_grad) {
        dcols.noalias() = wmat.transpose() * gout;
        col2im(dcols.data(), dx.ptr() + b * in_ * hw);
      }
    }
    return dx;
  }

 private:
  // Row (c, ky, kx) of the column matrix holds the input shifted by
  // (ky - 1, kx - 1), zero outside the image.
  void im2col(const T* img, T* cols) const {
    const std::size_t hw = h_ * w_;
    for (std::size_t c = 0; c < in_; ++c) {
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          T* row = cols + ((c * 3 + ky) * 3 + kx) * hw;
          for (std::size_t y = 0; y < h_; ++y) {
            const long sy = static_cast<long>(y + ky) - 1;
            for (std::size_t x = 0; x < w_; ++x) {
              const long sx = static_cast<long>(x + kx) - 1;
              const bool inside = sy >= 0 && sy < static_cast<long>(h_) && sx >= 0 &&
                                  sx < static_cast<long>(w_);
              row[y * w_ + x] = inside ? img[(c * h_ + sy) * w_ + sx] : T{};
            }
          }
        }
      }
    }
  }

  void col2im(const T* cols, T* img) const {
    const std::size_t hw = h_ * w_;
    for (std::size_t c = 0; c < in_; ++c) {
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const T* row = cols + ((c * 3 + ky) * 3 + kx) * hw;
          for (std::size_t y = 0; y < h_; ++y) {
            const long sy = static_cast<long>(y + ky) - 1;
            if (sy < 0 || sy >= static_cast<long>(h_)) continue;
            for (std::size_t x = 0; x < w_; ++x) {
              const long sx = static_cast<long>(x + kx) - 1;
              if (sx < 0 || sx >= static_cast<long>(w_)) continue;
              img[(c * h_ + sy) * w_ + sx] += row[y * w_ + x];
            }
          }
        }
      }
    }
  }

  std::size_t in_, out_;
  Param<T> weight_, bias_;
  std::size_t batch_ = 0, h_ = 0, w_ = 0;
  AlignedVector<T> cols_;
};

template <typename T>
class Relu final : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Relu>(*this); }
  std::string kind() const override { return "ReLU"; }

  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> y = x;
    for (auto& v : y.data) v = v > T{} ? v : T{};
    input_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool) override {
    Tensor<T> dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!(input_.data[i] > T{})) dx.data[i] = T{};
    }
    return dx;
  }

 private:
  Tensor<T> input_;
};

// 2x2 max pooling, stride 2, odd trailing rows/columns dropped.
template <typename T>
class MaxPool2 final : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2>(*this); }
  std::string kind() const override { return "MaxPool2d"; }

  Tensor<T> forward(const Tensor<T>& x) override {
    if (x.rank() != 4 || x.dim(2) < 2 || x.dim(3) < 2) {
      throw StructuralError("MaxPool2d: input too small " + shape_string(x.shape));
    }
    in_shape_ = x.shape;
    const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = h / 2, ow = w / 2;
    Tensor<T> y({x.dim(0), x.dim(1), oh, ow});
    argmax_.assign(y.size(), 0);
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          std::size_t best = (p * h + 2 * oy) * w + 2 * ox;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = (p * h + 2 * oy + dy) * w + 2 * ox + dx;
              if (x.data[idx] > x.data[best]) best = idx;
            }
          }
          const std::size_t o = (p * oh + oy) * ow + ox;
          y.data[o] = x.data[best];
          argmax_[o] = best;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool) override {
    Tensor<T> dx(in_shape_);
    for (std::size_t o = 0; o < g.size(); ++o) dx.data[argmax_[o]] += g.data[o];
    return dx;
  }

 private:
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

// Adaptive average pooling to a fixed output grid. Bin i along an axis of
// length L covers [floor(i*L/n), ceil((i+1)*L/n)), which also works when
// the grid is finer than the input.
template <typename T>
class AdaptiveAvgPool final : public Layer<T> {
 public:
  AdaptiveAvgPool(std::size_t out_h, std::size_t out_w) : oh_(out_h), ow_(out_w) {}
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<AdaptiveAvgPool>(*this);
  }
  std::string kind() const override { return "AdaptiveAvgPool2d"; }

  Tensor<T> forward(const Tensor<T>& x) override {
    if (x.rank() != 4 || x.dim(2) == 0 || x.dim(3) == 0) {
      throw StructuralError("AdaptiveAvgPool2d: bad input " + shape_string(x.shape));
    }
    in_shape_ = x.shape;
    const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> y({x.dim(0), x.dim(1), oh_, ow_});
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t i = 0; i < oh_; ++i) {
        for (std::size_t j = 0; j < ow_; ++j) {
          const auto [y0, y1] = bin(i, h, oh_);
          const auto [x0, x1] = bin(j, w, ow_);
          T s{};
          for (std::size_t yy = y0; yy < y1; ++yy)
            for (std::size_t xx = x0; xx < x1; ++xx) s += x.data[(p * h + yy) * w + xx];
          y.data[(p * oh_ + i) * ow_ + j] = s / static_cast<T>((y1 - y0) * (x1 - x0));
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool) override {
    Tensor<T> dx(in_shape_);
    const std::size_t planes = in_shape_[0] * in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t i = 0; i < oh_; ++i) {
        for (std::size_t j = 0; j < ow_; ++j) {
          const auto [y0, y1] = bin(i, h, oh_);
          const auto [x0, x1] = bin(j, w, ow_);
          const T share = g.data[(p * oh_ + i) * ow_ + j] /
                          static_cast<T>((y1 - y0) * (x1 - x0));
          for (std::size_t yy = y0; yy < y1; ++yy)
            for (std::size_t xx = x0; xx < x1; ++xx) dx.data[(p * h + yy) * w + xx] += share;
        }
      }
    }
    return dx;
  }

  static std::pair<std::size_t, std::size_t> bin(std::size_t i, std::size_t len,
                                                 std::size_t n) {
    return {i * len / n, ((i + 1) * len + n - 1) / n};
  }

 private:
  std::size_t oh_, ow_;
  Shape in_shape_;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }
  std::string kind() const override { return "Flatten"; }

  Tensor<T> forward(const Tensor<T>& x) override {
    in_shape_ = x.shape;
    return Tensor<T>({x.dim(0), x.size() / x.dim(0)}, x.data);
  }

  Tensor<T> backward(const Tensor<T>& g, bool) override {
    return Tensor<T>(in_shape_, g.data);
  }

 private:
  Shape in_shape_;
};

// y = x W^T + b with W stored [out, in].
template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::string name, std::size_t in, std::size_t out, Rng& rng)
      : in_(in),
        out_(out),
        weight_(name + ".weight", {out, in}),
        bias_(name + ".bias", {out}) {
    init_fan_in(weight_, bias_, in, rng);
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Linear>(*this); }
  std::string kind() const override { return "Linear"; }
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }

  Tensor<T> forward(const Tensor<T>& x) override {
    if (x.rank() != 2 || x.dim(1) != in_) {
      throw StructuralError("Linear: expected [B, " + std::to_string(in_) + "], got " +
                            shape_string(x.shape));
    }
    input_ = x;
    const std::size_t b = x.dim(0);
    Tensor<T> y({b, out_});
    MatMap<T> out(y.ptr(), b, out_);
    out.noalias() = ConstMatMap<T>(x.ptr(), b, in_) *
                    ConstMatMap<T>(weight_.value.ptr(), out_, in_).transpose();
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t o = 0; o < out_; ++o) out(r, o) += bias_.value.data[o];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool input_grad) override {
    const std::size_t b = input_.dim(0);
    ConstMatMap<T> gout(g.ptr(), b, out_);
    MatMap<T>(weight_.grad.ptr(), out_, in_).noalias() +=
        gout.transpose() * ConstMatMap<T>(input_.ptr(), b, in_);
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t o = 0; o < out_; ++o) bias_.grad.data[o] += gout(r, o);
    }
    Tensor<T> dx;
    if (input_grad) {
      dx = Tensor<T>({b, in_});
      MatMap<T>(dx.ptr(), b, in_).noalias() =
          gout * ConstMatMap<T>(weight_.value.ptr(), out_, in_);
    }
    return dx;
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

// Parameterised circuit as a layer: input features are embedding angles,
// outputs are <Z> readouts. Gradients follow the shift rule for both the
// circuit parameters and the inputs.
template <typename T>
class QuantumLayer final : public Layer<T> {
 public:
  QuantumLayer(std::string name, qsim::Circuit circuit, std::vector<std::size_t> readout,
               Rng& rng)
      : circuit_(std::move(circuit)),
        readout_(std::move(readout)),
        weights_(name + ".weights", {circuit_.n_params()}) {
    std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
    for (auto& v : weights_.value.data) v = static_cast<T>(angle(rng));
  }

  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<QuantumLayer>(*this);
  }
  std::string kind() const override { return "Quantum"; }
  std::vector<Param<T>*> params() override { return {&weights_}; }

  const qsim::Circuit& circuit() const noexcept { return circuit_; }

  Tensor<T> forward(const Tensor<T>& x) override {
    const std::size_t n_in = circuit_.n_inputs();
    if (x.rank() != 2 || x.dim(1) != n_in) {
      throw StructuralError("Quantum layer: expected [B, " + std::to_string(n_in) +
                            "], got " + shape_string(x.shape));
    }
    input_ = x;
    const auto phi = weights_as_double();
    const std::size_t b = x.dim(0), nr = readout_.size();
    Tensor<T> y({b, nr});
    std::vector<double> xi(n_in);
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t i = 0; i < n_in; ++i) xi[i] = static_cast<double>(x.data[r * n_in + i]);
      const auto z = qsim::expectations(circuit_, xi, phi, readout_);
      for (std::size_t k = 0; k < nr; ++k) y.data[r * nr + k] = static_cast<T>(z[k]);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool input_grad) override {
    const std::size_t n_in = circuit_.n_inputs(), np = circuit_.n_params();
    const std::size_t b = input_.dim(0), nr = readout_.size();
    const auto phi = weights_as_double();
    Tensor<T> dx;
    if (input_grad) dx = Tensor<T>({b, n_in});
    std::vector<double> xi(n_in);
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t i = 0; i < n_in; ++i) xi[i] = static_cast<double>(input_.data[r * n_in + i]);
      const auto jac = qsim::param_shift_grad(circuit_, xi, phi, readout_);
      for (std::size_t k = 0; k < nr; ++k) {
        const double gk = static_cast<double>(g.data[r * nr + k]);
        for (std::size_t j = 0; j < np; ++j) {
          weights_.grad.data[j] += static_cast<T>(gk * jac.d_params[k * np + j]);
        }
        if (input_grad) {
          for (std::size_t i = 0; i < n_in; ++i) {
            dx.data[r * n_in + i] += static_cast<T>(gk * jac.d_inputs[k * n_in + i]);
          }
        }
      }
    }
    return dx;
  }

 private:
  std::vector<double> weights_as_double() const {
    return {weights_.value.data.begin(), weights_.value.data.end()};
  }

  qsim::Circuit circuit_;
  std::vector<std::size_t> readout_;
  Param<T> weights_;
  Tensor<T> input_;
};

}  // namespace fhe_fedsim::nn
