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
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/nn/layers.hpp"
#include "fhe_fedsim/nn/tensor.hpp"
#include "fhe_fedsim/qsim.hpp"

namespace fhe_fedsim::nn {

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kQnnQubits = 4;
inline constexpr std::size_t kQnnLayers = 6;
inline constexpr std::size_t kQcnnQubits = 8;
inline constexpr std::size_t kExtractorFeatures = 512;
// Seed of the frozen extractor. Fixed so every party builds the same trunk
// without shipping it.
inline constexpr std::uint64_t kExtractorSeed = 0x5eed'f00dULL;

inline const std::array<std::string_view, 6>& architectures() {
  static const std::array<std::string_view, 6> ids = {"cnn", "cnn-qnn", "cnn-qcnn",
                                                       "fx",  "fx-qnn",  "fx-qcnn"};
  return ids;
}

inline bool is_architecture(std::string_view id) {
  const auto& ids = architectures();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

// Ordered layer stack. Leading layers without trainable parameters (the
// frozen extractor) form a prefix whose output can be computed once per
// sample and reused.
template <typename T>
class Model {
 public:
  Model() = default;
  Model(std::string arch, std::size_t input_size) : arch_(std::move(arch)), input_size_(input_size) {}

  Model(const Model& o) : arch_(o.arch_), input_size_(o.input_size_), frozen_depth_(o.frozen_depth_) {
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  Model& operator=(const Model& o) {
    if (this != &o) {
      Model copy(o);
      *this = std::move(copy);
    }
    return *this;
  }
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const std::string& arch() const noexcept { return arch_; }
  std::size_t input_size() const noexcept { return input_size_; }
  std::size_t depth() const noexcept { return layers_.size(); }
  std::size_t frozen_depth() const noexcept { return frozen_depth_; }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  void freeze_prefix(std::size_t depth) { frozen_depth_ = depth; }

  std::vector<Param<T>*> all_params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }

  std::vector<Param<T>*> trainable() {
    auto all = all_params();
    std::vector<Param<T>*> out;
    for (auto* p : all)
      if (p->trainable) out.push_back(p);
    return out;
  }

  std::vector<Param<T>*> frozen() {
    auto all = all_params();
    std::vector<Param<T>*> out;
    for (auto* p : all)
      if (!p->trainable) out.push_back(p);
    return out;
  }

  std::size_t trainable_count() {
    std::size_t n = 0;
    for (auto* p : trainable()) n += p->value.size();
    return n;
  }

  // Output of the frozen prefix (the input itself when there is none).
  Tensor<T> features(const Tensor<T>& x) {
    Tensor<T> h = x;
    for (std::size_t i = 0; i < frozen_depth_; ++i) h = layers_[i]->forward(h);
    return h;
  }

  // Trainable head applied to `features` output.
  Tensor<T> head(const Tensor<T>& f) {
    Tensor<T> h = f;
    for (std::size_t i = frozen_depth_; i < layers_.size(); ++i) h = layers_[i]->forward(h);
    return h;
  }

  Tensor<T> forward(const Tensor<T>& x) { return head(features(x)); }

  void zero_grad() {
    for (auto* p : all_params()) p->grad.fill(T{});
  }

  // Mean softmax cross-entropy over the batch of head inputs; gradients of
  // the trainable tensors are overwritten.
  T loss_and_grad(const Tensor<T>& f, const std::vector<int>& labels) {
    zero_grad();
    const Tensor<T> logits = head(f);
    Tensor<T> g;
    const T loss = softmax_cross_entropy(logits, labels, &g);
    for (std::size_t i = layers_.size(); i-- > frozen_depth_;) {
      g = layers_[i]->backward(g, i > frozen_depth_);
    }
    return loss;
  }

  // Mean loss over the rows of `logits`; writes d loss / d logits when asked.
  static T softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels,
                                 Tensor<T>* grad) {
    if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
      throw StructuralError("loss: logits and labels disagree");
    }
    const std::size_t b = logits.dim(0), c = logits.dim(1);
    if (grad) *grad = Tensor<T>(logits.shape);
    double total = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
      const T* row = logits.ptr() + r * c;
      const int y = labels[r];
      if (y < 0 || static_cast<std::size_t>(y) >= c) throw StructuralError("label out of range");
      const double m = *std::max_element(row, row + c);
      double z = 0.0;
      for (std::size_t k = 0; k < c; ++k) z += std::exp(static_cast<double>(row[k]) - m);
      const double lse = m + std::log(z);
      total += lse - static_cast<double>(row[y]);
      if (grad) {
        for (std::size_t k = 0; k < c; ++k) {
          const double p = std::exp(static_cast<double>(row[k]) - lse);
          grad->data[r * c + k] =
              static_cast<T>((p - (static_cast<std::size_t>(y) == k ? 1.0 : 0.0)) / b);
        }
      }
    }
    return static_cast<T>(total / static_cast<double>(b));
  }

 private:
  std::string arch_;
  std::size_t input_size_ = 0;
  std::size_t frozen_depth_ = 0;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

namespace detail {

template <typename T>
void add_cnn_trunk(Model<T>& m, Rng& rng) {
  m.add(std::make_unique<Conv2d<T>>("conv1", kImageChannels, 8, rng));
  m.add(std::make_unique<Relu<T>>());
  m.add(std::make_unique<MaxPool2<T>>());
  m.add(std::make_unique<Conv2d<T>>("conv2", 8, 16, rng));
  m.add(std::make_unique<Relu<T>>());
  m.add(std::make_unique<MaxPool2<T>>());
  m.add(std::make_unique<AdaptiveAvgPool<T>>(1, 1));
  m.add(std::make_unique<Flatten<T>>());
  m.add(std::make_unique<Linear<T>>("fc1", 16, 32, rng));
  m.add(std::make_unique<Relu<T>>());
}

// Frozen random convolutional trunk with a 512-feature output: two
// conv/ReLU/max-pool blocks (3 -> 16 -> 32 channels) and a 4x4 average pool.
template <typename T>
void add_extractor(Model<T>& m) {
  Rng rng(kExtractorSeed);
  m.add(std::make_unique<Conv2d<T>>("extractor.conv1", kImageChannels, 16, rng, false));
  m.add(std::make_unique<Relu<T>>());
  m.add(std::make_unique<MaxPool2<T>>());
  m.add(std::make_unique<Conv2d<T>>("extractor.conv2", 16, 32, rng, false));
  m.add(std::make_unique<Relu<T>>());
  m.add(std::make_unique<MaxPool2<T>>());
  m.add(std::make_unique<AdaptiveAvgPool<T>>(4, 4));
  m.add(std::make_unique<Flatten<T>>());
  m.freeze_prefix(m.depth());
}

template <typename T>
void add_qnn(Model<T>& m, Rng& rng) {
  m.add(std::make_unique<QuantumLayer<T>>(
      "qnn", qsim::embed_then(qsim::basic_entangler(kQnnQubits, kQnnLayers)),
      qsim::all_wires(kQnnQubits), rng));
}

template <typename T>
void add_qcnn(Model<T>& m, Rng& rng) {
  m.add(std::make_unique<QuantumLayer<T>>("qcnn",
                                          qsim::embed_then(qsim::qcnn_circuit(kQcnnQubits)),
                                          qsim::qcnn_readout_wires(kQcnnQubits), rng));
}

}  // namespace detail

// Builds one of the six architectures for square RGB inputs of side
// `input_size`. The `fx` family uses the frozen extractor in place of a
// pretrained backbone.
template <typename T>
Model<T> build_model(std::string_view arch, std::size_t input_size, Rng& rng) {
  if (!is_architecture(arch)) {
    throw ConfigError("arch", "unknown architecture '" + std::string(arch) + "'");
  }
  if (input_size < 8) throw ConfigError("input_size", "must be at least 8");
  Model<T> m{std::string(arch), input_size};
  if (arch == "cnn") {
    detail::add_cnn_trunk(m, rng);
    m.add(std::make_unique<Linear<T>>("fc2", 32, 4, rng));
  } else if (arch == "cnn-qnn") {
    detail::add_cnn_trunk(m, rng);
    m.add(std::make_unique<Linear<T>>("fc2", 32, kQnnQubits, rng));
    detail::add_qnn(m, rng);
    m.add(std::make_unique<Linear<T>>("fc3", 4, kNumClasses, rng));
  } else if (arch == "cnn-qcnn") {
    detail::add_cnn_trunk(m, rng);
    m.add(std::make_unique<Linear<T>>("fc2", 32, kQcnnQubits, rng));
    detail::add_qcnn(m, rng);
    m.add(std::make_unique<Linear<T>>("fc3", 4, kNumClasses, rng));
  } else if (arch == "fx") {
    detail::add_extractor(m);
    m.add(std::make_unique<Linear<T>>("fc", kExtractorFeatures, kNumClasses, rng));
  } else if (arch == "fx-qnn") {
    detail::add_extractor(m);
    m.add(std::make_unique<Linear<T>>("fc1", kExtractorFeatures, kQnnQubits, rng));
    detail::add_qnn(m, rng);
    m.add(std::make_unique<Linear<T>>("fc2", 4, kNumClasses, rng));
  } else {
    detail::add_extractor(m);
    m.add(std::make_unique<Linear<T>>("fc1", kExtractorFeatures, kQcnnQubits, rng));
    detail::add_qcnn(m, rng);
    m.add(std::make_unique<Linear<T>>("fc2", 4, kNumClasses, rng));
  }
  return m;
}

// Stochastic gradient descent with optional heavy-ball momentum:
// v <- mu v + g, p <- p - lr v. Frozen tensors are never touched.
template <typename T>
class Sgd {
 public:
  Sgd(double lr, double momentum = 0.0) : lr_(lr), momentum_(momentum) {}

  void step(Model<T>& model) {
    auto params = model.trainable();
    if (velocity_.size() != params.size()) {
      velocity_.clear();
      for (auto* p : params) velocity_.emplace_back(p->value.size(), T{});
    }
    const T lr = static_cast<T>(lr_), mu = static_cast<T>(momentum_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& v = velocity_[k];
      auto& value = params[k]->value.data;
      const auto& grad = params[k]->grad.data;
      for (std::size_t i = 0; i < value.size(); ++i) {
        v[i] = mu * v[i] + grad[i];
        value[i] -= lr * v[i];
      }
    }
  }

 private:
  double lr_, momentum_;
  std::vector<std::vector<T>> velocity_;
};

}  // namespace fhe_fedsim::nn
