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
#include <numeric>
#include <random>
#include <vector>

#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/nn/dataset.hpp"
#include "fhe_fedsim/nn/model.hpp"

namespace fhe_fedsim::nn {

// Runs the frozen prefix once over a set of examples. Models without a
// frozen prefix get the examples back unchanged.
template <typename T>
Examples head_inputs(Model<T>& model, const Examples& data, std::size_t batch = 64) {
  if (model.frozen_depth() == 0 || data.size() == 0) return data;
  Examples out;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch) {
    idx.clear();
    for (std::size_t i = start; i < std::min(start + batch, data.size()); ++i) idx.push_back(i);
    const Tensor<T> f = model.features(data.batch<T>(idx));
    if (out.item_shape.empty()) out.item_shape.assign(f.shape.begin() + 1, f.shape.end());
    const std::size_t n = out.item_size();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::vector<float> row(f.data.begin() + static_cast<long>(k * n),
                             f.data.begin() + static_cast<long>((k + 1) * n));
      out.push(row, data.labels[idx[k]]);
    }
  }
  return out;
}

// Minibatch SGD over shuffled head inputs. Returns the mean training loss
// of each epoch.
template <typename T>
std::vector<double> train_epochs(Model<T>& model, const Examples& inputs, std::size_t epochs,
                                 std::size_t batch, Sgd<T>& opt, std::mt19937_64& rng) {
  if (batch == 0) throw ConfigError("batch", "must be positive");
  std::vector<double> losses;
  if (inputs.size() == 0) return losses;
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(batch, order.size() - start));
      const T loss = model.loss_and_grad(inputs.batch<T>(idx), inputs.batch_labels(idx));
      opt.step(model);
      total += static_cast<double>(loss) * static_cast<double>(idx.size());
    }
    losses.push_back(total / static_cast<double>(order.size()));
  }
  return losses;
}

struct EvalReport {
  std::size_t n = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Accuracy plus macro precision/recall/F1 over the classes that occur in
// either the labels or the predictions; a class never predicted scores
// zero precision.
inline EvalReport classification_report(const std::vector<int>& labels,
                                        const std::vector<int>& predicted, double loss) {
  if (labels.size() != predicted.size()) throw StructuralError("report: length mismatch");
  EvalReport r;
  r.n = labels.size();
  r.loss = loss;
  if (r.n == 0) return r;
  std::vector<std::size_t> tp(kNumClasses), fp(kNumClasses), fn(kNumClasses);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (y == p) {
      ++correct;
      ++tp[y];
    } else {
      ++fp[p];
      ++fn[y];
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
  std::size_t present = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) continue;
    ++present;
    const double prec = tp[c] + fp[c] ? static_cast<double>(tp[c]) / (tp[c] + fp[c]) : 0.0;
    const double rec = tp[c] + fn[c] ? static_cast<double>(tp[c]) / (tp[c] + fn[c]) : 0.0;
    r.precision += prec;
    r.recall += rec;
    r.f1 += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  }
  r.precision /= present;
  r.recall /= present;
  r.f1 /= present;
  return r;
}

template <typename T>
EvalReport evaluate(Model<T>& model, const Examples& inputs, std::size_t batch = 64) {
  std::vector<int> predicted;
  double loss = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < inputs.size(); start += batch) {
    idx.clear();
    for (std::size_t i = start; i < std::min(start + batch, inputs.size()); ++i) idx.push_back(i);
    const Tensor<T> logits = model.head(inputs.batch<T>(idx));
    const auto labels = inputs.batch_labels(idx);
    loss += static_cast<double>(Model<T>::softmax_cross_entropy(logits, labels, nullptr)) *
            static_cast<double>(idx.size());
    const std::size_t c = logits.dim(1);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const T* row = logits.ptr() + r * c;
      predicted.push_back(static_cast<int>(std::max_element(row, row + c) - row));
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(inputs.size(), 1));
  return classification_report(inputs.labels, predicted, loss / n);
}

}  // namespace fhe_fedsim::nn
