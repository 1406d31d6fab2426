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
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fhe_fedsim/common/bytes.hpp"
#include "fhe_fedsim/common/error.hpp"
#include "fhe_fedsim/nn/model.hpp"
#include "fhe_fedsim/nn/tensor.hpp"

namespace fhe_fedsim::nn {

// Labelled items of one shape stored back to back.
struct Examples {
  Shape item_shape;
  std::vector<float> data;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t item_size() const { return element_count(item_shape); }

  std::span<const float> item(std::size_t i) const {
    return {data.data() + i * item_size(), item_size()};
  }

  void push(std::span<const float> values, int label) {
    if (values.size() != item_size()) throw StructuralError("example size mismatch");
    data.insert(data.end(), values.begin(), values.end());
    labels.push_back(label);
  }

  Examples subset(std::span<const std::size_t> indices) const {
    Examples out{item_shape, {}, {}};
    out.data.reserve(indices.size() * item_size());
    for (auto i : indices) out.push(item(i), labels.at(i));
    return out;
  }

  template <typename T>
  Tensor<T> batch(std::span<const std::size_t> indices) const {
    Shape shape{indices.size()};
    shape.insert(shape.end(), item_shape.begin(), item_shape.end());
    Tensor<T> t(shape);
    const std::size_t n = item_size();
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto src = item(indices[k]);
      std::copy(src.begin(), src.end(), t.data.begin() + static_cast<long>(k * n));
    }
    return t;
  }

  std::vector<int> batch_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(labels.at(i));
    return out;
  }

  friend bool operator==(const Examples&, const Examples&) = default;
};

// Four classes of 3-channel images. Class c carries a sinusoidal grating
// oriented at c * 45 degrees (random frequency, phase, small tilt jitter)
// and a soft blob in quadrant c, plus per-channel gain and gaussian noise,
// clamped to [0, 1]. Labels cycle 0,1,2,3 so classes stay balanced.
inline Examples synthetic_dataset(std::uint64_t seed, std::size_t n_samples,
                                  std::size_t image_size) {
  if (image_size < 8) throw ConfigError("image_size", "must be at least 8");
  if (n_samples == 0) throw ConfigError("n_samples", "must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.08);
  const std::size_t s = image_size;
  const double sd = static_cast<double>(s);
  Examples out{{kImageChannels, s, s}, {}, {}};
  out.data.reserve(n_samples * kImageChannels * s * s);
  std::vector<float> img(kImageChannels * s * s);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const int label = static_cast<int>(k % kNumClasses);
    const double theta = label * std::numbers::pi / 4 + (unit(rng) - 0.5) * 0.3;
    const double freq = 2.0 + 2.0 * unit(rng);
    const double phase = 2 * std::numbers::pi * unit(rng);
    const double bx = ((label % 2) * 0.5 + 0.25 + (unit(rng) - 0.5) * 0.16) * sd;
    const double by = ((label / 2) * 0.5 + 0.25 + (unit(rng) - 0.5) * 0.16) * sd;
    const double radius = 0.12 * sd;
    for (std::size_t c = 0; c < kImageChannels; ++c) {
      const double gain = 0.6 + 0.4 * unit(rng);
      for (std::size_t y = 0; y < s; ++y) {
        for (std::size_t x = 0; x < s; ++x) {
          const double u = (x * std::cos(theta) + y * std::sin(theta)) / sd;
          const double grating = std::sin(2 * std::numbers::pi * freq * u + phase);
          const double dx = x - bx, dy = y - by;
          const double blob = std::exp(-(dx * dx + dy * dy) / (2 * radius * radius));
          const double v = 0.5 + 0.2 * gain * grating + 0.35 * blob + noise(rng);
          img[(c * s + y) * s + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    out.push(img, label);
  }
  return out;
}

// Flat tensor file: "FTNS", u32 rank, u32 dims..., float32 payload, all
// little-endian.
inline Bytes encode_ftns(const Tensor<float>& t) {
  Bytes out;
  ByteWriter w(out);
  w.raw("FTNS");
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape) w.u32(static_cast<std::uint32_t>(d));
  for (float v : t.data) w.f32(v);
  return out;
}

inline Tensor<float> decode_ftns(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.raw(4) != "FTNS") throw ParseError("not an FTNS file: bad magic");
  const std::uint32_t rank = r.u32();
  if (rank == 0 || rank > 8) throw ParseError("FTNS rank out of range");
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = r.u32();
    count *= d;
    if (count * 4 > r.remaining()) throw ParseError("FTNS payload shorter than its shape");
  }
  if (count * 4 != r.remaining()) throw ParseError("FTNS payload length mismatch");
  std::vector<float> values(count);
  for (auto& v : values) v = r.f32();
  return Tensor<float>(std::move(shape), std::move(values));
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

// Reads <root>/<class>/*.ftns. Class folders sorted by name give labels
// 0..3. Images are [3, S, S] or grayscale [S, S] (replicated to three
// channels). Values already inside [0, 1] are kept; any other image is
// min-max rescaled into [0, 1].
inline Examples load_image_dir(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw ConfigError("data_dir", "not a directory: " + root.string());
  std::vector<fs::path> classes;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) classes.push_back(e.path());
  std::sort(classes.begin(), classes.end());
  if (classes.size() != kNumClasses) {
    throw ConfigError("data_dir", "expected 4 class folders, found " +
                                      std::to_string(classes.size()));
  }
  Examples out;
  for (std::size_t label = 0; label < classes.size(); ++label) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(classes[label]))
      if (e.is_regular_file() && e.path().extension() == ".ftns") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw ConfigError("data_dir", "class folder has no .ftns files: " + classes[label].string());
    }
    for (const auto& f : files) {
      Tensor<float> t = decode_ftns(read_file(f));
      if (t.rank() == 2) {
        Tensor<float> rgb({kImageChannels, t.dim(0), t.dim(1)});
        for (std::size_t c = 0; c < kImageChannels; ++c)
          std::copy(t.data.begin(), t.data.end(), rgb.data.begin() + static_cast<long>(c * t.size()));
        t = std::move(rgb);
      }
      if (t.rank() != 3 || t.dim(0) != kImageChannels || t.dim(1) != t.dim(2) || t.dim(1) < 8) {
        throw ParseError(f.string() + ": expected a square [3, S, S] image with S >= 8, got " +
                         shape_string(t.shape));
      }
      const auto [lo, hi] = std::minmax_element(t.data.begin(), t.data.end());
      if (*lo < 0.0f || *hi > 1.0f) {
        const float min = *lo, span = *hi - *lo;
        for (auto& v : t.data) v = span > 0 ? (v - min) / span : 0.0f;
      }
      if (out.item_shape.empty()) out.item_shape = t.shape;
      if (t.shape != out.item_shape) {
        throw ParseError(f.string() + ": image shape differs from the rest of the set");
      }
      out.push(t.data, static_cast<int>(label));
    }
  }
  return out;
}

struct ClientShard {
  Examples train;
  Examples test;
};

struct DatasetPartition {
  std::vector<ClientShard> clients;
  Examples holdout;
};

// Test share of one shard: floor(size / 10).
inline std::size_t test_split_size(std::size_t shard) { return shard / 10; }

// Shuffles and deals the dataset into n_clients disjoint shards; the first
// (size mod n_clients) shards take one extra sample so that every sample is
// used. Each shard keeps its first floor(10%) as the local test split.
inline DatasetPartition partition(const Examples& data, std::size_t n_clients,
                                  std::mt19937_64& rng, Examples holdout = {}) {
  if (n_clients == 0) throw ConfigError("clients", "must be at least 1");
  if (data.size() < n_clients) {
    throw ConfigError("clients", "fewer samples (" + std::to_string(data.size()) +
                                     ") than clients (" + std::to_string(n_clients) + ")");
  }
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  DatasetPartition p;
  p.holdout = std::move(holdout);
  const std::size_t base = data.size() / n_clients, extra = data.size() % n_clients;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < n_clients; ++k) {
    const std::size_t len = base + (k < extra ? 1 : 0);
    const std::span<const std::size_t> shard(order.data() + pos, len);
    const std::size_t n_test = test_split_size(len);
    p.clients.push_back({data.subset(shard.subspan(n_test)), data.subset(shard.first(n_test))});
    pos += len;
  }
  return p;
}

}  // namespace fhe_fedsim::nn
