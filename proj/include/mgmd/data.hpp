// Copyright 2026 The mgmd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mgmd/errors.hpp"
#include "mgmd/numerics/rng.hpp"
#include "mgmd/numerics/tensor.hpp"

namespace mgmd {

enum class DataSource { kMnist, kSynthetic };

inline std::string_view to_string(DataSource s) {
  return s == DataSource::kMnist ? "mnist" : "synthetic";
}

// n x d samples, one row per sample, with stable per-sample ids that survive
// splitting and partitioning.
struct Dataset {
  Tensor samples;
  DataSource source = DataSource::kSynthetic;
  std::vector<std::uint64_t> ids;
  // Class label (MNIST digit or ring mode). Empty when unknown.
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return samples.cols(); }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.samples = samples.gather_rows(indices);
    out.source = source;
    out.ids.reserve(indices.size());
    for (std::size_t i : indices) out.ids.push_back(ids.at(i));
    if (!labels.empty()) {
      out.labels.reserve(indices.size());
      for (std::size_t i : indices) out.labels.push_back(labels.at(i));
    }
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---------------------------------------------------------------------------
// IDX

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset,
                               const std::string& file) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(file + ": truncated header at byte offset " + std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace detail

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

inline IdxImages parse_idx_images(std::span<const std::uint8_t> bytes,
                                  const std::string& name = "images") {
  const std::uint32_t magic = detail::read_be32(bytes, 0, name);
  if (magic != kIdxImageMagic) {
    std::ostringstream msg;
    msg << name << ": bad magic 0x" << std::hex << magic << " at byte offset 0";
    throw FormatError(msg.str());
  }
  IdxImages img;
  img.count = detail::read_be32(bytes, 4, name);
  img.rows = detail::read_be32(bytes, 8, name);
  img.cols = detail::read_be32(bytes, 12, name);
  const std::size_t need = std::size_t{img.count} * img.rows * img.cols;
  if (bytes.size() - 16 < need) {
    throw FormatError(name + ": truncated payload at byte offset " +
                      std::to_string(bytes.size()) + ", expected " +
                      std::to_string(16 + need) + " bytes");
  }
  if (bytes.size() - 16 > need) {
    throw FormatError(name + ": unexpected trailing data at byte offset " +
                      std::to_string(16 + need));
  }
  img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return img;
}

inline std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes,
                                                  const std::string& name = "labels") {
  const std::uint32_t magic = detail::read_be32(bytes, 0, name);
  if (magic != kIdxLabelMagic) {
    std::ostringstream msg;
    msg << name << ": bad magic 0x" << std::hex << magic << " at byte offset 0";
    throw FormatError(msg.str());
  }
  const std::uint32_t count = detail::read_be32(bytes, 4, name);
  if (bytes.size() - 8 < count) {
    throw FormatError(name + ": truncated payload at byte offset " +
                      std::to_string(bytes.size()) + ", expected " +
                      std::to_string(8 + std::size_t{count}) + " bytes");
  }
  if (bytes.size() - 8 > count) {
    throw FormatError(name + ": unexpected trailing data at byte offset " +
                      std::to_string(8 + std::size_t{count}));
  }
  return {bytes.begin() + 8, bytes.begin() + 8 + count};
}

inline std::vector<std::uint8_t> serialize_idx_images(const IdxImages& img) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + img.pixels.size());
  detail::put_be32(out, kIdxImageMagic);
  detail::put_be32(out, img.count);
  detail::put_be32(out, img.rows);
  detail::put_be32(out, img.cols);
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline std::vector<std::uint8_t> serialize_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  detail::put_be32(out, kIdxLabelMagic);
  detail::put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

// Reads an IDX image/label file pair. Pixels are scaled by 1/255 and each
// image is flattened row-major.
inline Dataset load_mnist_idx(const std::filesystem::path& images_path,
                              const std::filesystem::path& labels_path) {
  const auto image_bytes = detail::read_file_bytes(images_path);
  const auto label_bytes = detail::read_file_bytes(labels_path);
  IdxImages img = parse_idx_images(image_bytes, images_path.string());
  std::vector<std::uint8_t> labels = parse_idx_labels(label_bytes, labels_path.string());
  if (labels.size() != img.count) {
    throw FormatError("count mismatch at byte offset 4: " + std::to_string(img.count) +
                      " images but " + std::to_string(labels.size()) + " labels");
  }
  if (img.count == 0) throw FormatError(images_path.string() + ": zero images");
  const std::size_t d = std::size_t{img.rows} * img.cols;
  Dataset ds;
  ds.source = DataSource::kMnist;
  std::vector<double> values(img.pixels.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = img.pixels[i] / 255.0;
  ds.samples = Tensor({img.count, d}, std::move(values));
  ds.ids.resize(img.count);
  std::iota(ds.ids.begin(), ds.ids.end(), std::uint64_t{0});
  ds.labels = std::move(labels);
  return ds;
}

// Inverse of the 1/255 scaling; exact for data produced by load_mnist_idx.
inline std::vector<std::uint8_t> to_pixel_bytes(const Tensor& samples) {
  std::vector<std::uint8_t> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(samples[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic 2-D mixture

struct RingSpec {
  std::size_t n = 2000;
  std::size_t modes = 8;
  double radius = 2.0;
  double sigma = 0.05;
  std::uint64_t seed = 0;
};

namespace detail {

inline double ring_extent(const RingSpec& spec) { return spec.radius + 4.0 * spec.sigma; }

inline double ring_rescale(double v, double extent) {
  return std::clamp((v + extent) / (2.0 * extent), 0.0, 1.0);
}

}  // namespace detail

// Mode centres after the affine map into [0,1]^2.
inline std::vector<std::pair<double, double>> ring_centers(const RingSpec& spec) {
  const double extent = detail::ring_extent(spec);
  std::vector<std::pair<double, double>> out;
  for (std::size_t m = 0; m < spec.modes; ++m) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) /
                         static_cast<double>(spec.modes);
    out.emplace_back(detail::ring_rescale(spec.radius * std::cos(angle), extent),
                     detail::ring_rescale(spec.radius * std::sin(angle), extent));
  }
  return out;
}

// Mixture of equally weighted isotropic Gaussians spaced on a circle. Raw
// coordinates are mapped by the fixed affine transform
// v -> (v + e) / 2e, e = radius + 4 sigma, then clamped into [0,1].
inline Dataset synth_gaussian_ring(const RingSpec& spec) {
  detail::require(spec.modes >= 1, "synth_gaussian_ring: modes must be >= 1");
  detail::require(spec.sigma > 0.0, "synth_gaussian_ring: sigma must be > 0");
  detail::require(spec.n >= 1, "synth_gaussian_ring: n must be >= 1");
  Rng rng(spec.seed);
  const double extent = detail::ring_extent(spec);
  Dataset ds;
  ds.source = DataSource::kSynthetic;
  ds.samples = Tensor({spec.n, 2});
  ds.ids.resize(spec.n);
  ds.labels.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto mode = rng.index(spec.modes);
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(mode) /
                         static_cast<double>(spec.modes);
    const double x = spec.radius * std::cos(angle) + spec.sigma * rng.normal();
    const double y = spec.radius * std::sin(angle) + spec.sigma * rng.normal();
    ds.samples.at(i, 0) = detail::ring_rescale(x, extent);
    ds.samples.at(i, 1) = detail::ring_rescale(y, extent);
    ds.ids[i] = i;
    ds.labels[i] = static_cast<std::uint8_t>(mode % 256);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Splitting and partitioning

struct SplitSpec {
  std::size_t train_size = 0;
  // 0 means "everything not in train".
  std::size_t holdout_size = 0;
  std::uint64_t seed = 0;
};

struct TrainHoldout {
  Dataset train;
  Dataset holdout;
};

inline TrainHoldout split(const Dataset& dataset, const SplitSpec& spec) {
  const std::size_t n = dataset.size();
  if (spec.train_size == 0 || spec.train_size > n ||
      spec.holdout_size > n - spec.train_size) {
    throw ContractError("split: requested train=" + std::to_string(spec.train_size) +
                        " holdout=" + std::to_string(spec.holdout_size) + " from n=" +
                        std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(std::span(order));
  const std::size_t holdout =
      spec.holdout_size == 0 ? n - spec.train_size : spec.holdout_size;
  std::span<const std::size_t> all(order);
  TrainHoldout out;
  out.train = dataset.subset(all.subspan(0, spec.train_size));
  out.holdout = dataset.subset(all.subspan(spec.train_size, holdout));
  return out;
}

// K disjoint index sets into a parent dataset.
struct PartitionSet {
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> parts;
  std::uint64_t seed = 0;
  bool stratified = false;

  friend bool operator==(const PartitionSet&, const PartitionSet&) = default;
};

namespace detail {

inline PartitionSet deal_round_robin(std::span<const std::size_t> order, std::size_t k,
                                     std::uint64_t seed, bool stratified) {
  PartitionSet ps;
  ps.k = k;
  ps.seed = seed;
  ps.stratified = stratified;
  ps.parts.resize(k);
  for (std::size_t i = 0; i < order.size(); ++i) ps.parts[i % k].push_back(order[i]);
  return ps;
}

}  // namespace detail

// Shuffle by seed, then deal round-robin: part sizes differ by at most one
// and the first n mod k parts receive the extra sample.
inline PartitionSet partition(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 1 || k > n) {
    throw ContractError("partition: k=" + std::to_string(k) + " must satisfy 1 <= k <= n=" +
                        std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));
  return detail::deal_round_robin(order, k, seed, false);
}

inline PartitionSet partition(const Dataset& train, std::size_t k, std::uint64_t seed) {
  return partition(train.size(), k, seed);
}

// Label-stratified variant: classes are shuffled individually and laid out
// back to back before dealing, so every part receives each class in
// proportion. Size invariants are the same as partition().
inline PartitionSet partition_stratified(const Dataset& train, std::size_t k,
                                         std::uint64_t seed) {
  const std::size_t n = train.size();
  if (k < 1 || k > n) {
    throw ContractError("partition: k=" + std::to_string(k) + " must satisfy 1 <= k <= n=" +
                        std::to_string(n));
  }
  if (train.labels.size() != n) {
    throw ContractError("partition_stratified: dataset has no labels");
  }
  std::map<std::uint8_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < n; ++i) by_label[train.labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> order;
  order.reserve(n);
  for (auto& [label, members] : by_label) {
    rng.shuffle(std::span(members));
    order.insert(order.end(), members.begin(), members.end());
  }
  return detail::deal_round_robin(order, k, seed, true);
}

}  // namespace mgmd
