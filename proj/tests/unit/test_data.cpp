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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "mgmd/checkpoint.hpp"
#include "mgmd/data.hpp"
#include "mgmd/errors.hpp"

namespace mgmd {
namespace {

std::vector<std::uint8_t> be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
          static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

std::vector<std::uint8_t> image_file(std::uint32_t n, std::uint32_t r, std::uint32_t c,
                                     std::uint8_t seed) {
  std::vector<std::uint8_t> out;
  for (auto v : {0x803u, n, r, c}) {
    const auto b = be32(v);
    out.insert(out.end(), b.begin(), b.end());
  }
  for (std::uint32_t i = 0; i < n * r * c; ++i) out.push_back(static_cast<std::uint8_t>(i * 37 + seed));
  return out;
}

std::vector<std::uint8_t> label_file(std::uint32_t n) {
  std::vector<std::uint8_t> out = be32(0x801);
  const auto b = be32(n);
  out.insert(out.end(), b.begin(), b.end());
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(i % 10));
  return out;
}

TEST(Idx, ParsesHandBuiltImages) {
  const auto bytes = image_file(3, 2, 2, 1);
  const IdxImages img = parse_idx_images(bytes);
  EXPECT_EQ(img.count, 3u);
  EXPECT_EQ(img.rows, 2u);
  EXPECT_EQ(img.cols, 2u);
  ASSERT_EQ(img.pixels.size(), 12u);
  EXPECT_EQ(img.pixels[0], 1);
  EXPECT_EQ(img.pixels[1], 38);
  EXPECT_EQ(serialize_idx_images(img), bytes);
}

TEST(Idx, LabelsRoundTrip) {
  const auto bytes = label_file(25);
  const auto labels = parse_idx_labels(bytes);
  ASSERT_EQ(labels.size(), 25u);
  EXPECT_EQ(labels[13], 3);
  EXPECT_EQ(serialize_idx_labels(labels), bytes);
}

TEST(Idx, BadMagicNamesOffset) {
  auto bytes = image_file(1, 2, 2, 0);
  bytes[3] = 0x01;
  try {
    parse_idx_images(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 0"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_idx_labels(image_file(1, 1, 1, 0)), FormatError);
}

TEST(Idx, TruncationIsAFormatError) {
  auto bytes = image_file(4, 3, 3, 0);
  bytes.resize(bytes.size() - 1);
  EXPECT_THROW(parse_idx_images(bytes), FormatError);
  EXPECT_THROW(parse_idx_images(std::vector<std::uint8_t>{0, 0, 8}), FormatError);
  auto labels = label_file(5);
  labels.push_back(1);
  EXPECT_THROW(parse_idx_labels(labels), FormatError);
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("mgmd_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

using IdxFiles = TempDir;

TEST_F(IdxFiles, LoadScalesPixelsAndKeepsBytes) {
  const auto img = image_file(6, 3, 2, 5);
  write_file_atomic(dir_ / "img", std::span<const std::uint8_t>(img));
  const auto lbl = label_file(6);
  write_file_atomic(dir_ / "lbl", std::span<const std::uint8_t>(lbl));
  const Dataset d = load_mnist_idx(dir_ / "img", dir_ / "lbl");
  EXPECT_EQ(d.size(), 6u);
  EXPECT_EQ(d.samples.cols(), 6u);
  EXPECT_EQ(d.source, DataSource::kMnist);
  EXPECT_DOUBLE_EQ(d.samples.at(0, 0), 5.0 / 255.0);
  EXPECT_EQ(d.labels[4], 4);
  const IdxImages parsed = parse_idx_images(img);
  EXPECT_EQ(to_pixel_bytes(d.samples), parsed.pixels);
}

TEST_F(IdxFiles, CountMismatchAndMissingFiles) {
  const auto img = image_file(6, 2, 2, 0);
  write_file_atomic(dir_ / "img", std::span<const std::uint8_t>(img));
  const auto lbl = label_file(5);
  write_file_atomic(dir_ / "lbl", std::span<const std::uint8_t>(lbl));
  EXPECT_THROW(load_mnist_idx(dir_ / "img", dir_ / "lbl"), FormatError);
  EXPECT_ANY_THROW(load_mnist_idx(dir_ / "nope", dir_ / "lbl"));
}

TEST(Ring, ShapeRangeAndDeterminism) {
  const RingSpec spec{500, 8, 2.0, 0.05, 3};
  const Dataset a = synth_gaussian_ring(spec);
  EXPECT_EQ(a.samples.rows(), 500u);
  EXPECT_EQ(a.samples.cols(), 2u);
  for (double v : a.samples.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  for (auto l : a.labels) EXPECT_LT(l, 8);
  EXPECT_EQ(a, synth_gaussian_ring(spec));
  RingSpec other = spec;
  other.seed = 4;
  EXPECT_NE(a.samples, synth_gaussian_ring(other).samples);
  std::set<std::uint64_t> ids(a.ids.begin(), a.ids.end());
  EXPECT_EQ(ids.size(), 500u);
}

TEST(Ring, ModesSitOnTheRescaledCircle) {
  const RingSpec spec{4000, 8, 2.0, 0.05, 1};
  const Dataset d = synth_gaussian_ring(spec);
  const auto centers = ring_centers(spec);
  ASSERT_EQ(centers.size(), 8u);
  std::map<int, std::pair<double, double>> sums;
  std::map<int, int> counts;
  for (std::size_t i = 0; i < d.size(); ++i) {
    sums[d.labels[i]].first += d.samples.at(i, 0);
    sums[d.labels[i]].second += d.samples.at(i, 1);
    ++counts[d.labels[i]];
  }
  const double e = spec.radius + 4 * spec.sigma;
  for (int m = 0; m < 8; ++m) {
    ASSERT_GT(counts[m], 300);
    const double angle = 2.0 * std::acos(-1.0) * m / 8.0;
    const double cx = (spec.radius * std::cos(angle) + e) / (2 * e);
    const double cy = (spec.radius * std::sin(angle) + e) / (2 * e);
    EXPECT_NEAR(sums[m].first / counts[m], cx, 0.005);
    EXPECT_NEAR(sums[m].second / counts[m], cy, 0.005);
  }
}

TEST(Split, DisjointAndSized) {
  const Dataset d = synth_gaussian_ring({100, 4, 2.0, 0.1, 0});
  const auto s = split(d, {30, 20, 9});
  EXPECT_EQ(s.train.size(), 30u);
  EXPECT_EQ(s.holdout.size(), 20u);
  std::set<std::uint64_t> ids(s.train.ids.begin(), s.train.ids.end());
  for (auto id : s.holdout.ids) EXPECT_FALSE(ids.contains(id));
  EXPECT_EQ(split(d, {30, 0, 9}).holdout.size(), 70u);
  EXPECT_THROW(split(d, {90, 20, 0}), ContractError);
  EXPECT_THROW(split(d, {0, 20, 0}), ContractError);
}

void expect_valid_partition(const PartitionSet& p, std::size_t n, std::size_t k) {
  ASSERT_EQ(p.parts.size(), k);
  std::vector<int> seen(n, 0);
  std::size_t lo = n, hi = 0;
  for (const auto& part : p.parts) {
    lo = std::min(lo, part.size());
    hi = std::max(hi, part.size());
    for (auto i : part) {
      ASSERT_LT(i, n);
      ++seen[i];
    }
  }
  for (int s : seen) ASSERT_EQ(s, 1);
  EXPECT_LE(hi - lo, 1u);
}

TEST(Partition, InvariantsOnSmallGrid) {
  for (std::size_t n = 1; n <= 40; ++n) {
    for (std::size_t k = 1; k <= std::min<std::size_t>(n, 10); ++k) {
      expect_valid_partition(partition(n, k, n * 31 + k), n, k);
    }
  }
}

TEST(Partition, SeededAndRejectsBadK) {
  EXPECT_EQ(partition(50, 3, 1), partition(50, 3, 1));
  EXPECT_NE(partition(50, 3, 1), partition(50, 3, 2));
  EXPECT_THROW(partition(5, 0, 1), ContractError);
  EXPECT_THROW(partition(5, 6, 1), ContractError);
  EXPECT_THROW(partition(0, 1, 1), ContractError);
}

TEST(Partition, StratifiedBalancesLabels) {
  const Dataset d = synth_gaussian_ring({301, 8, 2.0, 0.05, 2});
  const auto p = partition_stratified(d, 4, 5);
  expect_valid_partition(p, d.size(), 4);
  EXPECT_TRUE(p.stratified);
  std::map<int, std::vector<int>> per_label;
  for (std::size_t part = 0; part < 4; ++part) {
    for (auto i : p.parts[part]) {
      auto& v = per_label[d.labels[i]];
      v.resize(4, 0);
      ++v[part];
    }
  }
  for (auto& [label, counts] : per_label) {
    counts.resize(4, 0);
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    EXPECT_LE(*hi - *lo, 1) << "label " << label;
  }
}

}  // namespace
}  // namespace mgmd
