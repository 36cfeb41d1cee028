/*
 * Copyright 2026 The BRCA-Sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "brca/data.hpp"
#include "brca/model.hpp"

namespace brca::data {
namespace {

using Row = std::pair<std::vector<double>, int>;

std::multiset<Row> rows_of(const nn::Batch& b) {
  std::multiset<Row> out;
  for (std::size_t r = 0; r < b.size(); ++r) {
    const auto x = b.inputs.row(r);
    out.insert({{x.begin(), x.end()}, b.labels[r]});
  }
  return out;
}

std::vector<double> class_mean(const nn::Batch& b, int c) {
  std::vector<double> m(b.dim(), 0.0);
  std::size_t n = 0;
  for (std::size_t r = 0; r < b.size(); ++r)
    if (b.labels[r] == c) {
      for (std::size_t j = 0; j < b.dim(); ++j) m[j] += b.inputs.row(r)[j];
      ++n;
    }
  for (double& v : m) v /= static_cast<double>(n);
  return m;
}

TEST(MakeBlobs, SplitArithmetic) {
  const auto ds = make_blobs({10, 5, 1000, 0.3}, 1);
  EXPECT_EQ(ds.train.size(), 8000u);
  EXPECT_EQ(ds.test.size(), 2000u);
  EXPECT_EQ(ds.num_classes, 10u);
  const auto small = make_blobs({10, 5, 100, 0.3}, 1);
  EXPECT_EQ(small.train.size(), 800u);
  EXPECT_EQ(small.test.size(), 200u);
}

TEST(MakeBlobs, DeterministicAndUnitNormMeans) {
  const auto a = make_blobs({3, 4, 20, 0.3}, 9), b = make_blobs({3, 4, 20, 0.3}, 9);
  EXPECT_EQ(a.train.inputs.data, b.train.inputs.data);
  EXPECT_EQ(a.test.labels, b.test.labels);
  const auto flat = make_blobs({3, 4, 20, 0.0}, 9);
  for (int c = 0; c < 3; ++c) {
    const auto m = class_mean(flat.train, c);
    double norm = 0.0;
    for (double v : m) norm += v * v;
    EXPECT_NEAR(norm, 1.0, 1e-12);
  }
}

TEST(MakeBlobs, ZeroSpreadRowsIdenticalWithinClass) {
  const auto ds = make_blobs({4, 3, 10, 0.0}, 2);
  std::map<int, std::vector<double>> first;
  for (std::size_t r = 0; r < ds.train.size(); ++r) {
    const auto x = ds.train.inputs.row(r);
    auto [it, fresh] = first.emplace(ds.train.labels[r], std::vector<double>(x.begin(), x.end()));
    if (!fresh) EXPECT_TRUE(std::equal(x.begin(), x.end(), it->second.begin()));
  }
}

TEST(MakeBlobs, RejectsZeroCounts) {
  EXPECT_THROW(make_blobs({0, 3, 10, 0.1}, 1), InvalidArgument);
  EXPECT_THROW(make_blobs({3, 3, 10, -1.0}, 1), InvalidArgument);
}

TEST(SourceDomain, DifferentMeansSameShape) {
  const BlobParams bp{10, 20, 50, 0.0};
  const auto target = make_blobs(bp, 5);
  const auto source = make_source_domain(bp, 5);
  EXPECT_EQ(source.train.dim(), target.train.dim());
  EXPECT_EQ(source.num_classes, target.num_classes);
  for (int c = 0; c < 10; ++c) {
    const auto a = class_mean(target.train, c), b = class_mean(source.train, c);
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
    EXPECT_GT(d, 0.0);
  }
  EXPECT_EQ(partition(source, {Scheme::kNonIid2, 10, 1}).size(), 10u);
}

TEST(Partition, IidEveryClientAllClassesEqualSizes) {
  const auto ds = make_blobs({10, 4, 100, 0.3}, 1);
  const auto shards = partition(ds, {Scheme::kIid, 10, 3});
  for (const auto& s : shards) {
    EXPECT_EQ(distinct_labels(s.private_data).size(), 10u);
    EXPECT_EQ(s.private_data.size(), shards[0].private_data.size());
  }
}

TEST(Partition, NonIid1OneClassPerClientOneClientPerClass) {
  const auto ds = make_blobs({10, 4, 100, 0.3}, 1);
  const auto shards = partition(ds, {Scheme::kNonIid1, 10, 3});
  std::map<int, int> owners;
  for (const auto& s : shards) {
    const auto labels = distinct_labels(s.private_data);
    ASSERT_EQ(labels.size(), 1u);
    ++owners[*labels.begin()];
  }
  EXPECT_EQ(owners.size(), 10u);
  for (const auto& [c, k] : owners) EXPECT_EQ(k, 1);
}

class PartitionSchemes : public ::testing::TestWithParam<std::pair<Scheme, std::size_t>> {};

TEST_P(PartitionSchemes, LabelSkewAndExactness) {
  const auto [scheme, m] = GetParam();
  const auto ds = make_blobs({10, 3, 103, 0.3}, 4);
  for (std::size_t n : {10u, 20u}) {
    const auto shards = partition(ds, {scheme, n, 8});
    ASSERT_EQ(shards.size(), n);
    std::multiset<Row> all;
    std::map<int, std::size_t> per_class;
    for (const auto& s : shards) {
      EXPECT_EQ(distinct_labels(s.private_data).size(), m);
      for (auto& r : rows_of(s.private_data)) {
        ++per_class[r.second];
        all.insert(r);
      }
    }
    // Every class is used and loses only the divisibility remainder.
    const std::size_t per_class_train = ds.train.size() / 10;
    const std::size_t P = n * m / 10;
    for (const auto& [c, count] : per_class) EXPECT_EQ(count, per_class_train / P * P);
    const auto train = rows_of(ds.train);
    EXPECT_TRUE(std::includes(train.begin(), train.end(), all.begin(), all.end()));
  }
}

INSTANTIATE_TEST_SUITE_P(AllSchemes, PartitionSchemes,
                         ::testing::Values(std::pair{Scheme::kNonIid1, std::size_t{1}},
                                           std::pair{Scheme::kNonIid2, std::size_t{2}},
                                           std::pair{Scheme::kNonIid3, std::size_t{5}},
                                           std::pair{Scheme::kIid, std::size_t{10}}));

TEST(Partition, InfeasibleSpecThrows) {
  const auto ds = make_blobs({10, 3, 20, 0.3}, 1);
  EXPECT_THROW(partition(ds, {Scheme::kNonIid2, 3, 1}), InvalidArgument);
  EXPECT_THROW(partition(ds, {Scheme::kNonIid1, 0, 1}), InvalidArgument);
}

TEST(Partition, Deterministic) {
  const auto ds = make_blobs({10, 3, 20, 0.3}, 1);
  const auto a = partition(ds, {Scheme::kNonIid2, 10, 6}), b = partition(ds, {Scheme::kNonIid2, 10, 6});
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].private_data.inputs.data, b[i].private_data.inputs.data);
}

ClientShard shard_with(const std::vector<std::size_t>& per_class) {
  ClientShard s;
  s.client_id = 3;
  for (std::size_t c = 0; c < per_class.size(); ++c)
    for (std::size_t i = 0; i < per_class[c]; ++i)
      s.private_data.push_back(std::vector<double>{static_cast<double>(c), static_cast<double>(i)},
                               static_cast<int>(c));
  return s;
}

TEST(ExtractShared, HalfOfTwoClasses) {
  const auto cd = extract_shared(shard_with({100, 100}), 0.5, 1);
  for (int c : {0, 1}) {
    EXPECT_EQ(std::count(cd.shared.labels.begin(), cd.shared.labels.end(), c), 50);
    EXPECT_EQ(std::count(cd.private_data.labels.begin(), cd.private_data.labels.end(), c), 50);
  }
}

TEST(ExtractShared, OnePercentOfMonoClass) {
  const auto cd = extract_shared(shard_with({1000}), 0.01, 1);
  EXPECT_EQ(cd.shared.size(), 10u);
  EXPECT_EQ(cd.private_data.size(), 990u);
}

TEST(ExtractShared, DisjointMoveAndDeterministic) {
  const auto src = shard_with({37, 0, 58});
  const auto a = extract_shared(src, 0.2, 4), b = extract_shared(src, 0.2, 4);
  EXPECT_EQ(a.shared.inputs.data, b.shared.inputs.data);
  auto all = rows_of(a.private_data);
  for (auto& r : rows_of(a.shared)) {
    EXPECT_EQ(all.count(r), 0u);
    all.insert(r);
  }
  EXPECT_EQ(all, rows_of(src.private_data));
}

TEST(ExtractShared, EmptySharedThrows) {
  EXPECT_THROW(extract_shared(shard_with({10, 10}), 0.01, 1), InvalidArgument);
  EXPECT_THROW(extract_shared(shard_with({10}), 0.0, 1), InvalidArgument);
  EXPECT_THROW(extract_shared(shard_with({10}), 1.0, 1), InvalidArgument);
}

TEST(ExtractShared, PerClassRoundingAndRate) {
  const auto ds = make_blobs({10, 20, 250, 0.3}, 2);
  for (auto scheme : {Scheme::kNonIid1, Scheme::kNonIid2, Scheme::kNonIid3, Scheme::kIid}) {
    for (double gamma : {0.01, 0.05, 0.1}) {
      for (const auto& s : partition(ds, {scheme, 10, 3})) {
        std::map<int, std::size_t> counts;
        for (int y : s.private_data.labels) ++counts[y];
        std::size_t expected = 0, smallest = SIZE_MAX;
        for (const auto& [y, c] : counts) {
          expected += static_cast<std::size_t>(std::lround(gamma * static_cast<double>(c)));
          smallest = std::min(smallest, c);
        }
        if (expected == 0) {
          EXPECT_THROW(extract_shared(s, gamma, 7), InvalidArgument);
          continue;
        }
        const auto cd = extract_shared(s, gamma, 7);
        EXPECT_EQ(cd.shared.size(), expected);
        EXPECT_EQ(cd.shared.size() + cd.private_data.size(), s.private_data.size());
        if (gamma * static_cast<double>(smallest) < 5.0) continue;
        const double rate = static_cast<double>(cd.shared.size()) / static_cast<double>(s.private_data.size());
        EXPECT_GE(rate, 0.8 * gamma);
        EXPECT_LE(rate, 1.2 * gamma);
        EXPECT_EQ(distinct_labels(cd.shared), distinct_labels(s.private_data));
      }
    }
  }
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_idx(const std::filesystem::path& dir, const std::string& prefix, std::uint32_t n) {
  std::ofstream img(dir / (prefix + "-images-idx3-ubyte"), std::ios::binary);
  std::ofstream lbl(dir / (prefix + "-labels-idx1-ubyte"), std::ios::binary);
  write_be32(img, 0x803);
  write_be32(img, n);
  write_be32(img, 2);
  write_be32(img, 2);
  write_be32(lbl, 0x801);
  write_be32(lbl, n);
  for (std::uint32_t s = 0; s < n; ++s) {
    for (int j = 0; j < 4; ++j) img.put(static_cast<char>(s * 10 + j));
    lbl.put(static_cast<char>(s % 3));
  }
}

TEST(IdxLoader, ReadsPairsAndScalesPixels) {
  const auto dir = std::filesystem::temp_directory_path() / "brca_idx_test";
  std::filesystem::create_directories(dir);
  write_idx(dir, "train", 6);
  write_idx(dir, "t10k", 3);
  const auto ds = idx::load_dataset(dir.string());
  EXPECT_EQ(ds.provenance, Provenance::kFile);
  EXPECT_EQ(ds.train.size(), 6u);
  EXPECT_EQ(ds.test.size(), 3u);
  EXPECT_EQ(ds.train.dim(), 4u);
  EXPECT_EQ(ds.num_classes, 3u);
  EXPECT_DOUBLE_EQ(ds.train.inputs.row(1)[2], 12.0 / 255.0);
  EXPECT_THROW(idx::load_dataset((dir / "missing").string()), InvalidArgument);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace brca::data
