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

#pragma once

// Synthetic corpora, label-skew partitioning and shared-data extraction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "brca/error.hpp"
#include "brca/model.hpp"
#include "brca/rng.hpp"

namespace brca::data {

using nn::Batch;

enum class Provenance { kSyntheticBlobs, kFile };

struct Dataset {
  Batch train;
  Batch test;
  std::size_t num_classes = 0;
  Provenance provenance = Provenance::kSyntheticBlobs;
};

struct BlobParams {
  std::size_t num_classes = 10;
  std::size_t dim = 10;
  std::size_t per_class = 250;
  double spread = 0.3;
};

/// Isotropic Gaussian blobs around seeded unit-norm class means. Each class
/// is split 80/20 into train and test.
inline Dataset make_blobs(const BlobParams& p, std::uint64_t seed) {
  if (p.num_classes == 0 || p.dim == 0 || p.per_class == 0)
    throw InvalidArgument("make_blobs: all counts must be positive");
  if (!(p.spread >= 0.0)) throw InvalidArgument("make_blobs: spread must be non-negative");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> means(p.num_classes, std::vector<double>(p.dim));
  for (auto& m : means) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : m) {
        v = normal(rng);
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : m) v /= norm;
  }

  const std::size_t n_test = p.per_class / 5;
  Dataset ds;
  ds.num_classes = p.num_classes;
  ds.train.inputs = nn::Matrix(0, p.dim);
  ds.test.inputs = nn::Matrix(0, p.dim);
  std::vector<double> x(p.dim);
  for (std::size_t c = 0; c < p.num_classes; ++c) {
    for (std::size_t s = 0; s < p.per_class; ++s) {
      for (std::size_t j = 0; j < p.dim; ++j) x[j] = means[c][j] + p.spread * normal(rng);
      const bool is_test = s >= p.per_class - n_test;
      (is_test ? ds.test : ds.train).push_back(x, static_cast<int>(c));
    }
  }
  return ds;
}

/// Related-but-different task: same shape, class means from a disjoint seed stream.
inline Dataset make_source_domain(const BlobParams& target, std::uint64_t seed) {
  return make_blobs(target, derive_seed(seed, Stream::kSourceDomain));
}

enum class Scheme { kNonIid1, kNonIid2, kNonIid3, kIid };

/// Classes per client: 1 / 2 / 5 / 10 at ten classes, scaled otherwise.
inline std::size_t classes_per_client(Scheme s, std::size_t num_classes) {
  const double base = s == Scheme::kNonIid1 ? 1 : s == Scheme::kNonIid2 ? 2 : s == Scheme::kNonIid3 ? 5 : 10;
  const auto m = static_cast<std::size_t>(std::lround(base * static_cast<double>(num_classes) / 10.0));
  return std::clamp<std::size_t>(m, 1, num_classes);
}

struct PartitionSpec {
  Scheme scheme = Scheme::kNonIid2;
  std::size_t num_clients = 10;
  std::uint64_t seed = 0;
};

// A client's data before shared extraction.
struct ClientShard {
  std::size_t client_id = 0;
  Batch private_data;
};

struct ClientData {
  std::size_t client_id = 0;
  Batch private_data;  // D_i^p
  Batch shared;        // D_i^s, held by the server
};

inline std::vector<std::vector<std::size_t>> rows_by_class(const Batch& b, std::size_t num_classes) {
  std::vector<std::vector<std::size_t>> out(num_classes);
  for (std::size_t r = 0; r < b.size(); ++r) out.at(static_cast<std::size_t>(b.labels[r])).push_back(r);
  return out;
}

/// Piece-splitting label-skew partition. Each class's train rows are split
/// into P equal pieces (remainder dropped) and every client receives
/// classes-per-client pieces of distinct classes; every piece goes to
/// exactly one client.
inline std::vector<ClientShard> partition(const Dataset& ds, const PartitionSpec& spec) {
  const std::size_t C = ds.num_classes;
  const std::size_t n = spec.num_clients;
  if (n == 0) throw InvalidArgument("partition: need at least one client");
  const std::size_t m = classes_per_client(spec.scheme, C);
  if ((n * m) % C != 0)
    throw InvalidArgument("partition: num-clients * classes-per-client (" + std::to_string(n * m) +
                          ") is not a multiple of num-classes (" + std::to_string(C) + ")");
  const std::size_t P = n * m / C;

  Rng rng(spec.seed);
  std::vector<std::size_t> class_order(C);
  std::iota(class_order.begin(), class_order.end(), std::size_t{0});
  std::shuffle(class_order.begin(), class_order.end(), rng);

  auto by_class = rows_by_class(ds.train, C);
  std::vector<std::vector<std::vector<std::size_t>>> pieces(C);
  for (std::size_t c = 0; c < C; ++c) {
    auto& rows = by_class[c];
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t piece_len = rows.size() / P;
    if (piece_len == 0)
      throw InvalidArgument("partition: class " + std::to_string(c) + " has fewer samples than pieces");
    for (std::size_t k = 0; k < P; ++k)
      pieces[c].emplace_back(rows.begin() + static_cast<std::ptrdiff_t>(k * piece_len),
                             rows.begin() + static_cast<std::ptrdiff_t>((k + 1) * piece_len));
  }

  // Client i takes a window of m consecutive classes. With C | n the window
  // slides by one class per client; otherwise it advances by m slots.
  const std::size_t stride = (n % C == 0) ? 1 : m;
  std::vector<std::size_t> next_piece(C, 0);
  std::vector<ClientShard> clients(n);
  for (std::size_t i = 0; i < n; ++i) {
    clients[i].client_id = i;
    std::vector<std::size_t> rows;
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t c = class_order[(i * stride + j) % C];
      const auto& piece = pieces[c].at(next_piece[c]++);
      rows.insert(rows.end(), piece.begin(), piece.end());
    }
    std::sort(rows.begin(), rows.end());
    clients[i].private_data = ds.train.subset(rows);
  }
  return clients;
}

/// Moves round(gamma * count) samples of every class present at the client
/// into its shared shard.
inline ClientData extract_shared(const ClientShard& shard, double gamma, std::uint64_t seed) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("extract_shared: gamma must be in (0, 1)");
  const Batch& src = shard.private_data;
  std::size_t num_classes = 0;
  for (int y : src.labels) num_classes = std::max(num_classes, static_cast<std::size_t>(y) + 1);
  auto by_class = rows_by_class(src, num_classes);

  Rng rng(seed);
  std::vector<bool> to_shared(src.size(), false);
  std::vector<std::size_t> shared_rows;
  for (auto& rows : by_class) {
    if (rows.empty()) continue;
    const auto k = static_cast<std::size_t>(std::lround(gamma * static_cast<double>(rows.size())));
    std::shuffle(rows.begin(), rows.end(), rng);
    std::sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t t = 0; t < k; ++t) {
      to_shared[rows[t]] = true;
      shared_rows.push_back(rows[t]);
    }
  }
  if (shared_rows.empty())
    throw InvalidArgument("extract_shared: gamma=" + std::to_string(gamma) + " leaves client " +
                          std::to_string(shard.client_id) + " with no shared samples");
  std::vector<std::size_t> private_rows;
  for (std::size_t r = 0; r < src.size(); ++r)
    if (!to_shared[r]) private_rows.push_back(r);

  ClientData out;
  out.client_id = shard.client_id;
  out.private_data = src.subset(private_rows);
  out.shared = src.subset(shared_rows);
  return out;
}

inline std::set<int> distinct_labels(const Batch& b) { return {b.labels.begin(), b.labels.end()}; }

// IDX (MNIST-style) reader: big-endian magic, then dims, then raw bytes.
namespace idx {

inline std::uint32_t read_be32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw InvalidArgument("idx: truncated header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

/// Reads an image/label file pair into a batch with pixels scaled to [0, 1].
inline Batch load_pair(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary), lbl(labels_path, std::ios::binary);
  if (!img) throw InvalidArgument("idx: cannot open " + images_path);
  if (!lbl) throw InvalidArgument("idx: cannot open " + labels_path);
  if (read_be32(img) != 0x00000803u) throw InvalidArgument("idx: bad image magic in " + images_path);
  const std::uint32_t n = read_be32(img), rows = read_be32(img), cols = read_be32(img);
  if (read_be32(lbl) != 0x00000801u) throw InvalidArgument("idx: bad label magic in " + labels_path);
  if (read_be32(lbl) != n) throw InvalidArgument("idx: image and label counts differ");

  const std::size_t dim = std::size_t{rows} * cols;
  Batch b;
  b.inputs = nn::Matrix(0, dim);
  std::vector<unsigned char> raw(dim);
  std::vector<double> x(dim);
  for (std::uint32_t s = 0; s < n; ++s) {
    img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(dim));
    char y = 0;
    lbl.read(&y, 1);
    if (!img || !lbl) throw InvalidArgument("idx: truncated data");
    for (std::size_t j = 0; j < dim; ++j) x[j] = raw[j] / 255.0;
    b.push_back(x, static_cast<unsigned char>(y));
  }
  return b;
}

inline Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  ds.provenance = Provenance::kFile;
  ds.train = load_pair(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
  ds.test = load_pair(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
  int mx = 0;
  for (int y : ds.train.labels) mx = std::max(mx, y);
  for (int y : ds.test.labels) mx = std::max(mx, y);
  ds.num_classes = static_cast<std::size_t>(mx) + 1;
  return ds;
}

}  // namespace idx

}  // namespace brca::data
