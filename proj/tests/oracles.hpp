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

// Independent reference implementations used by the acceptance suite and the
// unit tests. Deliberately naive: no shared code with the library kernels.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "brca/model.hpp"
#include "brca/param_vector.hpp"

namespace brca::oracles {

struct GradInstance {
  nn::ModelSpec spec;
  ParamVector params;
  nn::Batch batch;
};

/// Random model of every kind with random parameters and a small batch.
inline GradInstance random_instance(std::mt19937_64& rng, int trial) {
  auto dim = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  const std::size_t in = dim(2, 6);
  nn::ModelSpec spec;
  switch (trial % 4) {
    case 0: spec = nn::ModelSpec::logistic(in, dim(2, 5)); break;
    case 1: spec = nn::ModelSpec::mlp(in, {dim(2, 6)}, dim(2, 5)); break;
    case 2: spec = nn::ModelSpec::mlp(in, {dim(2, 5), dim(2, 5)}, dim(2, 4)); break;
    default: spec = nn::ModelSpec::autoencoder(in, dim(1, 4)); break;
  }
  std::normal_distribution<double> normal(0.0, 0.7);
  ParamVector p(spec.shared_layout());
  for (auto& v : p.values()) v = normal(rng);
  nn::Batch batch;
  const std::size_t rows = dim(1, 6);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> x(in);
    for (auto& v : x) v = normal(rng);
    const int label = spec.is_classifier()
                          ? static_cast<int>(std::uniform_int_distribution<std::size_t>(0, spec.output_dim - 1)(rng))
                          : 0;
    batch.push_back(x, label);
  }
  return {spec, p, batch};
}

struct GradCheck {
  bool ok = true;
  double worst_rel = 0.0;
};

/// Central finite differences on every coordinate. A coordinate passes when
/// its relative error is within `rel` or its absolute error within `abs`.
inline GradCheck check_gradient(const nn::ModelSpec& spec, const ParamVector& params, const nn::Batch& batch,
                                double eps, double rel, double abs) {
  const auto analytic = nn::loss_and_grad(spec, params, batch).grad;
  GradCheck res;
  ParamVector probe = params;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double orig = probe[j];
    probe[j] = orig + eps;
    const double up = nn::loss(spec, probe, batch);
    probe[j] = orig - eps;
    const double down = nn::loss(spec, probe, batch);
    probe[j] = orig;
    const double fd = (up - down) / (2.0 * eps);
    const double err = std::abs(fd - analytic[j]);
    const double scale = std::max(std::abs(fd), std::abs(analytic[j]));
    const double r = scale > 0.0 ? err / scale : 0.0;
    if (err > abs) res.worst_rel = std::max(res.worst_rel, r);
    if (err > abs && r > rel) res.ok = false;
  }
  return res;
}

inline std::vector<ParamVector> random_updates(std::mt19937_64& rng, std::size_t k, std::size_t dim) {
  auto layout = std::make_shared<const Layout>(std::vector<std::pair<std::string, std::size_t>>{{"w", dim}});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ParamVector> out;
  for (std::size_t i = 0; i < k; ++i) {
    ParamVector p(layout);
    for (auto& v : p.values()) v = normal(rng);
    // Occasional exact duplicates exercise tie handling.
    if (i > 0 && rng() % 8 == 0) p = out[rng() % i];
    out.push_back(p);
  }
  return out;
}

inline double dist2(const ParamVector& a, const ParamVector& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

/// Krum score by enumerating every neighbour subset of size k - f - 2 and
/// keeping the smallest distance sum.
inline std::vector<double> krum_scores_exhaustive(const std::vector<ParamVector>& ups, std::size_t f) {
  const std::size_t k = ups.size(), m = k - f - 2;
  std::vector<double> scores(k, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < k; ++j)
      if (j != i) others.push_back(j);
    for (std::uint32_t mask = 0; mask < (1u << others.size()); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
      double s = 0.0;
      for (std::size_t b = 0; b < others.size(); ++b)
        if (mask & (1u << b)) s += dist2(ups[i], ups[others[b]]);
      scores[i] = std::min(scores[i], s);
    }
  }
  return scores;
}

inline std::size_t argmin_lowest(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = i;
  return best;
}

inline std::vector<double> trimmed_mean_naive(const std::vector<ParamVector>& ups, double trim) {
  const std::size_t k = ups.size();
  std::size_t cut = 0;
  while (static_cast<double>(cut) < trim * static_cast<double>(k) - 1e-9) ++cut;
  std::vector<double> out;
  for (std::size_t j = 0; j < ups.front().size(); ++j) {
    std::vector<double> col;
    for (const auto& u : ups) col.push_back(u[j]);
    std::sort(col.begin(), col.end());
    const std::vector<double> kept(col.begin() + static_cast<std::ptrdiff_t>(cut),
                                   col.end() - static_cast<std::ptrdiff_t>(cut));
    double s = 0.0;
    for (double v : kept) s += v;
    out.push_back(s / static_cast<double>(kept.size()));
  }
  return out;
}

struct MedianCase {
  std::vector<ParamVector> points;
  std::vector<double> center;
};

/// Point sets whose geometric median is known in closed form: centrally
/// symmetric clouds, an isosceles triangle's Fermat point and a convex
/// quadrilateral's diagonal crossing.
inline std::vector<MedianCase> known_median_sets() {
  auto make = [](std::vector<std::vector<double>> pts, std::vector<double> c) {
    auto layout = std::make_shared<const Layout>(
        std::vector<std::pair<std::string, std::size_t>>{{"w", c.size()}});
    MedianCase mc{{}, std::move(c)};
    for (auto& p : pts) mc.points.emplace_back(layout, std::move(p));
    return mc;
  };
  std::vector<MedianCase> cases;
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t dim : {1u, 2u, 3u, 5u, 8u}) {
    std::vector<double> c(dim);
    for (auto& v : c) v = normal(rng);
    std::vector<std::vector<double>> pts;
    for (int pair = 0; pair < 4; ++pair) {
      std::vector<double> v(dim);
      for (auto& x : v) x = normal(rng);
      std::vector<double> a(dim), b(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        a[j] = c[j] + v[j];
        b[j] = c[j] - v[j];
      }
      pts.push_back(a);
      pts.push_back(b);
    }
    cases.push_back(make(pts, c));
  }
  cases.push_back(make({{-1.0, 0.0}, {1.0, 0.0}, {0.0, 3.0}}, {0.0, 1.0 / std::sqrt(3.0)}));
  cases.push_back(make({{0.0, 0.0}, {4.0, 0.0}, {3.0, 3.0}, {0.0, 1.0}}, {0.8, 0.8}));
  return cases;
}

}  // namespace brca::oracles
