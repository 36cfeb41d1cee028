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

// Comparison aggregators: FedAvg, Krum, geometric median (Weiszfeld) and
// coordinate-wise trimmed mean.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "brca/error.hpp"
#include "brca/param_vector.hpp"

namespace brca::defense {

enum class Kind { kNoDefense, kKrum, kGeoMed, kTrimmedMean, kAbnormal, kBrca };

struct AggregatorSpec {
  Kind kind = Kind::kBrca;
  int assumed_byzantine = -1;   // Krum's f; negative = ceil(xi * k)
  double trim_fraction = -1.0;  // negative = xi
  double weiszfeld_tol = 1e-7;
  std::size_t weiszfeld_max_iters = 200;
  bool unified_update = true;   // BRCA only; false gives the ablation without it
};

namespace detail {
inline void check_updates(std::span<const ParamVector> updates, const char* who) {
  if (updates.empty()) throw InvalidArgument(std::string(who) + ": no updates");
  for (const auto& u : updates) require_same_layout(updates.front(), u);
}
}  // namespace detail

inline ParamVector fedavg(std::span<const ParamVector> updates, std::span<const double> weights) {
  detail::check_updates(updates, "fedavg");
  if (weights.size() != updates.size()) throw InvalidArgument("fedavg: one weight per update required");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("fedavg: weights must sum to 1");
  ParamVector out = updates.front().zeros_like();
  auto o = out.values();
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const auto u = updates[i].values();
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += weights[i] * u[j];
  }
  return out;
}

inline ParamVector mean(std::span<const ParamVector> updates) {
  std::vector<double> w(updates.size(), 1.0 / static_cast<double>(updates.size()));
  // Uniform weights can miss the 1e-9 sum check only through rounding.
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  w.back() += 1.0 - total;
  return fedavg(updates, w);
}

/// Krum score of every update: sum of squared distances to its k - f - 2
/// nearest other updates.
inline std::vector<double> krum_scores(std::span<const ParamVector> updates, std::size_t f) {
  detail::check_updates(updates, "krum");
  const std::size_t k = updates.size();
  if (k < f + 3) throw InvalidArgument("krum: need k >= f + 3");
  std::vector<double> dist(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      dist[i * k + j] = dist[j * k + i] = squared_distance(updates[i].values(), updates[j].values());

  const std::size_t neighbours = k - f - 2;
  std::vector<double> scores(k);
  std::vector<double> row;
  for (std::size_t i = 0; i < k; ++i) {
    row.clear();
    for (std::size_t j = 0; j < k; ++j)
      if (j != i) row.push_back(dist[i * k + j]);
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(neighbours), row.end());
    scores[i] = std::accumulate(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(neighbours), 0.0);
  }
  return scores;
}

struct KrumResult {
  ParamVector chosen;
  std::size_t index = 0;
};

/// Lowest Krum score wins; ties go to the lowest index.
inline KrumResult krum(std::span<const ParamVector> updates, std::size_t f) {
  const auto scores = krum_scores(updates, f);
  const auto idx = static_cast<std::size_t>(std::min_element(scores.begin(), scores.end()) - scores.begin());
  return {updates[idx], idx};
}

inline double geomed_objective(std::span<const ParamVector> updates, std::span<const double> y) {
  double s = 0.0;
  for (const auto& u : updates) s += std::sqrt(squared_distance(u.values(), y));
  return s;
}

struct GeoMedResult {
  ParamVector median;
  std::size_t iterations = 0;
  std::vector<double> objective;  // sum of distances at the start point and after each step
};

/// Weiszfeld iteration from the coordinate-wise mean with epsilon-regularized
/// norms. Stops when a step moves less than `tol` or after `max_iters`.
inline GeoMedResult geomed_trace(std::span<const ParamVector> updates, double tol,
                                 std::size_t max_iters) {
  detail::check_updates(updates, "geomed");
  constexpr double kEps = 1e-12;
  GeoMedResult res{mean(updates), 0, {}};
  auto y = res.median.values();
  res.objective.push_back(geomed_objective(updates, y));
  std::vector<double> next(y.size());
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    double denom = 0.0;
    for (const auto& u : updates) {
      const double w = 1.0 / (std::sqrt(squared_distance(u.values(), y)) + kEps);
      denom += w;
      const auto uv = u.values();
      for (std::size_t j = 0; j < next.size(); ++j) next[j] += w * uv[j];
    }
    double step = 0.0;
    for (std::size_t j = 0; j < next.size(); ++j) {
      next[j] /= denom;
      const double d = next[j] - y[j];
      step += d * d;
      y[j] = next[j];
    }
    res.iterations = it + 1;
    res.objective.push_back(geomed_objective(updates, y));
    if (std::sqrt(step) < tol) break;
  }
  return res;
}

inline ParamVector geomed(std::span<const ParamVector> updates, double tol, std::size_t max_iters) {
  return geomed_trace(updates, tol, max_iters).median;
}

/// Per coordinate: drop the ceil(trim * k) largest and smallest values and
/// average the rest.
inline ParamVector trimmed_mean(std::span<const ParamVector> updates, double trim_fraction) {
  detail::check_updates(updates, "trimmed_mean");
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5))
    throw InvalidArgument("trimmed_mean: trim fraction must be in [0, 0.5)");
  const std::size_t k = updates.size();
  const std::size_t cut = ceil_count(trim_fraction, k);
  if (2 * cut >= k) throw InvalidArgument("trimmed_mean: trimming removes every value");
  ParamVector out = updates.front().zeros_like();
  auto o = out.values();
  std::vector<double> col(k);
  const double inv = 1.0 / static_cast<double>(k - 2 * cut);
  for (std::size_t j = 0; j < o.size(); ++j) {
    for (std::size_t i = 0; i < k; ++i) col[i] = updates[i][j];
    std::sort(col.begin(), col.end());
    double s = 0.0;
    for (std::size_t i = cut; i < k - cut; ++i) s += col[i];
    o[j] = s * inv;
  }
  return out;
}

}  // namespace brca::defense
