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

#include <atomic>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace brca {

inline double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Population standard deviation (divides by n).
inline double population_stddev(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

/// Maps values to exp(-2 z) with z their standardization, so larger values
/// get smaller scores. A spread below 1e-12 gives all ones.
inline std::vector<double> standardized_exp_scores(std::span<const double> values) {
  std::vector<double> out(values.size(), 1.0);
  const double sd = population_stddev(values);
  if (sd < 1e-12) return out;
  const double m = mean_of(values);
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::exp(-2.0 * (values[i] - m) / sd);
  return out;
}

/// Global switch for diagnostic warnings on std::clog.
inline std::atomic<bool>& warnings_enabled() {
  static std::atomic<bool> on{true};
  return on;
}

inline void log_warning(const std::string& msg) {
  if (warnings_enabled()) std::clog << "warning: " << msg << '\n';
}

}  // namespace brca
