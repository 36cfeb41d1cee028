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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "brca/error.hpp"
#include "brca/param_vector.hpp"
#include "brca/rng.hpp"

namespace brca::attack {

enum class Kind { kNone, kSameValue, kSignFlipping, kGaussian };

struct AttackSpec {
  Kind kind = Kind::kNone;
  double c = 5.0;   // same-value constant
  double a = -5.0;  // sign-flipping multiplier
  double g = 0.3;   // gaussian standard deviation
  std::uint64_t seed = 0;

  void validate() const {
    if (kind == Kind::kSignFlipping && !(a < 0.0)) throw InvalidArgument("sign-flipping needs a < 0");
    if (kind == Kind::kGaussian && !(g > 0.0)) throw InvalidArgument("gaussian attack needs g > 0");
  }
};

/// Whether a Byzantine client of this kind still trains before perturbing.
inline bool trains_before_attack(Kind k) { return k != Kind::kSameValue; }

inline ParamVector apply_attack(const ParamVector& update, const AttackSpec& spec) {
  spec.validate();
  if (!update.all_finite()) throw NonFiniteError("apply_attack: input update is not finite");
  ParamVector out = update;
  auto v = out.values();
  switch (spec.kind) {
    case Kind::kNone:
      break;
    case Kind::kSameValue:
      std::fill(v.begin(), v.end(), spec.c);
      break;
    case Kind::kSignFlipping:
      for (double& x : v) x *= spec.a;
      break;
    case Kind::kGaussian: {
      Rng rng(spec.seed);
      std::normal_distribution<double> noise(0.0, spec.g);
      for (double& x : v) x += noise(rng);
      break;
    }
  }
  if (!out.all_finite()) throw NonFiniteError("apply_attack produced non-finite values");
  return out;
}

// Selected clients S split into Byzantine B and honest H (all sorted).
struct RoundPlan {
  std::vector<std::size_t> selected;
  std::vector<std::size_t> byzantine;
  std::vector<std::size_t> honest;

  bool is_byzantine(std::size_t id) const {
    return std::binary_search(byzantine.begin(), byzantine.end(), id);
  }
};

/// The experiment-wide adversary: ceil(xi * n) clients fixed once per seed.
inline std::vector<std::size_t> byzantine_pool(std::size_t n, double xi, std::uint64_t seed) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng rng(derive_seed(seed, Stream::kByzantine));
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(ceil_count(xi, n));
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Samples k of n clients for `round`. ceil(xi * k) of them are drawn from the
/// fixed Byzantine pool and the rest from the honest clients, so every round
/// carries exactly the configured attack rate.
inline RoundPlan plan_round(std::size_t n, std::size_t k, double xi, std::size_t round,
                            std::uint64_t seed) {
  if (!(xi >= 0.0 && xi < 0.5)) throw InvalidArgument("plan_round: xi must be in [0, 0.5)");
  if (k == 0 || k > n) throw InvalidArgument("plan_round: need 0 < k <= n");
  std::vector<std::size_t> pool = byzantine_pool(n, xi, seed);
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < n; ++i)
    if (!std::binary_search(pool.begin(), pool.end(), i)) others.push_back(i);

  const std::size_t b = ceil_count(xi, k);
  Rng rng(derive_seed(seed, Stream::kSelection, round));
  std::shuffle(pool.begin(), pool.end(), rng);
  std::shuffle(others.begin(), others.end(), rng);

  RoundPlan plan;
  plan.byzantine.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(b));
  plan.honest.assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k - b));
  std::sort(plan.byzantine.begin(), plan.byzantine.end());
  std::sort(plan.honest.begin(), plan.honest.end());
  plan.selected = plan.byzantine;
  plan.selected.insert(plan.selected.end(), plan.honest.begin(), plan.honest.end());
  std::sort(plan.selected.begin(), plan.selected.end());
  return plan;
}

}  // namespace brca::attack
