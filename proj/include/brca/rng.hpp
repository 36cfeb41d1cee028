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

#include <cstdint>
#include <random>

namespace brca {

using Rng = std::mt19937_64;

// Independent random streams. Every random draw in a run comes from a seed
// derived as child(master, stream, round, client), so reordering work across
// threads never changes the numbers.
enum class Stream : std::uint64_t {
  kData = 1,
  kSourceDomain,
  kPartition,
  kSharedSplit,
  kModelInit,
  kByzantine,
  kSelection,
  kClientTrain,
  kAttack,
  kUnifiedUpdate,
  kDetectorInit,
  kPretrain,
  kWarmup,
  kTrainTestSplit,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from (master, stream, round, client).
inline constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                           std::uint64_t round = 0,
                                           std::uint64_t client = 0) noexcept {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ round);
  h = splitmix64(h ^ (client + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace brca
