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

// Adaptive anomaly detection: an autoencoder over probe-layer weights,
// pre-trained on a source domain and fine-tuned each round on the honest
// clients whose credibility is neither extreme.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <span>
#include <vector>

#include "brca/error.hpp"
#include "brca/model.hpp"
#include "brca/param_vector.hpp"
#include "brca/stats.hpp"

namespace brca::aadm {

using Probe = std::vector<double>;

struct DetectorState {
  nn::ModelSpec spec;
  ParamVector params;
  std::size_t adapt_count = 0;
  double lr = 0.02;  // learning rate used for pre-training and adaptation

  std::size_t probe_dim() const noexcept { return spec.input_dim; }
};

inline std::size_t default_hidden_width(std::size_t probe_dim) {
  return std::max<std::size_t>(4, probe_dim / 4);
}

inline DetectorState make_detector(std::size_t probe_dim, double lr, std::uint64_t seed) {
  if (!(lr > 0.0)) throw InvalidArgument("detector learning rate must be positive");
  DetectorState d;
  d.spec = nn::ModelSpec::autoencoder(probe_dim, default_hidden_width(probe_dim));
  d.params = nn::init_params(d.spec, seed);
  d.lr = lr;
  return d;
}

inline void check_probes(const DetectorState& det, std::span<const Probe> probes) {
  for (const auto& p : probes)
    if (p.size() != det.probe_dim())
      throw DimensionMismatch("probe of length " + std::to_string(p.size()) +
                              " does not match detector input " + std::to_string(det.probe_dim()));
}

/// Autoencoder training on inputs = targets = probes for `epochs` passes.
inline DetectorState pretrain(DetectorState det, std::span<const Probe> probes, std::size_t epochs,
                              std::uint64_t seed, std::size_t batch_size = 16) {
  check_probes(det, probes);
  if (epochs == 0 || probes.empty()) return det;
  const nn::Batch data = nn::batch_from_vectors(probes);
  for (std::size_t e = 0; e < epochs; ++e)
    det.params = nn::sgd_epoch(det.spec, std::move(det.params), data, det.lr, batch_size,
                               splitmix64(seed + e));
  return det;
}

/// Mean squared error between a probe and its reconstruction.
inline double reconstruction_error(const DetectorState& det, std::span<const double> probe) {
  const auto out = nn::forward(det.spec, det.params, probe);
  double s = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j) s += (out[j] - probe[j]) * (out[j] - probe[j]);
  return s / static_cast<double>(out.size());
}

inline double mean_reconstruction_error(const DetectorState& det, std::span<const Probe> probes) {
  double s = 0.0;
  for (const auto& p : probes) s += reconstruction_error(det, p);
  return s / static_cast<double>(probes.size());
}

struct ScoreVector {
  std::vector<double> raw_errors;  // reconstruction MSE per client
  std::vector<double> scores;      // exp(-2 z) of the standardized errors
  std::vector<std::size_t> client_ids;
};

/// Detection scores. Ids default to 0..k-1 when not given.
inline ScoreVector score_updates(const DetectorState& det, std::span<const Probe> probes,
                                 std::span<const std::size_t> client_ids = {}) {
  if (probes.size() < 2) throw InvalidArgument("score_updates needs at least two probe layers");
  if (!client_ids.empty() && client_ids.size() != probes.size())
    throw InvalidArgument("score_updates: one client id per probe required");
  check_probes(det, probes);
  ScoreVector sv;
  sv.raw_errors.reserve(probes.size());
  for (const auto& p : probes) sv.raw_errors.push_back(reconstruction_error(det, p));
  sv.scores = standardized_exp_scores(sv.raw_errors);
  if (client_ids.empty()) {
    sv.client_ids.resize(probes.size());
    std::iota(sv.client_ids.begin(), sv.client_ids.end(), std::size_t{0});
  } else {
    sv.client_ids.assign(client_ids.begin(), client_ids.end());
  }
  return sv;
}

/// Honest clients left after dropping the ceil(d*|H|) highest- and
/// lowest-credibility members (ties by client id), in ascending id order.
inline std::vector<std::size_t> adaptation_set(std::span<const std::size_t> client_ids,
                                               std::span<const std::size_t> honest_ids,
                                               std::span<const double> credibilities, double d) {
  if (!(d >= 0.0 && d < 0.5)) throw InvalidArgument("make_adaption: d must be in [0, 0.5)");
  auto cred_of = [&](std::size_t id) {
    auto it = std::find(client_ids.begin(), client_ids.end(), id);
    if (it == client_ids.end()) throw InvalidArgument("honest id not among round clients");
    return credibilities[static_cast<std::size_t>(it - client_ids.begin())];
  };
  std::vector<std::size_t> h(honest_ids.begin(), honest_ids.end());
  std::sort(h.begin(), h.end(), [&](std::size_t a, std::size_t b) {
    const double ca = cred_of(a), cb = cred_of(b);
    return ca != cb ? ca < cb : a < b;
  });
  const std::size_t cut = ceil_count(d, h.size());
  if (2 * cut >= h.size()) return {};
  std::vector<std::size_t> kept(h.begin() + static_cast<std::ptrdiff_t>(cut),
                                h.end() - static_cast<std::ptrdiff_t>(cut));
  std::sort(kept.begin(), kept.end());
  return kept;
}

/// One gradient step on the reconstruction loss of every retained honest probe.
inline DetectorState make_adaption(DetectorState det, std::span<const std::size_t> client_ids,
                                   std::span<const std::size_t> honest_ids,
                                   std::span<const double> credibilities,
                                   std::span<const Probe> probes, double d) {
  if (honest_ids.empty()) throw InvalidArgument("make_adaption: honest set is empty");
  if (client_ids.size() != probes.size() || credibilities.size() != probes.size())
    throw InvalidArgument("make_adaption: ids, credibilities and probes must align");
  check_probes(det, probes);
  const auto kept = adaptation_set(client_ids, honest_ids, credibilities, d);
  if (kept.empty()) {
    log_warning("adaptation set empty after trimming; detector left unchanged");
    return det;
  }
  for (std::size_t id : kept) {
    const auto pos = static_cast<std::size_t>(std::find(client_ids.begin(), client_ids.end(), id) -
                                              client_ids.begin());
    nn::Batch one;
    one.push_back(probes[pos], 0);
    const auto lg = nn::loss_and_grad(det.spec, det.params, one);
    auto p = det.params.values();
    const auto g = lg.grad.values();
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= det.lr * g[j];
  }
  ++det.adapt_count;
  return det;
}

/// FNV-1a over the parameter bytes and adapt count.
inline std::uint64_t state_hash(const DetectorState& det) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const auto v = det.params.values();
  mix(v.data(), v.size() * sizeof(double));
  mix(&det.adapt_count, sizeof(det.adapt_count));
  return h;
}

}  // namespace brca::aadm
