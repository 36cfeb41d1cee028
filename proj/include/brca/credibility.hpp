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

// Server-side credibility assessment, momentum aggregation and the unified
// update over honest clients' shared data.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "brca/aadm.hpp"
#include "brca/error.hpp"
#include "brca/model.hpp"
#include "brca/param_vector.hpp"
#include "brca/rng.hpp"
#include "brca/stats.hpp"

namespace brca {

// One client's model as received by the server plus its probe-layer slice.
struct ClientUpdate {
  std::size_t client_id = 0;
  ParamVector params;
  std::vector<double> probe;

  static ClientUpdate make(std::size_t id, ParamVector params, const std::string& probe_block) {
    ClientUpdate u{id, std::move(params), {}};
    const auto slice = u.params.block(probe_block);
    u.probe.assign(slice.begin(), slice.end());
    return u;
  }
};

using ShardRefs = std::span<const nn::Batch* const>;

struct CredibilityReport {
  std::vector<std::size_t> client_ids;
  std::vector<double> detection_scores;     // e, normalized to sum 1
  std::vector<double> verification_scores;  // f, normalized to sum 1 (empty when unused)
  std::vector<double> credibilities;        // r, zero for Byzantine verdicts, sums to 1
  std::vector<std::size_t> honest_set;      // ids with r > 0, ascending
  std::vector<double> losses;               // l_i on the client's own shared shard
  double beta = 0.5;

  bool zeroed(std::size_t id) const {
    for (std::size_t i = 0; i < client_ids.size(); ++i)
      if (client_ids[i] == id) return credibilities[i] == 0.0;
    return false;
  }
};

struct Verification {
  std::vector<double> scores;  // f_i = exp(-2 z_i) of the standardized losses
  std::vector<double> losses;
};

/// Loss of each client's model on its own shared shard and the resulting
/// verification scores.
inline Verification verification_scores(std::span<const ClientUpdate> updates, ShardRefs shared,
                                         const nn::ModelSpec& spec) {
  if (shared.size() != updates.size())
    throw InvalidArgument("verification_scores: one shared shard per update required");
  Verification v;
  v.losses.reserve(updates.size());
  for (std::size_t i = 0; i < updates.size(); ++i) {
    if (shared[i] == nullptr || shared[i]->empty())
      throw InvalidArgument("verification_scores: client " + std::to_string(updates[i].client_id) +
                            " has an empty shared shard");
    v.losses.push_back(nn::loss(spec, updates[i].params, *shared[i]));
  }
  v.scores = standardized_exp_scores(v.losses);
  return v;
}

inline std::vector<double> normalized(std::span<const double> v) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= s;
  return out;
}

/// Mixes detection and verification scores into credibilities: both are
/// normalized to sum 1, r = beta*e + (1-beta)*f, every r strictly below the
/// mean is zeroed and the survivors are renormalized.
inline CredibilityReport combine_credibility(std::span<const std::size_t> client_ids,
                                             std::span<const double> detection,
                                             std::span<const double> verification, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("beta must be in [0, 1]");
  const std::size_t k = client_ids.size();
  if (detection.size() != k || (!verification.empty() && verification.size() != k))
    throw InvalidArgument("combine_credibility: score vectors must match the client list");
  CredibilityReport rep;
  rep.beta = beta;
  rep.client_ids.assign(client_ids.begin(), client_ids.end());
  rep.detection_scores = normalized(detection);
  if (!verification.empty()) rep.verification_scores = normalized(verification);

  rep.credibilities.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double f = rep.verification_scores.empty() ? 0.0 : rep.verification_scores[i];
    rep.credibilities[i] = beta * rep.detection_scores[i] + (1.0 - beta) * f;
  }
  // Strictly-below-the-mean test; the relative guard keeps an all-equal round
  // from zeroing itself through rounding in the mean.
  const double threshold = mean_of(rep.credibilities) * (1.0 - 1e-12);
  double sum = 0.0;
  for (double& r : rep.credibilities) {
    if (r < threshold) r = 0.0;
    sum += r;
  }
  assert(sum > 0.0 && "at least one credibility is >= the mean");
  for (std::size_t i = 0; i < k; ++i) {
    rep.credibilities[i] /= sum;
    if (rep.credibilities[i] > 0.0) rep.honest_set.push_back(client_ids[i]);
  }
  std::sort(rep.honest_set.begin(), rep.honest_set.end());
  return rep;
}

struct AssessOptions {
  bool use_verification = true;
  bool adapt_detector = true;
};

struct Assessment {
  CredibilityReport report;
  aadm::DetectorState detector;  // adapted copy (unchanged when adaptation is off)
  aadm::ScoreVector detection;   // raw detection scores before normalization
};

/// Credibility assessment of one round's updates followed by detector adaptation.
inline Assessment assess(std::span<const ClientUpdate> updates, ShardRefs shared,
                         const nn::ModelSpec& model, const aadm::DetectorState& detector,
                         double beta, double d, AssessOptions opts = {}) {
  if (updates.size() < 2) throw InvalidArgument("assess needs at least two updates");
  std::vector<std::size_t> ids;
  std::vector<aadm::Probe> probes;
  for (const auto& u : updates) {
    ids.push_back(u.client_id);
    probes.push_back(u.probe);
  }
  Assessment out{{}, detector, aadm::score_updates(detector, probes, ids)};
  std::vector<double> f, losses;
  if (opts.use_verification) {
    auto v = verification_scores(updates, shared, model);
    f = std::move(v.scores);
    losses = std::move(v.losses);
  }
  out.report = combine_credibility(ids, out.detection.scores, f, beta);
  out.report.losses = std::move(losses);
  if (opts.adapt_detector)
    out.detector = aadm::make_adaption(std::move(out.detector), ids, out.report.honest_set,
                                       out.report.credibilities, probes, d);
  return out;
}

/// W' = alpha * W + (1 - alpha) * sum_i r_i w_i.
inline ParamVector aggregate(const ParamVector& prev, std::span<const ClientUpdate> updates,
                             std::span<const double> credibilities, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("aggregate: alpha must be in (0, 1)");
  if (credibilities.size() != updates.size())
    throw InvalidArgument("aggregate: one credibility per update required");
  const double total = std::accumulate(credibilities.begin(), credibilities.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("aggregate: credibilities must sum to 1");
  ParamVector out = prev;
  auto o = out.values();
  for (double& x : o) x *= alpha;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    require_same_layout(prev, updates[i].params);
    const double w = (1.0 - alpha) * credibilities[i];
    if (w == 0.0) continue;
    const auto u = updates[i].params.values();
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += w * u[j];
  }
  return out;
}

inline ParamVector aggregate(const ParamVector& prev, std::span<const ClientUpdate> updates,
                             const CredibilityReport& report, double alpha) {
  return aggregate(prev, updates, report.credibilities, alpha);
}

/// Server-side SGD: per epoch, one sgd_epoch pass over each honest client's
/// shared shard in the given (ascending id) order.
inline ParamVector unified_update(ParamVector global, ShardRefs honest_shards,
                                  const nn::ModelSpec& spec, std::size_t epochs, double lr,
                                  std::uint64_t seed, std::size_t batch_size = SIZE_MAX) {
  if (honest_shards.empty()) throw InvalidArgument("unified_update: honest set is empty");
  for (std::size_t e = 0; e < epochs; ++e)
    for (std::size_t i = 0; i < honest_shards.size(); ++i)
      global = nn::sgd_epoch(spec, std::move(global), *honest_shards[i], lr, batch_size,
                             splitmix64(seed ^ (e * 1000003ULL + i)));
  return global;
}

/// Static-detector baseline: credibility from detection scores alone (beta = 1),
/// no data verification, no adaptation, no unified update.
struct AbnormalResult {
  ParamVector global;
  CredibilityReport report;
  aadm::ScoreVector detection;
};

inline AbnormalResult abnormal_aggregate(const ParamVector& prev,
                                         std::span<const ClientUpdate> updates,
                                         const nn::ModelSpec& model,
                                         const aadm::DetectorState& detector, double alpha) {
  auto a = assess(updates, {}, model, detector, 1.0, 0.0, {false, false});
  auto global = aggregate(prev, updates, a.report, alpha);
  return {std::move(global), std::move(a.report), std::move(a.detection)};
}

}  // namespace brca
