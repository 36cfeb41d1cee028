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

// Round orchestration: client training, attacks, defense dispatch, test
// evaluation and per-round metrics.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "brca/aadm.hpp"
#include "brca/attacks.hpp"
#include "brca/config.hpp"
#include "brca/credibility.hpp"
#include "brca/data.hpp"
#include "brca/defenses.hpp"
#include "brca/error.hpp"
#include "brca/model.hpp"
#include "brca/rng.hpp"
#include "brca/stats.hpp"

namespace brca::sim {

/// E_client passes of SGD over the client's private data, starting from `global`.
inline ClientUpdate client_train(const ParamVector& global, const data::ClientData& client,
                                 const nn::ModelSpec& spec, std::size_t epochs, double lr,
                                 std::size_t batch_size, std::uint64_t seed) {
  if (client.private_data.empty())
    throw InvalidArgument("client " + std::to_string(client.client_id) + " has no private data");
  ParamVector w = global;
  const std::size_t bs = batch_size == 0 ? SIZE_MAX : batch_size;
  for (std::size_t e = 0; e < epochs; ++e)
    w = nn::sgd_epoch(spec, std::move(w), client.private_data, lr, bs, splitmix64(seed + e));
  return ClientUpdate::make(client.client_id, std::move(w), spec.probe_block);
}

/// Cross-entropy of the detector's honest/Byzantine separation:
/// p_i = sigmoid(e_i - mean(e)), label 1 for honest and 0 for Byzantine.
/// Empty when the round lacks either class.
inline std::optional<double> detector_bce(const aadm::ScoreVector& scores, const attack::RoundPlan& plan) {
  std::size_t byz = 0;
  for (auto id : scores.client_ids) byz += plan.is_byzantine(id) ? 1 : 0;
  if (byz == 0 || byz == scores.client_ids.size()) return std::nullopt;
  const double m = mean_of(scores.scores);
  double total = 0.0;
  for (std::size_t i = 0; i < scores.scores.size(); ++i) {
    double p = 1.0 / (1.0 + std::exp(-(scores.scores[i] - m)));
    p = std::clamp(p, 1e-7, 1.0 - 1e-7);
    total += plan.is_byzantine(scores.client_ids[i]) ? std::log(1.0 - p) : std::log(p);
  }
  return -total / static_cast<double>(scores.scores.size());
}

struct Detection {
  double precision = 1.0;
  double recall = 1.0;
};

/// Precision/recall of "zeroed" as a Byzantine verdict. Nothing zeroed gives
/// precision 1; no Byzantine client present gives recall 1.
inline Detection detection_prf(std::span<const std::size_t> zeroed, const attack::RoundPlan& plan) {
  std::size_t tp = 0;
  for (auto id : zeroed) tp += plan.is_byzantine(id) ? 1 : 0;
  Detection d;
  if (!zeroed.empty()) d.precision = static_cast<double>(tp) / static_cast<double>(zeroed.size());
  if (!plan.byzantine.empty()) d.recall = static_cast<double>(tp) / static_cast<double>(plan.byzantine.size());
  return d;
}

inline Detection detection_prf(const CredibilityReport& report, const attack::RoundPlan& plan) {
  std::vector<std::size_t> zeroed;
  for (std::size_t i = 0; i < report.client_ids.size(); ++i)
    if (report.credibilities[i] == 0.0) zeroed.push_back(report.client_ids[i]);
  return detection_prf(zeroed, plan);
}

struct RoundMetrics {
  std::size_t round = 0;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  std::optional<double> detector_bce;
  double detection_precision = 1.0;
  double detection_recall = 1.0;
  std::optional<CredibilityReport> report;
  std::optional<aadm::ScoreVector> detection;
  std::vector<std::size_t> selected;
  std::vector<std::size_t> byzantine;
  std::vector<std::size_t> zeroed;
  double wall_time_ms = 0.0;  // kept out of the metrics stream
};

/// One metrics-stream record. Wall time is omitted so that equal seeds give
/// byte-identical streams.
inline json metrics_json(const RoundMetrics& m) {
  json j;
  j["round"] = m.round;
  j["accuracy"] = m.test_accuracy;
  j["loss"] = m.test_loss;
  j["bce"] = m.detector_bce ? json(*m.detector_bce) : json(nullptr);
  j["precision"] = m.detection_precision;
  j["recall"] = m.detection_recall;
  j["selected"] = m.selected;
  j["byzantine"] = m.byzantine;
  j["zeroed"] = m.zeroed;
  if (m.report) {
    j["credibilities"] = m.report->credibilities;
    j["honest_set"] = m.report->honest_set;
    j["detection_scores"] = m.report->detection_scores;
    j["verification_scores"] = m.report->verification_scores;
    j["verification_losses"] = m.report->losses;
  } else {
    j["credibilities"] = nullptr;
    j["honest_set"] = nullptr;
  }
  return j;
}

// Everything a run needs besides the evolving state.
struct Federation {
  data::Dataset dataset;
  nn::ModelSpec model;
  std::vector<data::ClientData> clients;
};

inline data::Dataset load_dataset(const ExperimentConfig& cfg) {
  if (!cfg.idx_dir.empty()) return data::idx::load_dataset(cfg.idx_dir);
  return data::make_blobs(cfg.blobs, derive_seed(cfg.seed, Stream::kData));
}

/// Partitions a dataset and extracts every client's shared shard.
inline std::vector<data::ClientData> make_clients(const data::Dataset& ds, const ExperimentConfig& cfg,
                                                  std::uint64_t seed) {
  const auto shards = data::partition(ds, {cfg.scheme, cfg.n, derive_seed(seed, Stream::kPartition)});
  std::vector<data::ClientData> clients;
  clients.reserve(shards.size());
  for (const auto& s : shards)
    clients.push_back(data::extract_shared(s, cfg.gamma, derive_seed(seed, Stream::kSharedSplit, 0, s.client_id)));
  return clients;
}

inline Federation make_federation(const ExperimentConfig& cfg) {
  Federation f;
  f.dataset = load_dataset(cfg);
  f.model = cfg.model_spec(f.dataset.train.dim(), f.dataset.num_classes);
  f.clients = make_clients(f.dataset, cfg, cfg.seed);
  return f;
}

inline ParamVector initial_model(const nn::ModelSpec& spec, const ExperimentConfig& cfg) {
  return nn::init_params(spec, derive_seed(cfg.seed, Stream::kModelInit));
}

/// Clean (attack-free) FedAvg rounds over `ds` from `start`, returning every
/// client's probe layer from every round.
inline std::vector<aadm::Probe> harvest_probes(const data::Dataset& ds, const ExperimentConfig& cfg,
                                               const nn::ModelSpec& spec, const ParamVector& start,
                                               std::uint64_t seed) {
  const auto clients = make_clients(ds, cfg, seed);
  ParamVector global = start;
  std::vector<aadm::Probe> probes;
  for (std::size_t t = 0; t < cfg.warmup_rounds; ++t) {
    // Warm-up is attack-free by construction: xi = 0.
    const auto plan = attack::plan_round(cfg.n, cfg.k, 0.0, t, seed);
    std::vector<ParamVector> models;
    std::vector<double> weights;
    double total = 0.0;
    for (auto id : plan.selected) {
      auto u = client_train(global, clients[id], spec, cfg.epochs_client, cfg.lr_client, cfg.batch_client,
                            derive_seed(seed, Stream::kClientTrain, t, id));
      probes.push_back(u.probe);
      weights.push_back(static_cast<double>(clients[id].private_data.size()));
      total += weights.back();
      models.push_back(std::move(u.params));
    }
    for (double& w : weights) w /= total;
    global = defense::fedavg(models, weights);
  }
  return probes;
}

/// Detector for a BRCA run: pre-trained on probes harvested from a clean
/// warm-up on the source domain, starting from the run's initial model.
inline aadm::DetectorState pretrain_source_detector(const ExperimentConfig& cfg, const nn::ModelSpec& spec,
                                                    const ParamVector& start) {
  data::BlobParams src = cfg.blobs;
  src.dim = spec.input_dim;
  src.num_classes = spec.output_dim;
  const auto source = data::make_source_domain(src, cfg.seed);
  const auto probes = harvest_probes(source, cfg, spec, start, derive_seed(cfg.seed, Stream::kWarmup, 1));
  auto det = aadm::make_detector(spec.probe_size(), cfg.lr_detection, derive_seed(cfg.seed, Stream::kDetectorInit));
  return aadm::pretrain(std::move(det), probes, cfg.epochs_pretrain, derive_seed(cfg.seed, Stream::kPretrain),
                        cfg.batch_detector);
}

/// Detector for the static baseline: pre-trained on honest probes from a
/// clean warm-up on the target task itself, then frozen.
inline aadm::DetectorState pretrain_target_detector(const ExperimentConfig& cfg, const Federation& fed,
                                                    const ParamVector& start) {
  const auto probes = harvest_probes(fed.dataset, cfg, fed.model, start, derive_seed(cfg.seed, Stream::kWarmup, 2));
  auto det = aadm::make_detector(fed.model.probe_size(), cfg.lr_detection,
                                 derive_seed(cfg.seed, Stream::kDetectorInit));
  return aadm::pretrain(std::move(det), probes, cfg.epochs_pretrain, derive_seed(cfg.seed, Stream::kPretrain),
                        cfg.batch_detector);
}

inline bool needs_detector(defense::Kind k) { return k == defense::Kind::kBrca || k == defense::Kind::kAbnormal; }

struct SimState {
  ParamVector global;
  std::optional<aadm::DetectorState> detector;
  std::size_t round = 0;
};

class Experiment {
 public:
  /// Builds the federation and initial model. Detector-based defenses use
  /// `detector` when given and pre-train one otherwise.
  explicit Experiment(ExperimentConfig cfg, std::optional<aadm::DetectorState> detector = std::nullopt)
      : cfg_(std::move(cfg)) {
    cfg_.validate();
    fed_ = make_federation(cfg_);
    if (fed_.clients.size() != cfg_.n) throw InvalidArgument("partition produced the wrong client count");
    state_.global = initial_model(fed_.model, cfg_);
    if (needs_detector(cfg_.defense.kind)) {
      if (detector) {
        if (detector->probe_dim() != fed_.model.probe_size())
          throw DimensionMismatch("detector input does not match the probe block");
        state_.detector = std::move(detector);
      } else if (cfg_.defense.kind == defense::Kind::kBrca) {
        state_.detector = pretrain_source_detector(cfg_, fed_.model, state_.global);
      } else {
        state_.detector = pretrain_target_detector(cfg_, fed_, state_.global);
      }
    }
  }

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const Federation& federation() const noexcept { return fed_; }
  const nn::ModelSpec& model() const noexcept { return fed_.model; }
  const SimState& state() const noexcept { return state_; }

  RoundMetrics run_round() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t t = state_.round;
    const auto plan = attack::plan_round(cfg_.n, cfg_.k, cfg_.xi, t, cfg_.seed);
    const auto updates = collect_updates(plan, t);

    RoundMetrics m;
    m.round = t;
    m.selected = plan.selected;
    m.byzantine = plan.byzantine;
    aggregate_round(plan, updates, t, m);

    if (!state_.global.all_finite())
      throw NonFiniteError("global model became non-finite after round " + std::to_string(t));
    const auto ev = nn::evaluate(fed_.model, state_.global, fed_.dataset.test);
    m.test_accuracy = ev.accuracy;
    m.test_loss = ev.loss;
    if (m.detection) m.detector_bce = detector_bce(*m.detection, plan);
    const auto prf = detection_prf(m.zeroed, plan);
    m.detection_precision = prf.precision;
    m.detection_recall = prf.recall;
    ++state_.round;
    m.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return m;
  }

  std::vector<RoundMetrics> run(const std::function<void(const RoundMetrics&)>& on_round = {}) {
    std::vector<RoundMetrics> all;
    while (state_.round < cfg_.rounds) {
      all.push_back(run_round());
      if (on_round) on_round(all.back());
    }
    return all;
  }

 private:
  std::vector<ClientUpdate> collect_updates(const attack::RoundPlan& plan, std::size_t t) const {
    std::vector<ClientUpdate> updates;
    updates.reserve(plan.selected.size());
    for (auto id : plan.selected) {
      const auto& client = fed_.clients[id];
      const bool byz = plan.is_byzantine(id);
      const auto seed = derive_seed(cfg_.seed, Stream::kClientTrain, t, id);
      ClientUpdate u = (!byz || attack::trains_before_attack(cfg_.attack.kind))
                           ? client_train(state_.global, client, fed_.model, cfg_.epochs_client, cfg_.lr_client,
                                          cfg_.batch_client, seed)
                           : ClientUpdate::make(id, state_.global, fed_.model.probe_block);
      if (byz) {
        auto spec = cfg_.attack;
        spec.seed = derive_seed(cfg_.seed, Stream::kAttack, t, id);
        u = ClientUpdate::make(id, attack::apply_attack(u.params, spec), fed_.model.probe_block);
      }
      if (!u.params.all_finite())
        throw NonFiniteError("client " + std::to_string(id) + " sent a non-finite update in round " +
                             std::to_string(t));
      updates.push_back(std::move(u));
    }
    return updates;
  }

  std::vector<const nn::Batch*> shards_of(std::span<const std::size_t> ids) const {
    std::vector<const nn::Batch*> out;
    for (auto id : ids) out.push_back(&fed_.clients[id].shared);
    return out;
  }

  void aggregate_round(const attack::RoundPlan& plan, const std::vector<ClientUpdate>& updates, std::size_t t,
                       RoundMetrics& m) {
    std::vector<ParamVector> models;
    for (const auto& u : updates) models.push_back(u.params);
    switch (cfg_.defense.kind) {
      case defense::Kind::kBrca: {
        const auto shared = shards_of(plan.selected);
        auto a = assess(updates, shared, fed_.model, *state_.detector, cfg_.beta, cfg_.d);
        state_.global = aggregate(state_.global, updates, a.report, cfg_.alpha);
        if (cfg_.defense.unified_update) {
          const auto honest = shards_of(a.report.honest_set);
          state_.global = unified_update(std::move(state_.global), honest, fed_.model, cfg_.epochs_server,
                                         cfg_.lr_server, derive_seed(cfg_.seed, Stream::kUnifiedUpdate, t),
                                         SIZE_MAX);
        }
        state_.detector = std::move(a.detector);
        set_report(m, std::move(a.report));
        m.detection = std::move(a.detection);
        break;
      }
      case defense::Kind::kAbnormal: {
        auto r = abnormal_aggregate(state_.global, updates, fed_.model, *state_.detector, cfg_.alpha);
        state_.global = std::move(r.global);
        set_report(m, std::move(r.report));
        m.detection = std::move(r.detection);
        break;
      }
      case defense::Kind::kNoDefense: {
        std::vector<double> w;
        double total = 0.0;
        for (auto id : plan.selected) {
          w.push_back(static_cast<double>(fed_.clients[id].private_data.size()));
          total += w.back();
        }
        for (double& x : w) x /= total;
        state_.global = defense::fedavg(models, w);
        break;
      }
      case defense::Kind::kKrum: {
        const auto r = defense::krum(models, cfg_.krum_f());
        state_.global = r.chosen;
        for (std::size_t i = 0; i < plan.selected.size(); ++i)
          if (i != r.index) m.zeroed.push_back(plan.selected[i]);
        break;
      }
      case defense::Kind::kGeoMed:
        state_.global = defense::geomed(models, cfg_.defense.weiszfeld_tol, cfg_.defense.weiszfeld_max_iters);
        break;
      case defense::Kind::kTrimmedMean:
        state_.global = defense::trimmed_mean(models, cfg_.trim_fraction());
        break;
    }
  }

  static void set_report(RoundMetrics& m, CredibilityReport report) {
    for (std::size_t i = 0; i < report.client_ids.size(); ++i)
      if (report.credibilities[i] == 0.0) m.zeroed.push_back(report.client_ids[i]);
    m.report = std::move(report);
  }

  ExperimentConfig cfg_;
  Federation fed_;
  SimState state_;
};

}  // namespace brca::sim
