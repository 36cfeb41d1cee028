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

// Experiment configuration: a flat JSON object with dotted keys. Every key
// has a default except the required ones; unknown keys are rejected.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "brca/attacks.hpp"
#include "brca/data.hpp"
#include "brca/defenses.hpp"
#include "brca/error.hpp"
#include "brca/model.hpp"

namespace brca {

using json = nlohmann::json;

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t rounds = 60;

  data::BlobParams blobs{10, 20, 250, 0.3};
  std::string idx_dir;  // non-empty: load an IDX image/label corpus instead of blobs
  data::Scheme scheme = data::Scheme::kNonIid2;

  std::size_t n = 10;
  std::size_t k = 10;
  double xi = 0.2;
  double gamma = 0.05;
  double alpha = 0.1;
  double beta = 0.5;
  double d = 0.1;

  double lr_client = 0.1;
  double lr_server = 0.1;
  double lr_detection = 0.02;
  std::size_t epochs_client = 5;
  std::size_t epochs_server = 1;
  std::size_t epochs_pretrain = 50;
  std::size_t batch_client = 20;   // 0 = full batch
  std::size_t batch_detector = 16;
  std::size_t warmup_rounds = 10;

  attack::AttackSpec attack{attack::Kind::kSameValue, 5.0, -5.0, 0.3, 0};
  defense::AggregatorSpec defense{};

  nn::ModelKind model_kind = nn::ModelKind::kMlpClassifier;
  std::vector<std::size_t> hidden{16, 16};
  std::string detector_checkpoint;

  std::size_t input_dim() const { return blobs.dim; }

  nn::ModelSpec model_spec(std::size_t input_dim, std::size_t classes) const {
    return model_kind == nn::ModelKind::kLogisticRegression ? nn::ModelSpec::logistic(input_dim, classes)
                                                           : nn::ModelSpec::mlp(input_dim, hidden, classes);
  }

  std::size_t krum_f() const {
    return defense.assumed_byzantine >= 0 ? static_cast<std::size_t>(defense.assumed_byzantine)
                                          : ceil_count(xi, k);
  }
  double trim_fraction() const { return defense.trim_fraction >= 0.0 ? defense.trim_fraction : xi; }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (rounds == 0) fail("rounds must be at least 1");
    if (n == 0 || k == 0) fail("fl.n and fl.k must be positive");
    if (k > n) fail("fl.k must not exceed fl.n");
    if (!(xi >= 0.0 && xi < 0.5)) fail("fl.xi must be in [0, 0.5)");
    if (!(gamma > 0.0 && gamma < 1.0)) fail("fl.gamma must be in (0, 1)");
    if (!(alpha > 0.0 && alpha < 1.0)) fail("brca.alpha must be in (0, 1)");
    if (!(beta >= 0.0 && beta <= 1.0)) fail("brca.beta must be in [0, 1]");
    if (!(d >= 0.0 && d < 0.5)) fail("brca.d must be in [0, 0.5)");
    if (!(lr_client > 0.0) || !(lr_server > 0.0) || !(lr_detection > 0.0))
      fail("learning rates must be positive");
    if (batch_detector == 0) fail("batch.detector must be at least 1");
    if (blobs.num_classes == 0 || blobs.dim == 0 || blobs.per_class == 0)
      fail("data.classes, data.dim and data.per_class must be positive");
    if (model_kind == nn::ModelKind::kMlpAutoencoder) fail("model.kind must be a classifier");
    if (model_kind == nn::ModelKind::kMlpClassifier && hidden.empty())
      fail("model.hidden must list at least one width for mlp-classifier");
    if (defense.kind == defense::Kind::kTrimmedMean && 2 * ceil_count(trim_fraction(), k) >= k)
      fail("defense.trim_fraction removes every value");
    if (defense.kind == defense::Kind::kKrum && k < krum_f() + 3) fail("krum needs fl.k >= f + 3");
    try {
      attack.validate();
    } catch (const InvalidArgument& e) {
      fail(std::string("attack: ") + e.what());
    }
  }
};

namespace config_names {

template <typename E>
using Table = std::vector<std::pair<E, const char*>>;

inline const Table<data::Scheme>& schemes() {
  static const Table<data::Scheme> t{{data::Scheme::kNonIid1, "non-iid-1"},
                                     {data::Scheme::kNonIid2, "non-iid-2"},
                                     {data::Scheme::kNonIid3, "non-iid-3"},
                                     {data::Scheme::kIid, "iid"}};
  return t;
}
inline const Table<attack::Kind>& attacks() {
  static const Table<attack::Kind> t{{attack::Kind::kNone, "none"},
                                     {attack::Kind::kSameValue, "same-value"},
                                     {attack::Kind::kSignFlipping, "sign-flipping"},
                                     {attack::Kind::kGaussian, "gaussian"}};
  return t;
}
inline const Table<defense::Kind>& defenses() {
  static const Table<defense::Kind> t{{defense::Kind::kNoDefense, "no-defense"},
                                      {defense::Kind::kKrum, "krum"},
                                      {defense::Kind::kGeoMed, "geomed"},
                                      {defense::Kind::kTrimmedMean, "trimmed-mean"},
                                      {defense::Kind::kAbnormal, "abnormal"},
                                      {defense::Kind::kBrca, "brca"}};
  return t;
}
inline const Table<nn::ModelKind>& models() {
  static const Table<nn::ModelKind> t{{nn::ModelKind::kLogisticRegression, "logistic-regression"},
                                      {nn::ModelKind::kMlpClassifier, "mlp-classifier"}};
  return t;
}

template <typename E>
std::string to_name(const Table<E>& t, E v) {
  for (const auto& [e, s] : t)
    if (e == v) return s;
  return "?";
}

template <typename E>
E from_name(const Table<E>& t, const std::string& key, const std::string& name) {
  for (const auto& [e, s] : t)
    if (name == s) return e;
  std::string allowed;
  for (const auto& [e, s] : t) allowed += (allowed.empty() ? "" : ", ") + std::string(s);
  throw ConfigError(key + ": unknown value '" + name + "' (expected one of " + allowed + ")");
}

}  // namespace config_names

inline const std::vector<std::string>& required_config_keys() {
  static const std::vector<std::string> keys{"rounds",      "fl.n",         "fl.k",      "partition.scheme",
                                             "attack.kind", "defense.kind", "model.kind"};
  return keys;
}

/// Full canonical JSON form (every key present, keys sorted).
inline json to_json(const ExperimentConfig& c) {
  using namespace config_names;
  json j;
  j["seed"] = c.seed;
  j["rounds"] = c.rounds;
  j["data.classes"] = c.blobs.num_classes;
  j["data.dim"] = c.blobs.dim;
  j["data.per_class"] = c.blobs.per_class;
  j["data.spread"] = c.blobs.spread;
  j["data.idx_dir"] = c.idx_dir;
  j["partition.scheme"] = to_name(schemes(), c.scheme);
  j["fl.n"] = c.n;
  j["fl.k"] = c.k;
  j["fl.xi"] = c.xi;
  j["fl.gamma"] = c.gamma;
  j["brca.alpha"] = c.alpha;
  j["brca.beta"] = c.beta;
  j["brca.d"] = c.d;
  j["lr.client"] = c.lr_client;
  j["lr.server"] = c.lr_server;
  j["lr.detection"] = c.lr_detection;
  j["epochs.client"] = c.epochs_client;
  j["epochs.server"] = c.epochs_server;
  j["epochs.pretrain"] = c.epochs_pretrain;
  j["batch.client"] = c.batch_client;
  j["batch.detector"] = c.batch_detector;
  j["warmup.rounds"] = c.warmup_rounds;
  j["attack.kind"] = to_name(attacks(), c.attack.kind);
  j["attack.c"] = c.attack.c;
  j["attack.a"] = c.attack.a;
  j["attack.g"] = c.attack.g;
  j["defense.kind"] = to_name(defenses(), c.defense.kind);
  j["defense.krum_f"] = c.defense.assumed_byzantine;
  j["defense.trim_fraction"] = c.defense.trim_fraction;
  j["defense.weiszfeld_tol"] = c.defense.weiszfeld_tol;
  j["defense.weiszfeld_max_iters"] = c.defense.weiszfeld_max_iters;
  j["defense.unified_update"] = c.defense.unified_update;
  j["model.kind"] = to_name(models(), c.model_kind);
  j["model.hidden"] = c.hidden;
  j["detector.checkpoint"] = c.detector_checkpoint;
  return j;
}

inline const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    const json defaults = to_json(ExperimentConfig{});
    for (const auto& [key, v] : defaults.items()) k.push_back(key);
    return k;
  }();
  return keys;
}

/// Resolves short aliases ("xi", "gamma", "defense", ...) to full dotted keys.
inline std::string resolve_config_key(const std::string& key) {
  static const std::map<std::string, std::string> aliases{
      {"defense", "defense.kind"},        {"attack", "attack.kind"},   {"scheme", "partition.scheme"},
      {"distribution", "partition.scheme"}, {"model", "model.kind"}, {"n", "fl.n"},
      {"k", "fl.k"}};
  const auto& known = known_config_keys();
  if (std::find(known.begin(), known.end(), key) != known.end()) return key;
  if (auto it = aliases.find(key); it != aliases.end()) return it->second;
  std::string match;
  for (const auto& full : known) {
    const auto dot = full.rfind('.');
    if (dot != std::string::npos && full.substr(dot + 1) == key) {
      if (!match.empty()) throw ConfigError("ambiguous config key '" + key + "'");
      match = full;
    }
  }
  if (match.empty()) throw ConfigError("unknown config key '" + key + "'");
  return match;
}

namespace detail {
template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + j.at(key).dump());
  }
}
}  // namespace detail

/// Parses and validates a flat config object. Missing required keys and
/// unknown keys raise ConfigError naming the key.
inline ExperimentConfig config_from_json(const json& j) {
  using namespace config_names;
  using detail::get_as;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& key : required_config_keys())
    if (!j.contains(key)) throw ConfigError("missing required config key '" + key + "'");
  const auto& known = known_config_keys();
  for (const auto& [key, v] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown config key '" + key + "'");

  ExperimentConfig c;
  auto num = [&](const char* key, auto& field) {
    if (j.contains(key)) field = get_as<std::decay_t<decltype(field)>>(j, key);
  };
  num("seed", c.seed);
  num("rounds", c.rounds);
  num("data.classes", c.blobs.num_classes);
  num("data.dim", c.blobs.dim);
  num("data.per_class", c.blobs.per_class);
  num("data.spread", c.blobs.spread);
  num("data.idx_dir", c.idx_dir);
  if (j.contains("partition.scheme"))
    c.scheme = from_name(schemes(), "partition.scheme", get_as<std::string>(j, "partition.scheme"));
  num("fl.n", c.n);
  num("fl.k", c.k);
  num("fl.xi", c.xi);
  num("fl.gamma", c.gamma);
  num("brca.alpha", c.alpha);
  num("brca.beta", c.beta);
  num("brca.d", c.d);
  num("lr.client", c.lr_client);
  num("lr.server", c.lr_server);
  num("lr.detection", c.lr_detection);
  num("epochs.client", c.epochs_client);
  num("epochs.server", c.epochs_server);
  num("epochs.pretrain", c.epochs_pretrain);
  num("batch.client", c.batch_client);
  num("batch.detector", c.batch_detector);
  num("warmup.rounds", c.warmup_rounds);
  if (j.contains("attack.kind"))
    c.attack.kind = from_name(attacks(), "attack.kind", get_as<std::string>(j, "attack.kind"));
  num("attack.c", c.attack.c);
  num("attack.a", c.attack.a);
  num("attack.g", c.attack.g);
  if (j.contains("defense.kind"))
    c.defense.kind = from_name(defenses(), "defense.kind", get_as<std::string>(j, "defense.kind"));
  num("defense.krum_f", c.defense.assumed_byzantine);
  num("defense.trim_fraction", c.defense.trim_fraction);
  num("defense.weiszfeld_tol", c.defense.weiszfeld_tol);
  num("defense.weiszfeld_max_iters", c.defense.weiszfeld_max_iters);
  num("defense.unified_update", c.defense.unified_update);
  if (j.contains("model.kind"))
    c.model_kind = from_name(models(), "model.kind", get_as<std::string>(j, "model.kind"));
  num("model.hidden", c.hidden);
  num("detector.checkpoint", c.detector_checkpoint);
  c.validate();
  return c;
}

/// Applies "key=value" overrides to a raw config object. Values are parsed as
/// JSON when possible and taken as strings otherwise.
inline void apply_overrides(json& j, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not KEY=VALUE");
    const std::string key = resolve_config_key(o.substr(0, eq));
    const std::string text = o.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    j[key] = value;
  }
}

/// FNV-1a of the canonical serialization, as 16 hex digits.
inline std::string config_digest(const ExperimentConfig& c) {
  const std::string canon = to_json(c).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace brca
