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

// Experiment runner behind the command-line tool: config loading, run
// directories, sweeps and detector pre-training. Every entry point returns a
// process exit code.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "brca/checkpoint.hpp"
#include "brca/config.hpp"
#include "brca/error.hpp"
#include "brca/simulation.hpp"

#ifndef BRCA_GIT_DESCRIBE
#define BRCA_GIT_DESCRIBE "unknown"
#endif

namespace brca::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kInvalidConfig = 2, kRuntimeAbort = 3 };

inline constexpr char kSentinel[] = "INCOMPLETE";

/// Reads a JSON config file, applies overrides and an optional seed, and
/// validates the result. Problems surface as ConfigError.
inline json load_raw_config(const fs::path& path, const std::vector<std::string>& overrides,
                            std::optional<std::uint64_t> seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json raw = json::parse(in, nullptr, false);
  if (raw.is_discarded()) throw ConfigError("config file '" + path.string() + "' is not valid JSON");
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  apply_overrides(raw, overrides);
  if (seed) raw["seed"] = *seed;
  return raw;
}

inline ExperimentConfig load_config(const fs::path& path, const std::vector<std::string>& overrides = {},
                                    std::optional<std::uint64_t> seed = std::nullopt) {
  return config_from_json(load_raw_config(path, overrides, seed));
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

struct RunManifest {
  std::string config_digest;
  std::uint64_t master_seed = 0;
  std::string output_dir;
  std::string git_describe = BRCA_GIT_DESCRIBE;
  std::string started;
  std::string finished;
};

inline json manifest_json(const RunManifest& m, const ExperimentConfig& cfg) {
  return json{{"config_digest", m.config_digest}, {"master_seed", m.master_seed},
              {"output_dir", m.output_dir},       {"git_describe", m.git_describe},
              {"started", m.started},             {"finished", m.finished.empty() ? json(nullptr) : json(m.finished)},
              {"config", to_json(cfg)}};
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
}

struct RunResult {
  double final_accuracy = 0.0;
  double final_loss = 0.0;
  std::size_t rounds = 0;
};

/// Runs one experiment into `out`. The sentinel file exists for the whole run
/// and is removed only after every output is complete. Throws on failure.
inline RunResult run_experiment(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log,
                                bool write_timing = true) {
  fs::create_directories(out);
  write_text(out / kSentinel, "run started " + utc_timestamp() + "\n");

  RunManifest man{config_digest(cfg), cfg.seed, fs::absolute(out).lexically_normal().string(), BRCA_GIT_DESCRIBE,
                  utc_timestamp(), ""};
  write_text(out / "manifest.json", manifest_json(man, cfg).dump(2) + "\n");

  std::optional<aadm::DetectorState> detector;
  if (sim::needs_detector(cfg.defense.kind) && !cfg.detector_checkpoint.empty())
    detector = checkpoint::load_detector(cfg.detector_checkpoint);

  sim::Experiment ex(cfg, std::move(detector));
  std::ofstream metrics(out / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  std::ofstream summary(out / "summary.csv", std::ios::binary | std::ios::trunc);
  std::ofstream timing;
  if (write_timing) {
    timing.open(out / "timing.csv", std::ios::binary | std::ios::trunc);
    timing << "round,wall_time_ms\n";
  }
  summary << "round,accuracy,loss\n";
  summary << std::setprecision(17);

  RunResult res;
  ex.run([&](const sim::RoundMetrics& m) {
    metrics << sim::metrics_json(m).dump() << '\n';
    summary << m.round << ',' << m.test_accuracy << ',' << m.test_loss << '\n';
    if (write_timing) timing << m.round << ',' << m.wall_time_ms << '\n';
    res.final_accuracy = m.test_accuracy;
    res.final_loss = m.test_loss;
    res.rounds = m.round + 1;
    if ((m.round + 1) % 10 == 0 || m.round + 1 == cfg.rounds)
      log << "round " << m.round + 1 << "/" << cfg.rounds << "  accuracy " << std::fixed << std::setprecision(4)
          << m.test_accuracy << std::defaultfloat << '\n';
  });
  metrics.close();
  summary.close();

  checkpoint::save_model((out / "model.ckpt").string(), ex.model(), ex.state().global);
  if (ex.state().detector) checkpoint::save_detector((out / "detector.ckpt").string(), *ex.state().detector);

  man.finished = utc_timestamp();
  write_text(out / "manifest.json", manifest_json(man, cfg).dump(2) + "\n");
  fs::remove(out / kSentinel);
  return res;
}

/// Maps a thrown failure to an exit code and a one-line diagnostic.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: invalid config: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const NonFiniteError& e) {
    err << "error: run aborted: " << e.what() << '\n';
    return kRuntimeAbort;
  } catch (const std::exception& e) {
    err << "error: run aborted: " << e.what() << '\n';
    return kRuntimeAbort;
  }
}

inline int cmd_run(const fs::path& config, const std::vector<std::string>& overrides,
                   std::optional<std::uint64_t> seed, const fs::path& out, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = load_config(config, overrides, seed);
    const auto r = run_experiment(cfg, out, log);
    log << "final accuracy " << r.final_accuracy << " after " << r.rounds << " rounds -> " << out.string() << '\n';
    return int{kOk};
  });
}

inline int cmd_pretrain(const fs::path& config, const std::vector<std::string>& overrides,
                        std::optional<std::uint64_t> seed, const fs::path& out, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = load_config(config, overrides, seed);
    const auto fed = sim::make_federation(cfg);
    const auto det = sim::pretrain_source_detector(cfg, fed.model, sim::initial_model(fed.model, cfg));
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    checkpoint::save_detector(out.string(), det);
    log << "detector (probe dim " << det.probe_dim() << ") -> " << out.string() << '\n';
    return int{kOk};
  });
}

struct SweepCell {
  std::string value;
  std::uint64_t seed = 0;
  fs::path dir;
  RunResult result;
  std::string status = "pending";
};

/// Directory-safe rendering of an axis value.
inline std::string cell_name(const std::string& v) {
  std::string s;
  for (char c : v) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') ? c : '_';
  return s;
}

inline std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string q = "\"";
  for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

/// Runs values x seeds, each cell in its own directory, on up to `jobs`
/// threads. A failing cell is recorded in the combined CSV and the sweep
/// continues; the exit code is nonzero if any cell failed.
inline int cmd_sweep(const fs::path& config, const std::vector<std::string>& overrides, const std::string& axis,
                     const std::vector<std::string>& values, std::vector<std::uint64_t> seeds, const fs::path& out,
                     std::size_t jobs, std::ostream& log, std::ostream& err) {
  std::string key;
  json base;
  const int prep = guarded(err, [&] {
    if (values.empty()) throw ConfigError("sweep needs at least one value for axis '" + axis + "'");
    key = resolve_config_key(axis);
    if (key == "seed") throw ConfigError("sweep over seeds with --seeds, not --axis");
    base = load_raw_config(config, overrides, std::nullopt);
    if (seeds.empty()) seeds.push_back(config_from_json(base).seed);
    for (const auto& v : values) {
      json probe = base;
      apply_overrides(probe, {key + "=" + v});
      config_from_json(probe);
    }
    return int{kOk};
  });
  if (prep != kOk) return prep;

  std::vector<SweepCell> cells;
  for (const auto& v : values)
    for (auto s : seeds)
      cells.push_back({v, s, out / (key + "=" + cell_name(v)) / ("seed-" + std::to_string(s)), {}, "pending"});

  std::mutex log_mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      auto& c = cells[i];
      std::ostringstream cell_log, cell_err;
      const int code = guarded(cell_err, [&] {
        json raw = base;
        apply_overrides(raw, {key + "=" + c.value});
        raw["seed"] = c.seed;
        c.result = run_experiment(config_from_json(raw), c.dir, cell_log);
        return int{kOk};
      });
      c.status = code == kOk ? "ok" : code == kInvalidConfig ? "invalid-config" : "aborted";
      std::lock_guard lock(log_mu);
      log << key << '=' << c.value << " seed " << c.seed << ": " << c.status;
      if (code == kOk) log << "  accuracy " << c.result.final_accuracy;
      log << '\n' << cell_err.str();
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  fs::create_directories(out);
  std::ofstream csv(out / "sweep.csv", std::ios::binary | std::ios::trunc);
  csv << "axis,value,seed,final_accuracy,final_loss,status\n" << std::setprecision(17);
  bool any_failed = false;
  for (const auto& c : cells) {
    const bool ok = c.status == "ok";
    any_failed = any_failed || !ok;
    csv << key << ',' << csv_field(c.value) << ',' << c.seed << ',';
    if (ok) csv << c.result.final_accuracy << ',' << c.result.final_loss;
    else csv << ',';
    csv << ',' << c.status << '\n';
  }
  return any_failed ? kFailure : kOk;
}

}  // namespace brca::cli
