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

// brca-sim: run, sweep and pre-train Byzantine-robust federated experiments.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brca/runner.hpp"

int main(int argc, char** argv) {
  namespace cli = brca::cli;
  CLI::App app{"Byzantine-robust federated learning simulator"};
  app.require_subcommand(1);

  std::string config, out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  auto common = [&](CLI::App* sub, const char* out_help) {
    sub->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, out_help)->required();
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--override", overrides, "KEY=VALUE config override (repeatable)")->take_all();
  };

  auto* run = app.add_subcommand("run", "run one experiment");
  common(run, "output directory");

  std::string axis;
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "run a grid of values x seeds");
  common(sweep, "output directory (one subdirectory per cell)");
  sweep->add_option("--axis", axis, "config key to sweep")->required();
  sweep->add_option("--values", values, "axis values (comma separated or repeated)")->delimiter(',')->required();
  sweep->add_option("--seeds", seeds, "master seeds (default: the config seed)")->delimiter(',');
  sweep->add_option("--jobs", jobs, "concurrent cells")->check(CLI::PositiveNumber);

  auto* pretrain = app.add_subcommand("pretrain", "pre-train a source-domain detector checkpoint");
  common(pretrain, "detector checkpoint path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kInvalidConfig;
  }

  if (*run) return cli::cmd_run(config, overrides, seed, out, std::cout, std::cerr);
  if (*pretrain) return cli::cmd_pretrain(config, overrides, seed, out, std::cout, std::cerr);
  if (seed && seeds.empty()) seeds.push_back(*seed);
  return cli::cmd_sweep(config, overrides, axis, values, seeds, out, jobs, std::cout, std::cerr);
}
