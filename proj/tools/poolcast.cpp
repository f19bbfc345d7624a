// Copyright 2026 The Poolcast Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "poolcast/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"poolcast: one-stage vs two-stage estimation of linear forecast pools"};
  app.require_subcommand(1);

  std::string config;
  poolcast::cli::Overrides ov;
  int threads = -1;
  std::uint64_t seed = 0;
  std::string out;

  for (const char* name : {"replicate", "empirical", "reference", "score"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_flag("--dry-run", ov.dry_run, "validate and print a cost estimate only");
    sub->add_option("--threads", threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out, "output directory (default: config 'out', then $POOLCAST_OUT)");
  }

  CLI11_PARSE(app, argc, argv);
  const auto* sub = app.get_subcommands().front();
  if (threads >= 0) ov.threads = threads;
  if (sub->count("--seed") > 0) ov.seed = seed;
  if (!out.empty()) ov.out = out;

  return poolcast::cli::run(sub->get_name(), config, ov, [](const std::string& msg) { std::cerr << msg << '\n'; });
}
