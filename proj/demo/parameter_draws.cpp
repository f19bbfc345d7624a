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

// Parameter-uncertainty bands for the holdout score of a two-stage pool:
// Gaussian draws around the estimate, percentile interval and a KDE.

#include <cstdio>

#include "poolcast/poolcast.hpp"

using namespace poolcast;

int main() {
  const auto y = simulate_dgp(DgpParams{}, 3000, RngStream(99)).values();
  const std::span<const double> sample(y.data(), 2000);
  const auto rule = ScoringRule::log_score();

  const auto fit = estimate_two_stage(sample, rule);
  const auto sw = sandwich(MomentMode::two_stage, fit.estimate, sample, rule);
  const auto draws = parameter_sampling_distribution(fit.estimate, sw.w / static_cast<double>(sw.n), y,
                                                     {2000, y.size()}, {rule}, 5000, RngStream(99).split("draws"));
  const auto& set = draws.sets.front();
  const auto ci = percentile_ci(set.draws, 0.95);
  std::printf("holdout score %.5f, 95%% interval [%.5f, %.5f], %zu redraws\n", *set.point, ci.lo, ci.hi,
              draws.rejected);

  const auto curve = kde(set.draws, kde_grid(set.draws, 41));
  for (std::size_t i = 0; i < curve.grid.size(); i += 4)
    std::printf("%9.5f %8.2f\n", curve.grid[i], curve.density[i]);
  return 0;
}
