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

// Fits the AR(1)/ARCH(1) pool to one simulated path with both estimators and
// prints the estimates, their sandwich standard errors and holdout scores.

#include <cmath>
#include <cstdio>

#include "poolcast/poolcast.hpp"

using namespace poolcast;

int main() {
  const DgpParams dgp;
  const auto y = simulate_dgp(dgp, 7000, RngStream(2024)).values();
  const std::span<const double> sample(y.data(), 2000);
  const IndexRange holdout{2000, y.size()};

  const double b = stationary_quantile(dgp, 0.2, 1000000, RngStream(2024).split("quantile"));
  for (const ScoringRule& rule : {ScoringRule::log_score(), ScoringRule::censored(b, 0.2)}) {
    const auto two = estimate_two_stage(sample, rule);
    const auto one = estimate_one_stage(sample, rule, two.estimate);
    std::printf("rule %s\n", rule.id().c_str());
    for (const auto* r : {&two, &one}) {
      std::printf("  %-9s in-sample %.5f  holdout %.5f%s\n", to_string(r->mode).c_str(), r->achieved_score,
                  out_of_sample_score(r->estimate, y, holdout, rule), r->at_boundary() ? "  (boundary)" : "");
      std::optional<SandwichCovariance> sw;
      if (!r->at_boundary()) sw = sandwich(moment_mode(r->mode), r->estimate, sample, rule);
      const auto names = r->estimate.names();
      for (std::size_t i = 0; i < names.size(); ++i) {
        std::printf("    %-9s %9.4f", names[i].c_str(), r->estimate[i]);
        if (sw) std::printf("  se %.4f", std::sqrt(sw->w(i, i) / static_cast<double>(sw->n)));
        std::printf("\n");
      }
    }
  }
  return 0;
}
