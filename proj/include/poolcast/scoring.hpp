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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "poolcast/common.hpp"
#include "poolcast/distribution.hpp"
#include "poolcast/series.hpp"

namespace poolcast {

enum class ScoreKind { log_score, censored_log_score };

/// Positively oriented scoring rule. The censored rule focuses on the region
/// B = (-inf, threshold] and scores everything above it by the predictive
/// upper-tail mass.
struct ScoringRule {
  ScoreKind kind = ScoreKind::log_score;
  double threshold = 0.0;  // b, censored rule only
  double prob = 0.0;       // tail probability that produced b, 0 if set directly

  static ScoringRule log_score() { return {}; }

  static ScoringRule censored(double b, double p = 0.0) {
    require(std::isfinite(b), "censoring threshold must be finite");
    return {ScoreKind::censored_log_score, b, p};
  }

  bool censored() const noexcept { return kind == ScoreKind::censored_log_score; }

  bool in_region(double y) const noexcept { return !censored() || y <= threshold; }

  /// Short identifier: "ls", "cs20" for p = 0.2, "cs@<b>" for a bare threshold.
  std::string id() const {
    if (!censored()) return "ls";
    if (prob > 0.0) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "cs%g", prob * 100.0);
      return buf;
    }
    return "cs@" + format_double(threshold);
  }
};

/// S(F, y). Returns -inf when the predictive assigns zero density or mass to
/// the outcome; use checked_score() or average_score() to turn that into an error.
inline double score(const ScoringRule& rule, const PredictiveDistribution& f, double y) {
  if (rule.in_region(y)) return log_density(f, y);
  return log_ccdf(f, rule.threshold);
}

inline double checked_score(const ScoringRule& rule, const PredictiveDistribution& f, double y,
                            std::size_t index) {
  const double s = score(rule, f, y);
  if (!(s > kNegInf) || std::isnan(s)) throw ScoringFailure(index, "score is -inf or NaN");
  return s;
}

/// Half-open index range [begin, end) into a series.
struct IndexRange {
  std::size_t begin = 1;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
};

/// Builds F_t from the series using only values before t.
using PredictiveGenerator = std::function<PredictiveDistribution(const ObservedSeries&, std::size_t)>;

/// Mean of S(F_t, y_t) over the range. Scoring needs one lag, so the range
/// must start at index 1 or later; the divisor is the number of scored points.
inline double average_score(const ScoringRule& rule, const PredictiveGenerator& model,
                            const ObservedSeries& series, IndexRange range) {
  require(range.begin >= 1, "scoring range must start at index >= 1 (one lag of conditioning)");
  require(range.end <= series.size() && range.size() > 0, "scoring range outside series");
  double sum = 0.0;
  for (std::size_t t = range.begin; t < range.end; ++t)
    sum += checked_score(rule, model(series, t), series[t], t);
  return sum / static_cast<double>(range.size());
}

/// Empirical p-quantile as the order statistic at rank ceil(p N).
inline double empirical_quantile(std::vector<double> values, double p) {
  require(!values.empty(), "quantile of empty sample");
  require(p > 0.0 && p < 1.0, "quantile probability must lie in (0, 1)");
  const auto n = values.size();
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  const std::size_t k = std::clamp<std::size_t>(rank, 1, n) - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

/// Censored rule whose region is the lower p-tail reported by quantile_source.
inline ScoringRule censor_region_from_quantile(double p,
                                               const std::function<double(double)>& quantile_source) {
  require(p > 0.0 && p < 1.0, "censoring probability must lie in (0, 1)");
  return ScoringRule::censored(quantile_source(p), p);
}

}  // namespace poolcast
