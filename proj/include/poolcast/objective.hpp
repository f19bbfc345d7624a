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

// In-sample average score S_n(theta) of a pool (or single constituent) with
// analytic gradients, plus per-observation gradient contributions.

#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "poolcast/common.hpp"
#include "poolcast/normal.hpp"
#include "poolcast/parallel.hpp"
#include "poolcast/pool.hpp"
#include "poolcast/scoring.hpp"

namespace poolcast {

inline constexpr std::size_t kMaxConstituents = 16;

namespace detail {

struct ComponentState {
  double mean = 0.0;
  double sd = 1.0;
  std::array<double, kParamsPerModel> dmean{};
  std::array<double, kParamsPerModel> dsd{};
};

inline void component_state(ModelKind kind, const double* g, double y_prev, ComponentState& c) {
  if (kind == ModelKind::ar1) {
    c.mean = g[0] + g[1] * y_prev;
    c.sd = g[2];
    c.dmean = {1.0, y_prev, 0.0};
    c.dsd = {0.0, 0.0, 1.0};
  } else {
    const double e = y_prev - g[0];
    c.mean = g[0];
    c.sd = std::sqrt(g[1] + g[2] * e * e);
    const double inv2s = 0.5 / c.sd;
    c.dmean = {1.0, 0.0, 0.0};
    c.dsd = {-2.0 * g[2] * e * inv2s, inv2s, e * e * inv2s};
  }
}

}  // namespace detail

/// S(F_t, y_t) for the stacked parameters at one observation. When grad is
/// non-null it receives d S / d theta (natural coordinates, theta.dim() long).
inline double observation_score(const std::vector<ModelKind>& kinds, const double* theta,
                                const ScoringRule& rule, double y_prev, double y, double* grad) {
  const std::size_t k_count = kinds.size();
  const std::size_t eta_dim = k_count - 1;
  std::array<detail::ComponentState, kMaxConstituents> comp;
  std::array<double, kMaxConstituents> log_term{};
  std::array<double, kMaxConstituents> d_mean{};
  std::array<double, kMaxConstituents> d_sd{};
  std::array<double, kMaxConstituents> weighted{};

  const bool density = rule.in_region(y);
  double rest = 1.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    auto& c = comp[k];
    detail::component_state(kinds[k], theta + eta_dim + k * kParamsPerModel, y_prev, c);
    if (density) {
      const double z = (y - c.mean) / c.sd;
      log_term[k] = math::normal_log_pdf(z) - std::log(c.sd);
      d_mean[k] = z / c.sd;
      d_sd[k] = (z * z - 1.0) / c.sd;
    } else {
      const double z = (rule.threshold - c.mean) / c.sd;
      log_term[k] = math::log_normal_ccdf(z);
      const double hazard = std::exp(math::normal_log_pdf(z) - log_term[k]);
      d_mean[k] = hazard / c.sd;
      d_sd[k] = hazard * z / c.sd;
    }
    double w = 1.0;
    if (eta_dim > 0) {
      w = k < eta_dim ? theta[k] : rest;
      if (k < eta_dim) rest -= theta[k];
    }
    weighted[k] = w > 0.0 ? std::log(w) + log_term[k] : kNegInf;
  }
  const double total = math::log_sum_exp(std::span<const double>(weighted.data(), k_count));
  if (grad == nullptr || !(total > kNegInf)) return total;

  for (std::size_t k = 0; k < eta_dim; ++k)
    grad[k] = std::exp(log_term[k] - total) - std::exp(log_term[k_count - 1] - total);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double r = weighted[k] > kNegInf ? std::exp(weighted[k] - total) : 0.0;
    double* g = grad + eta_dim + k * kParamsPerModel;
    for (std::size_t i = 0; i < kParamsPerModel; ++i)
      g[i] = r * (d_mean[k] * comp[k].dmean[i] + d_sd[k] * comp[k].dsd[i]);
  }
  return total;
}

/// S_n(theta) = mean of S(F_t^theta, y_t) over a range of a series.
class ScoreObjective {
 public:
  ScoreObjective(std::vector<ModelKind> kinds, ScoringRule rule, std::span<const double> y, IndexRange range)
      : kinds_(std::move(kinds)), rule_(rule), y_(y), range_(range) {
    require(!kinds_.empty() && kinds_.size() <= kMaxConstituents, "unsupported constituent count");
    require(range_.begin >= 1, "scoring range must start at index >= 1");
    require(range_.end <= y_.size() && range_.size() > 0, "scoring range outside series");
  }

  /// Scores t = 1 .. y.size()-1.
  ScoreObjective(std::vector<ModelKind> kinds, ScoringRule rule, std::span<const double> y)
      : ScoreObjective(std::move(kinds), rule, y, IndexRange{1, y.size()}) {}

  const std::vector<ModelKind>& kinds() const noexcept { return kinds_; }
  const ScoringRule& rule() const noexcept { return rule_; }
  IndexRange range() const noexcept { return range_; }
  std::size_t count() const noexcept { return range_.size(); }
  std::size_t dim() const noexcept { return kinds_.size() - 1 + kinds_.size() * kParamsPerModel; }

  double value(const ParameterVector& theta) const {
    check(theta);
    const double* th = theta.values().data();
    const double sum = chunked_reduce(
        count(), 0.0,
        [&](std::size_t b, std::size_t e, double& acc) {
          for (std::size_t i = b; i < e; ++i) {
            const std::size_t t = range_.begin + i;
            acc += observation_score(kinds_, th, rule_, y_[t - 1], y_[t], nullptr);
          }
        },
        [](double& total, double part) { total += part; });
    return sum / static_cast<double>(count());
  }

  /// Value plus gradient in natural coordinates.
  double value_and_gradient(const ParameterVector& theta, std::vector<double>& grad) const {
    check(theta);
    const std::size_t d = dim();
    const double* th = theta.values().data();
    struct Acc {
      double value = 0.0;
      std::vector<double> grad;
    };
    Acc zero{0.0, std::vector<double>(d, 0.0)};
    Acc total = chunked_reduce(
        count(), zero,
        [&](std::size_t b, std::size_t e, Acc& acc) {
          std::vector<double> g(d);
          for (std::size_t i = b; i < e; ++i) {
            const std::size_t t = range_.begin + i;
            acc.value += observation_score(kinds_, th, rule_, y_[t - 1], y_[t], g.data());
            for (std::size_t j = 0; j < d; ++j) acc.grad[j] += g[j];
          }
        },
        [](Acc& tot, const Acc& part) {
          tot.value += part.value;
          for (std::size_t j = 0; j < tot.grad.size(); ++j) tot.grad[j] += part.grad[j];
        });
    const double inv = 1.0 / static_cast<double>(count());
    grad.resize(d);
    for (std::size_t j = 0; j < d; ++j) grad[j] = total.grad[j] * inv;
    return total.value * inv;
  }

  /// Row i holds d S(F_t, y_t) / d theta for t = range.begin + i.
  Eigen::MatrixXd contributions(const ParameterVector& theta) const {
    check(theta);
    const std::size_t d = dim();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(count()), static_cast<Eigen::Index>(d));
    const double* th = theta.values().data();
    parallel_for((count() + kReductionChunk - 1) / kReductionChunk, [&](std::size_t c) {
      std::vector<double> g(d);
      const std::size_t b = c * kReductionChunk;
      const std::size_t e = std::min(count(), b + kReductionChunk);
      for (std::size_t i = b; i < e; ++i) {
        const std::size_t t = range_.begin + i;
        const double s = observation_score(kinds_, th, rule_, y_[t - 1], y_[t], g.data());
        if (!(s > kNegInf)) throw ScoringFailure(t, "score is -inf");
        for (std::size_t j = 0; j < d; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g[j];
      }
    });
    return out;
  }

  /// First index whose score is -inf or NaN, or range.end when all are finite.
  std::size_t first_failure(const ParameterVector& theta) const {
    for (std::size_t t = range_.begin; t < range_.end; ++t) {
      const double s = observation_score(kinds_, theta.values().data(), rule_, y_[t - 1], y_[t], nullptr);
      if (!(s > kNegInf) || std::isnan(s)) return t;
    }
    return range_.end;
  }

 private:
  void check(const ParameterVector& theta) const {
    require(theta.constituents() == kinds_, "parameter vector does not match objective layout");
  }

  std::vector<ModelKind> kinds_;
  ScoringRule rule_;
  std::span<const double> y_;
  IndexRange range_;
};

}  // namespace poolcast
