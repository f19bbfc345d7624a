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
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poolcast/common.hpp"
#include "poolcast/models.hpp"
#include "poolcast/objective.hpp"
#include "poolcast/optimizer.hpp"
#include "poolcast/pool.hpp"
#include "poolcast/rng.hpp"
#include "poolcast/scoring.hpp"
#include "poolcast/series.hpp"
#include "poolcast/transform.hpp"

namespace poolcast {

enum class EstimationMode { constituent, one_stage, two_stage, two_stage_fixed_weight };

inline std::string to_string(EstimationMode m) {
  switch (m) {
    case EstimationMode::constituent: return "constituent";
    case EstimationMode::one_stage: return "one_stage";
    case EstimationMode::two_stage: return "two_stage";
    case EstimationMode::two_stage_fixed_weight: return "two_stage_fixed_weight";
  }
  return "?";
}

inline EstimationMode estimation_mode_from_string(const std::string& s) {
  if (s == "one_stage") return EstimationMode::one_stage;
  if (s == "two_stage") return EstimationMode::two_stage;
  if (s == "two_stage_fixed_weight") return EstimationMode::two_stage_fixed_weight;
  if (s == "constituent") return EstimationMode::constituent;
  throw InvalidArgument("unknown estimation mode '" + s + "'");
}

inline constexpr std::size_t kMinEstimationLength = 30;

struct EstimatorOptions {
  int starts = 5;                          // Latin-hypercube starts
  std::uint64_t seed = 0x9d2c5680a3b1f7e1ull;  // drives the start design only
  OptimizerOptions optimizer{};
};

struct EstimationResult {
  ParameterVector estimate;
  double achieved_score = kNegInf;  // in-sample average at `estimate`
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;  // unconstrained coordinates, free block only
  int starts_used = 0;
  EstimationMode mode = EstimationMode::constituent;
  ScoringRule rule{};
  std::size_t scored = 0;                // observations in the average
  std::vector<std::size_t> boundary;     // coordinates at a logistic boundary
  std::vector<EstimationResult> stages;  // stage-1 fits for two-stage modes

  bool at_boundary() const noexcept { return !boundary.empty(); }
};

namespace detail {

struct DataScale {
  double mean = 0.0;
  double sd = 1.0;
};

inline DataScale data_scale(std::span<const double> y) {
  double m = 0.0;
  for (double v : y) m += v;
  m /= static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(y.size() - 1));
  return {m, sd > 0.0 ? sd : 1.0};
}

/// Box for the start design, in unconstrained coordinates.
inline std::pair<double, double> start_box(const std::vector<ModelKind>& kinds, std::size_t i,
                                           const DataScale& sc) {
  const std::size_t eta_dim = kinds.size() - 1;
  if (i < eta_dim) return {-2.0, 2.0};
  const std::size_t j = (i - eta_dim) / kParamsPerModel;
  const std::size_t r = (i - eta_dim) % kParamsPerModel;
  const double log_sd = std::log(sc.sd);
  if (r == 0) return {sc.mean - 0.3 * sc.sd, sc.mean + 0.3 * sc.sd};
  if (kinds[j] == ModelKind::ar1) {
    if (r == 1) return {math::logit(0.25), math::logit(0.9)};  // alpha1 in [-0.5, 0.8]
    return {log_sd - 1.0, log_sd + 0.3};
  }
  if (r == 1) return {2.0 * log_sd - 3.0, 2.0 * log_sd};
  return {-3.0, 1.5};
}

inline bool lexicographically_less(const std::vector<double>& a, const std::vector<double>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

/// Maximizes the objective over the coordinates in `free`; the others keep
/// their values from `base`. Starts are given in full unconstrained vectors.
inline EstimationResult maximize(const ScoreObjective& obj, const ParameterVector& base,
                                 const std::vector<std::size_t>& free,
                                 const std::vector<std::vector<double>>& starts,
                                 const OptimizerOptions& opt, EstimationMode mode) {
  const auto& kinds = obj.kinds();
  auto assemble = [&](const std::vector<double>& u) {
    ParameterVector full = transform::from_unconstrained(kinds, u);
    ParameterVector theta = base;
    for (std::size_t i : free) theta[i] = full[i];
    return theta;
  };

  struct Candidate {
    OptimizerResult opt;
    std::vector<double> u;
    ParameterVector theta;
    double score;
  };
  std::optional<Candidate> best;
  int used = 0;
  int total_iter = 0;
  std::vector<double> grad_theta;
  for (const auto& u0 : starts) {
    std::vector<double> u = u0;
    std::vector<double> x0;
    for (std::size_t i : free) x0.push_back(u[i]);
    auto fn = [&](const std::vector<double>& x, std::vector<double>& g) -> double {
      for (std::size_t k = 0; k < free.size(); ++k) u[free[k]] = x[k];
      const ParameterVector theta = assemble(u);
      const double s = obj.value_and_gradient(theta, grad_theta);
      const Eigen::MatrixXd jac = transform::jacobian(kinds, u);
      g.assign(free.size(), 0.0);
      for (std::size_t a = 0; a < free.size(); ++a) {
        double acc = 0.0;
        for (std::size_t b = 0; b < grad_theta.size(); ++b)
          acc += jac(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(free[a])) * grad_theta[b];
        g[a] = -acc;
      }
      return -s;
    };
    OptimizerResult r = minimize_bfgs(fn, x0, opt);
    ++used;
    total_iter += r.iterations;
    if (!std::isfinite(r.f)) continue;
    for (std::size_t k = 0; k < free.size(); ++k) u[free[k]] = r.x[k];
    Candidate c{r, u, assemble(u), -r.f};
    const double tie = 1e-12 * std::max(1.0, std::abs(c.score));
    if (!best || c.score > best->score + tie ||
        (std::abs(c.score - best->score) <= tie &&
         lexicographically_less(c.theta.values(), best->theta.values())))
      best = std::move(c);
  }
  if (!best) throw EstimationError("no start produced a finite score (" + to_string(mode) + ")");

  EstimationResult res;
  res.mode = mode;
  res.rule = obj.rule();
  res.scored = obj.count();
  res.converged = best->opt.converged;
  res.iterations = total_iter;
  res.gradient_norm = best->opt.grad_norm;
  res.starts_used = used;
  for (std::size_t i : transform::boundary_coordinates(kinds, best->u))
    if (std::find(free.begin(), free.end(), i) != free.end()) res.boundary.push_back(i);
  ParameterVector theta = best->theta;
  // Weights past the logistic cutoff are reported at the simplex boundary.
  if (kinds.size() == 2 && !res.boundary.empty() && res.boundary.front() == 0)
    theta[0] = best->u[0] > 0.0 ? 1.0 : 0.0;
  res.estimate = theta;
  res.achieved_score = obj.value(theta);
  return res;
}

inline std::vector<std::vector<double>> latin_hypercube_starts(const std::vector<ModelKind>& kinds,
                                                               const std::vector<std::size_t>& free,
                                                               const DataScale& sc, int count,
                                                               std::uint64_t seed, std::size_t dim) {
  RngStream rng = RngStream(seed).split("latin-hypercube", kinds.size() * 131 + free.size());
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(count), std::vector<double>(dim, 0.0));
  for (std::size_t i : free) {
    std::vector<int> perm(static_cast<std::size_t>(count));
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);
    const auto [lo, hi] = start_box(kinds, i, sc);
    for (int s = 0; s < count; ++s)
      pts[static_cast<std::size_t>(s)][i] =
          lo + (perm[static_cast<std::size_t>(s)] + rng.uniform()) / count * (hi - lo);
  }
  return pts;
}

inline void check_length(std::span<const double> y) {
  if (y.size() < kMinEstimationLength)
    throw InvalidArgument("estimation needs at least " + std::to_string(kMinEstimationLength) +
                          " observations, got " + std::to_string(y.size()));
}

inline std::vector<std::size_t> all_indices(std::size_t d) {
  std::vector<std::size_t> v(d);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace detail

/// Score-maximizing fit of one constituent model on its own.
inline EstimationResult estimate_constituent(ModelKind kind, std::span<const double> y, const ScoringRule& rule,
                                             const EstimatorOptions& opt = {}) {
  detail::check_length(y);
  const std::vector<ModelKind> kinds{kind};
  ScoreObjective obj(kinds, rule, y);
  const auto sc = detail::data_scale(y);
  const auto free = detail::all_indices(obj.dim());
  const auto starts = detail::latin_hypercube_starts(kinds, free, sc, opt.starts, opt.seed, obj.dim());
  const ParameterVector base(kinds, std::vector<double>(obj.dim(), 0.0));
  return detail::maximize(obj, base, free, starts, opt.optimizer, EstimationMode::constituent);
}

namespace detail {

inline ParameterVector stack_stage1(const std::vector<EstimationResult>& stage1, const WeightVector& w) {
  std::vector<ConstituentParams> gammas;
  for (const auto& r : stage1) gammas.push_back(r.estimate.constituent(0));
  return ParameterVector::pool(w, gammas);
}

inline std::vector<EstimationResult> run_stage1(const std::vector<ModelKind>& kinds, std::span<const double> y,
                                                const ScoringRule& rule, const EstimatorOptions& opt) {
  std::vector<EstimationResult> out;
  for (std::size_t j = 0; j < kinds.size(); ++j) {
    try {
      out.push_back(estimate_constituent(kinds[j], y, rule, opt));
    } catch (const Error& e) {
      throw EstimationError("stage 1 (constituent " + std::to_string(j + 1) + ", " + to_string(kinds[j]) +
                            "): " + e.what());
    }
  }
  return out;
}

}  // namespace detail

/// Second stage only: weights maximized with the constituent fits frozen.
inline EstimationResult two_stage_from_stage1(std::span<const double> y, const ScoringRule& rule,
                                              const std::vector<EstimationResult>& stage1,
                                              const EstimatorOptions& opt = {}) {
  std::vector<ModelKind> kinds;
  for (const auto& r : stage1) kinds.push_back(r.estimate.constituents().front());
  const std::size_t k = kinds.size();
  const ParameterVector base =
      detail::stack_stage1(stage1, WeightVector(std::vector<double>(k, 1.0 / static_cast<double>(k))));
  ScoreObjective obj(kinds, rule, y);
  std::vector<std::size_t> free(k - 1);
  std::iota(free.begin(), free.end(), 0);
  const auto starts =
      detail::latin_hypercube_starts(kinds, free, detail::data_scale(y), opt.starts, opt.seed, obj.dim());
  EstimationResult res;
  try {
    res = detail::maximize(obj, base, free, starts, opt.optimizer, EstimationMode::two_stage);
  } catch (const Error& e) {
    throw EstimationError(std::string("stage 2 (weights): ") + e.what());
  }
  res.stages = stage1;
  res.converged = res.converged && std::all_of(stage1.begin(), stage1.end(), [](const auto& r) { return r.converged; });
  for (std::size_t j = 0; j < stage1.size(); ++j)
    for (std::size_t i : stage1[j].boundary) res.boundary.push_back(res.estimate.gamma_offset(j) + i);
  return res;
}

/// Stage 1 fits each constituent, stage 2 fits the weights given those fits.
inline EstimationResult estimate_two_stage(std::span<const double> y, const ScoringRule& rule,
                                           const std::vector<ModelKind>& kinds = {ModelKind::ar1, ModelKind::arch1},
                                           const EstimatorOptions& opt = {}) {
  detail::check_length(y);
  require(kinds.size() >= 2, "a pool needs at least 2 constituents");
  return two_stage_from_stage1(y, rule, detail::run_stage1(kinds, y, rule, opt), opt);
}

/// Stage 1 as usual, weights set to `eta` rather than estimated.
inline EstimationResult fixed_weight_from_stage1(std::span<const double> y, const ScoringRule& rule,
                                                 const std::vector<EstimationResult>& stage1,
                                                 const WeightVector& eta) {
  require(eta.size() == stage1.size(), "fixed weight vector has wrong length");
  EstimationResult res;
  res.mode = EstimationMode::two_stage_fixed_weight;
  res.rule = rule;
  res.estimate = detail::stack_stage1(stage1, eta);
  ScoreObjective obj(res.estimate.constituents(), rule, y);
  res.scored = obj.count();
  res.achieved_score = obj.value(res.estimate);
  res.stages = stage1;
  res.converged = std::all_of(stage1.begin(), stage1.end(), [](const auto& r) { return r.converged; });
  for (const auto& r : stage1) {
    res.iterations += r.iterations;
    res.starts_used += r.starts_used;
    res.gradient_norm = std::max(res.gradient_norm, r.gradient_norm);
  }
  for (std::size_t j = 0; j < stage1.size(); ++j)
    for (std::size_t i : stage1[j].boundary) res.boundary.push_back(res.estimate.gamma_offset(j) + i);
  return res;
}

inline EstimationResult estimate_two_stage_fixed_weight(
    std::span<const double> y, const ScoringRule& rule, const WeightVector& eta_star,
    const std::vector<ModelKind>& kinds = {ModelKind::ar1, ModelKind::arch1}, const EstimatorOptions& opt = {}) {
  detail::check_length(y);
  return fixed_weight_from_stage1(y, rule, detail::run_stage1(kinds, y, rule, opt), eta_star);
}

/// Joint maximization over weights and all constituent parameters. The start
/// set is the Latin-hypercube design plus `init` (by default the two-stage fit).
inline EstimationResult estimate_one_stage(std::span<const double> y, const ScoringRule& rule,
                                           std::optional<ParameterVector> init = std::nullopt,
                                           const std::vector<ModelKind>& kinds = {ModelKind::ar1, ModelKind::arch1},
                                           const EstimatorOptions& opt = {}) {
  detail::check_length(y);
  if (!init) init = estimate_two_stage(y, rule, kinds, opt).estimate;
  require(init->constituents() == kinds, "initial value does not match constituent layout");
  ScoreObjective obj(kinds, rule, y);
  const auto free = detail::all_indices(obj.dim());
  auto starts = detail::latin_hypercube_starts(kinds, free, detail::data_scale(y), opt.starts, opt.seed, obj.dim());
  // Keep the warm start strictly inside the simplex so it can be transformed.
  ParameterVector warm = *init;
  constexpr double kInset = 1e-4;
  for (std::size_t k = 0; k < warm.eta_dim(); ++k) warm[k] = std::clamp(warm[k], kInset, 1.0 - kInset);
  for (std::size_t j = 0; j < warm.num_constituents(); ++j)
    if (warm.constituents()[j] == ModelKind::arch1)
      warm[warm.gamma_offset(j) + 2] = std::clamp(warm[warm.gamma_offset(j) + 2], kInset, 1.0 - kInset);
  starts.push_back(transform::to_unconstrained(warm));
  const ParameterVector base(kinds, std::vector<double>(obj.dim(), 0.0));
  return detail::maximize(obj, base, free, starts, opt.optimizer, EstimationMode::one_stage);
}

/// Large-sample stand-in for a limit optimizer.
struct ReferenceOptimum {
  ParameterVector params;
  std::size_t source_sample_size = 0;
  std::string score_kind;
  EstimationResult result;
};

struct ReferenceOptima {
  ReferenceOptimum theta_star;  // two-stage limit
  ReferenceOptimum theta_zero;  // one-stage limit
};

/// Two-stage and one-stage fits on one long simulated realization.
inline ReferenceOptima compute_reference_optima(const ScoringRule& rule, const DgpParams& dgp, std::size_t n_large,
                                                RngStream rng, const EstimatorOptions& opt = {}) {
  require(n_large >= 100000, "reference optima need at least 1e5 draws");
  const ObservedSeries y = simulate_dgp(dgp, n_large, rng);
  const auto two = estimate_two_stage(y.values(), rule, {ModelKind::ar1, ModelKind::arch1}, opt);
  const auto one = estimate_one_stage(y.values(), rule, two.estimate, {ModelKind::ar1, ModelKind::arch1}, opt);
  return {{two.estimate, n_large, rule.id(), two}, {one.estimate, n_large, rule.id(), one}};
}

}  // namespace poolcast
