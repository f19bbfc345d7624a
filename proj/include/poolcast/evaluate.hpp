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

// Out-of-sample performance of estimated pools, the Monte Carlo replication
// harness and the parameter-uncertainty harness (Gaussian draws, KDE,
// percentile intervals).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "poolcast/common.hpp"
#include "poolcast/estimate.hpp"
#include "poolcast/models.hpp"
#include "poolcast/objective.hpp"
#include "poolcast/parallel.hpp"
#include "poolcast/pool.hpp"
#include "poolcast/rng.hpp"
#include "poolcast/scoring.hpp"

namespace poolcast {

using LogFn = std::function<void(const std::string&)>;

/// Average eval-rule score of the theta-pool over `holdout`; y[t-1] conditions y[t].
inline double out_of_sample_score(const ParameterVector& theta, std::span<const double> y, IndexRange holdout,
                                  const ScoringRule& rule) {
  ScoreObjective obj(theta.constituents(), rule, y, holdout);
  const double s = obj.value(theta);
  if (!std::isfinite(s)) {
    const std::size_t t = obj.first_failure(theta);
    throw ScoringFailure(t, "out-of-sample score is -inf or NaN");
  }
  return s;
}

/// Mean score of the true one-step predictives along a simulated path of n_eval points.
inline double s_dgp(const DgpParams& dgp, const ScoringRule& rule, std::size_t n_eval, RngStream rng) {
  require(n_eval >= 100000, "S_DGP needs at least 1e5 evaluation points");
  const DgpPath path = simulate_dgp_path(dgp, n_eval + 1, rng);
  const double sum = chunked_reduce(
      n_eval, 0.0,
      [&](std::size_t b, std::size_t e, double& acc) {
        for (std::size_t i = b; i < e; ++i) {
          const std::size_t t = i + 1;
          const auto f = dgp_predictive(dgp, path.x[t - 1], path.v_sq[t - 1], path.z[t - 1]);
          acc += checked_score(rule, f, path.y[t], t);
        }
      },
      [](double& total, double part) { total += part; });
  return sum / static_cast<double>(n_eval);
}

enum class DrawSource { monte_carlo_replication, parameter_gaussian };

inline std::string to_string(DrawSource s) {
  return s == DrawSource::monte_carlo_replication ? "monte_carlo_replication" : "parameter_gaussian";
}

struct ScoreSampleSet {
  std::vector<double> draws;
  std::vector<std::size_t> replications;  // replication (or draw) index of each value
  DrawSource source = DrawSource::monte_carlo_replication;
  EstimationMode mode = EstimationMode::two_stage;
  ScoringRule in_rule{};
  ScoringRule eval_rule{};
  std::size_t n = 0;
  std::optional<double> point;  // S0 at the point estimate

  void validate() const {
    require(draws.size() >= 2, "a score sample needs at least 2 draws");
    require(replications.empty() || replications.size() == draws.size(), "replication index length mismatch");
    for (double d : draws) require(std::isfinite(d), "score draws must be finite");
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

inline constexpr double kZ975 = 1.959963984540054;
inline constexpr std::size_t kMinDrawsForCi = 30;

struct DivergenceSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // 1/M normalization
  double scaled_variance = 0.0;
  std::optional<Interval> ci_mean;
  std::optional<Interval> ci_variance;
  double s_dgp = 0.0;
  double expected_divergence = 0.0;
};

struct Moments {
  double mean = 0.0;
  double m2 = 0.0;
  double m4 = 0.0;
};

inline Moments central_moments(std::span<const double> x) {
  require(!x.empty(), "moments of an empty sample");
  Moments m;
  // Shift by the first value so constant samples give exactly zero spread.
  double shift = 0.0;
  for (double v : x) shift += v - x[0];
  m.mean = x[0] + shift / static_cast<double>(x.size());
  for (double v : x) {
    const double d = (v - m.mean) * (v - m.mean);
    m.m2 += d;
    m.m4 += d * d;
  }
  m.m2 /= static_cast<double>(x.size());
  m.m4 /= static_cast<double>(x.size());
  return m;
}

/// Normal-approximation CI for a mean (s / sqrt(M)).
inline Interval mean_ci(std::span<const double> x) {
  const auto m = central_moments(x);
  const double se = std::sqrt(m.m2 / static_cast<double>(x.size()));
  return {m.mean - kZ975 * se, m.mean + kZ975 * se};
}

/// Normal-approximation CI for the variance with standard error sqrt((m4 - m2^2) / M).
inline Interval variance_ci(std::span<const double> x) {
  const auto m = central_moments(x);
  const double se = std::sqrt(std::max(0.0, m.m4 - m.m2 * m.m2) / static_cast<double>(x.size()));
  return {std::max(0.0, m.m2 - kZ975 * se), m.m2 + kZ975 * se};
}

inline DivergenceSummary summarize(const ScoreSampleSet& set, double s_dgp_value) {
  set.validate();
  const auto m = central_moments(set.draws);
  DivergenceSummary s;
  s.count = set.draws.size();
  s.mean = m.mean;
  s.variance = m.m2;
  s.scaled_variance = static_cast<double>(set.n) * m.m2;
  if (s.count >= kMinDrawsForCi) {
    s.ci_mean = mean_ci(set.draws);
    s.ci_variance = variance_ci(set.draws);
  }
  s.s_dgp = s_dgp_value;
  s.expected_divergence = s_dgp_value - m.mean;
  return s;
}

/// Mean of a - b over replications present in both sets, with its normal CI.
struct PairedDifference {
  std::size_t count = 0;
  double mean = 0.0;
  Interval ci;
};

inline PairedDifference paired_difference(const ScoreSampleSet& a, const ScoreSampleSet& b) {
  require(a.replications.size() == a.draws.size() && b.replications.size() == b.draws.size(),
          "paired difference needs replication indices");
  std::map<std::size_t, double> rhs;
  for (std::size_t i = 0; i < b.draws.size(); ++i) rhs[b.replications[i]] = b.draws[i];
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.draws.size(); ++i)
    if (auto it = rhs.find(a.replications[i]); it != rhs.end()) diff.push_back(a.draws[i] - it->second);
  require(diff.size() >= 2, "paired difference needs at least 2 common replications");
  PairedDifference out;
  out.count = diff.size();
  out.mean = central_moments(diff).mean;
  out.ci = mean_ci(diff);
  return out;
}

/// Efron percentile interval: order statistics at ranks ceil(a/2 N) and
/// ceil((1 - a/2) N), a = 1 - level.
inline Interval percentile_ci(std::vector<double> draws, double level) {
  require(draws.size() >= 2, "percentile interval needs at least 2 draws");
  require(level > 0.0 && level <= 1.0, "level must lie in (0, 1]");
  const double n = static_cast<double>(draws.size());
  const double alpha = 1.0 - level;
  auto rank = [&](double r) {
    const auto k = static_cast<std::size_t>(std::ceil(r * n - 1e-9));
    return std::clamp<std::size_t>(k, 1, draws.size()) - 1;
  };
  std::sort(draws.begin(), draws.end());
  return {draws[rank(alpha / 2.0)], draws[rank(1.0 - alpha / 2.0)]};
}

struct KdeCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  bool degenerate = false;  // zero-variance draws: the curve is a narrow spike
};

inline double silverman_bandwidth(std::span<const double> draws) {
  std::vector<double> x(draws.begin(), draws.end());
  const auto m = central_moments(x);
  const double n = static_cast<double>(x.size());
  const double sd = std::sqrt(m.m2 * n / (n - 1.0));
  std::sort(x.begin(), x.end());
  auto q = [&](double p) {
    const double pos = p * (n - 1.0);
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    return i + 1 < x.size() ? x[i] * (1.0 - f) + x[i + 1] * f : x[i];
  };
  const double iqr = q(0.75) - q(0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

/// Evenly spaced grid covering the draws plus `pad` bandwidths on each side.
inline std::vector<double> kde_grid(std::span<const double> draws, std::size_t points = 512, double pad = 5.0) {
  require(points >= 2 && !draws.empty(), "grid needs draws and at least 2 points");
  const auto [lo_it, hi_it] = std::minmax_element(draws.begin(), draws.end());
  double h = silverman_bandwidth(draws);
  if (!(h > 0.0)) h = std::max(1e-8, 1e-8 * std::abs(*lo_it));
  const double lo = *lo_it - pad * h;
  const double hi = *hi_it + pad * h;
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

/// Gaussian-kernel density estimate with Silverman's rule-of-thumb bandwidth.
inline KdeCurve kde(std::span<const double> draws, std::span<const double> grid, const LogFn& warn = {}) {
  require(draws.size() >= 10, "KDE needs at least 10 draws");
  KdeCurve c;
  c.grid.assign(grid.begin(), grid.end());
  c.bandwidth = silverman_bandwidth(draws);
  if (!(c.bandwidth > 0.0)) {
    c.degenerate = true;
    c.bandwidth = std::max(1e-8, 1e-8 * std::abs(draws[0]));
    if (warn) warn("KDE: draws have zero variance, density is a degenerate spike");
  }
  const double h = c.bandwidth;
  const double norm = 1.0 / (static_cast<double>(draws.size()) * h * std::sqrt(2.0 * kPi));
  c.density.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double s = 0.0;
    for (double d : draws) {
      const double z = (grid[i] - d) / h;
      s += std::exp(-0.5 * z * z);
    }
    c.density[i] = s * norm;
  }
  return c;
}

/// Matrix L with L L' = cov, from the eigen-decomposition (negative
/// eigenvalues of a nearly PSD matrix are set to zero).
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
  require(cov.rows() == cov.cols(), "covariance must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  require(ev.minCoeff() >= -1e-10 * scale, "covariance is not positive semidefinite");
  return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

inline Eigen::VectorXd gaussian_draw(const Eigen::VectorXd& mean, const Eigen::MatrixXd& factor, RngStream& rng) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean + factor * z;
}

struct ParameterDrawResult {
  std::vector<ScoreSampleSet> sets;  // one per eval rule
  std::size_t rejected = 0;          // constraint-violating draws that were redrawn
};

/// Draws theta^(i) ~ N(theta_hat, cov) (cov is W/n), redrawing any that
/// violate the parameter constraints, and scores each on the fixed holdout.
inline ParameterDrawResult parameter_sampling_distribution(const ParameterVector& theta_hat,
                                                           const Eigen::MatrixXd& cov, std::span<const double> y,
                                                           IndexRange holdout,
                                                           const std::vector<ScoringRule>& eval_rules,
                                                           std::size_t n_draws, RngStream rng) {
  require(n_draws >= 100, "need at least 100 parameter draws");
  require(static_cast<std::size_t>(cov.rows()) == theta_hat.dim(), "covariance dimension mismatch");
  const Eigen::MatrixXd factor = covariance_factor(cov);
  const Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(theta_hat.values().data(),
                                                                 static_cast<Eigen::Index>(theta_hat.dim()));
  const std::size_t max_rejections = n_draws / 10;
  const auto& kinds = theta_hat.constituents();

  std::vector<std::vector<double>> scores(eval_rules.size(), std::vector<double>(n_draws));
  std::vector<std::size_t> rejected(n_draws, 0);
  parallel_for(n_draws, [&](std::size_t i) {
    RngStream r = rng.split("parameter_draw", i);
    for (;;) {
      const Eigen::VectorXd d = gaussian_draw(mean, factor, r);
      ParameterVector theta(kinds, std::vector<double>(d.data(), d.data() + d.size()));
      if (!theta.valid()) {
        if (++rejected[i] > max_rejections) throw Error("parameter draws: too many invalid draws");
        continue;
      }
      for (std::size_t k = 0; k < eval_rules.size(); ++k)
        scores[k][i] = out_of_sample_score(theta, y, holdout, eval_rules[k]);
      return;
    }
  });
  ParameterDrawResult out;
  for (std::size_t r : rejected) out.rejected += r;
  if (out.rejected > max_rejections)
    throw Error("parameter draws: " + std::to_string(out.rejected) + " invalid draws out of " +
                std::to_string(n_draws) + " exceed the 10% limit (estimate near the constraint boundary)");
  for (std::size_t k = 0; k < eval_rules.size(); ++k) {
    ScoreSampleSet s;
    s.draws = std::move(scores[k]);
    s.replications.resize(n_draws);
    for (std::size_t i = 0; i < n_draws; ++i) s.replications[i] = i;
    s.source = DrawSource::parameter_gaussian;
    s.eval_rule = eval_rules[k];
    s.point = out_of_sample_score(theta_hat, y, holdout, eval_rules[k]);
    out.sets.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo replication harness

/// Where the holdout of replication m comes from.
enum class HoldoutSource {
  path_tail,  // final points of the replication's own simulated path
  common,     // one evaluation path shared by all replications
};

struct ReplicationSpec {
  DgpParams dgp;
  std::vector<EstimationMode> modes{EstimationMode::one_stage, EstimationMode::two_stage};
  std::vector<ScoringRule> in_rules;
  std::vector<ScoringRule> eval_rules;
  bool matched_only = false;  // score each estimate only with its own in-sample rule
  std::vector<std::size_t> sample_sizes{500, 2000};
  std::size_t replications = 200;
  std::size_t path_length = 0;          // 0: max n + max holdout
  std::size_t holdout_multiplier = 0;   // holdout = multiplier * n when > 0
  std::size_t holdout_length = 5000;    // otherwise a fixed length
  HoldoutSource holdout_source = HoldoutSource::path_tail;
  std::uint64_t seed = 0;
  EstimatorOptions estimator{};
  std::map<std::string, WeightVector> eta_star;  // by in-rule id, for the fixed-weight mode
  double max_failure_fraction = 0.05;

  std::size_t holdout_for(std::size_t n) const { return holdout_multiplier > 0 ? holdout_multiplier * n : holdout_length; }

  std::size_t max_holdout() const {
    std::size_t h = 0;
    for (auto n : sample_sizes) h = std::max(h, holdout_for(n));
    return h;
  }

  std::size_t max_n() const { return sample_sizes.empty() ? 0 : *std::max_element(sample_sizes.begin(), sample_sizes.end()); }

  std::size_t effective_path_length() const {
    if (path_length > 0) return path_length;
    return holdout_source == HoldoutSource::path_tail ? max_n() + max_holdout() : max_n();
  }

  void validate() const {
    require(!modes.empty() && !in_rules.empty() && !sample_sizes.empty(), "harness needs modes, rules and sizes");
    for (auto m : modes)
      require(m == EstimationMode::one_stage || m == EstimationMode::two_stage ||
                  m == EstimationMode::two_stage_fixed_weight,
              "harness modes must be one_stage, two_stage or two_stage_fixed_weight");
    require(matched_only || !eval_rules.empty(), "harness needs eval rules");
    require(replications >= 1, "need at least one replication");
    for (auto n : sample_sizes) require(n >= kMinEstimationLength, "sample size too small");
    const std::size_t len = effective_path_length();
    require(len >= max_n(), "path shorter than the largest sample size");
    if (holdout_source == HoldoutSource::path_tail)
      for (auto n : sample_sizes)
        require(n + holdout_for(n) <= len, "holdout overlaps the estimation sample for n = " + std::to_string(n));
    if (std::find(modes.begin(), modes.end(), EstimationMode::two_stage_fixed_weight) != modes.end())
      for (const auto& r : in_rules)
        require(eta_star.count(r.id()) == 1, "fixed-weight mode needs eta* for rule " + r.id());
    dgp.validate();
  }
};

struct ReplicationFailure {
  std::size_t replication = 0;
  std::size_t n = 0;
  std::string in_rule;
  std::string mode;
  std::string message;
};

struct ReplicationResult {
  std::vector<ScoreSampleSet> sets;  // ordered by mode, in_rule, eval_rule, n
  std::vector<ReplicationFailure> failures;
  std::size_t attempted = 0;
  std::size_t nonconverged = 0;
};

namespace detail {

struct CellResult {
  bool ok = false;
  bool converged = true;
  std::vector<double> scores;  // per eval rule
  std::string message;
};

}  // namespace detail

/// Runs every replication: simulate, estimate each mode/rule on the first n
/// points, score on the holdout. Cells that fail are dropped and reported.
inline ReplicationResult replicate_simulation(const ReplicationSpec& spec, const LogFn& log = {}) {
  spec.validate();
  const RngStream master(spec.seed);
  const std::size_t path_len = spec.effective_path_length();
  const std::size_t n_modes = spec.modes.size();
  const std::size_t n_in = spec.in_rules.size();
  const std::size_t n_sizes = spec.sample_sizes.size();

  auto eval_rules_for = [&](std::size_t r) {
    return spec.matched_only ? std::vector<ScoringRule>{spec.in_rules[r]} : spec.eval_rules;
  };

  std::vector<double> common;
  if (spec.holdout_source == HoldoutSource::common)
    common = simulate_dgp(spec.dgp, spec.max_holdout() + 1, master.split("holdout")).values();

  // cells[m][(mode * n_in + in) * n_sizes + size]
  const std::size_t per_rep = n_modes * n_in * n_sizes;
  std::vector<std::vector<detail::CellResult>> cells(spec.replications, std::vector<detail::CellResult>(per_rep));
  std::mutex log_mu;
  std::size_t done = 0;

  parallel_for(spec.replications, [&](std::size_t m) {
    const std::vector<double> path = simulate_dgp(spec.dgp, path_len, master.split("replicate", m)).values();
    for (std::size_t si = 0; si < n_sizes; ++si) {
      const std::size_t n = spec.sample_sizes[si];
      const std::span<const double> sample(path.data(), n);
      const std::size_t h = spec.holdout_for(n);
      std::span<const double> eval_y;
      IndexRange holdout;
      if (spec.holdout_source == HoldoutSource::path_tail) {
        eval_y = std::span<const double>(path);
        holdout = {path.size() - h, path.size()};
      } else {
        eval_y = std::span<const double>(common);
        holdout = {common.size() - h, common.size()};
      }
      for (std::size_t ri = 0; ri < n_in; ++ri) {
        const ScoringRule& rule = spec.in_rules[ri];
        const auto evals = eval_rules_for(ri);
        std::optional<std::vector<EstimationResult>> stage1;
        std::optional<EstimationResult> two;
        auto get_stage1 = [&]() -> const std::vector<EstimationResult>& {
          if (!stage1) stage1 = detail::run_stage1({ModelKind::ar1, ModelKind::arch1}, sample, rule, spec.estimator);
          return *stage1;
        };
        auto get_two = [&]() -> const EstimationResult& {
          if (!two) two = two_stage_from_stage1(sample, rule, get_stage1(), spec.estimator);
          return *two;
        };
        for (std::size_t mi = 0; mi < n_modes; ++mi) {
          auto& cell = cells[m][(mi * n_in + ri) * n_sizes + si];
          try {
            EstimationResult est;
            switch (spec.modes[mi]) {
              case EstimationMode::two_stage:
                est = get_two();
                break;
              case EstimationMode::two_stage_fixed_weight:
                est = fixed_weight_from_stage1(sample, rule, get_stage1(), spec.eta_star.at(rule.id()));
                break;
              case EstimationMode::one_stage:
                est = estimate_one_stage(sample, rule, get_two().estimate, {ModelKind::ar1, ModelKind::arch1},
                                         spec.estimator);
                break;
              default:
                throw InvalidArgument("unsupported harness mode");
            }
            cell.converged = est.converged;
            for (const auto& er : evals) cell.scores.push_back(out_of_sample_score(est.estimate, eval_y, holdout, er));
            cell.ok = true;
          } catch (const Error& e) {
            cell.ok = false;
            cell.scores.clear();
            cell.message = e.what();
          }
        }
      }
    }
    if (log) {
      std::lock_guard lock(log_mu);
      ++done;
      if (done % 10 == 0 || done == spec.replications)
        log("replications done: " + std::to_string(done) + "/" + std::to_string(spec.replications));
    }
  });

  ReplicationResult out;
  out.attempted = spec.replications * per_rep;
  for (std::size_t mi = 0; mi < n_modes; ++mi) {
    for (std::size_t ri = 0; ri < n_in; ++ri) {
      const auto evals = eval_rules_for(ri);
      for (std::size_t ei = 0; ei < evals.size(); ++ei) {
        for (std::size_t si = 0; si < n_sizes; ++si) {
          ScoreSampleSet s;
          s.source = DrawSource::monte_carlo_replication;
          s.mode = spec.modes[mi];
          s.in_rule = spec.in_rules[ri];
          s.eval_rule = evals[ei];
          s.n = spec.sample_sizes[si];
          for (std::size_t m = 0; m < spec.replications; ++m) {
            const auto& cell = cells[m][(mi * n_in + ri) * n_sizes + si];
            if (!cell.ok) continue;
            s.draws.push_back(cell.scores[ei]);
            s.replications.push_back(m);
          }
          out.sets.push_back(std::move(s));
        }
      }
    }
  }
  for (std::size_t m = 0; m < spec.replications; ++m) {
    for (std::size_t mi = 0; mi < n_modes; ++mi)
      for (std::size_t ri = 0; ri < n_in; ++ri)
        for (std::size_t si = 0; si < n_sizes; ++si) {
          const auto& cell = cells[m][(mi * n_in + ri) * n_sizes + si];
          if (!cell.ok) {
            out.failures.push_back(
                {m, spec.sample_sizes[si], spec.in_rules[ri].id(), to_string(spec.modes[mi]), cell.message});
          } else if (!cell.converged) {
            ++out.nonconverged;
          }
        }
  }
  if (static_cast<double>(out.failures.size()) > spec.max_failure_fraction * static_cast<double>(out.attempted))
    throw Error("replication harness: " + std::to_string(out.failures.size()) + " of " +
                std::to_string(out.attempted) + " estimation cells failed (limit " +
                format_double(100.0 * spec.max_failure_fraction) + "%); first: " + out.failures.front().message);
  return out;
}

}  // namespace poolcast
