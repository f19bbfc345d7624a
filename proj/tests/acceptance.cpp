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

// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "poolcast/poolcast.hpp"

namespace {

using namespace poolcast;
namespace fs = std::filesystem;

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int g_failed = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++g_failed;
  std::printf("%s [%d] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// Shared simulation setup

struct Setup {
  DgpParams dgp;
  ScoringRule ls = ScoringRule::log_score();
  ScoringRule cs20;
  std::map<std::string, ReferenceOptima> refs;
};

Setup& setup() {
  static std::optional<Setup> s;
  if (!s) {
    Setup x;
    const RngStream master(kSeed);
    const double q = stationary_quantile(x.dgp, 0.2, 10'000'000, master.split("quantile"));
    x.cs20 = ScoringRule::censored(q, 0.2);
    for (const auto& r : {x.ls, x.cs20})
      x.refs.emplace(r.id(), compute_reference_optima(r, x.dgp, 1'000'000, master.split("reference", r.censored())));
    s = std::move(x);
  }
  return *s;
}

// ---------------------------------------------------------------------------
// 1. DGP moments

Outcome dgp_moments() {
  const auto t0 = std::chrono::steady_clock::now();
  const DgpParams dgp;
  const RngStream master(kSeed);
  const auto y = simulate_dgp(dgp, 1'000'000, master.split("moments")).values();
  const auto m = central_moments(y);
  const double sd = std::sqrt(m.m2);
  std::size_t censored = 0;
  const std::size_t big = 10'000'000;
  RngStream r = master.split("censoring");
  detail::run_dgp(dgp, big, r, [&](double v, double, double, double) {
    if (std::abs(v) >= dgp.censor_bound) ++censored;
  });
  const double frac = static_cast<double>(censored) / static_cast<double>(big);
  const double secs = seconds_since(t0);
  const bool ok = std::abs(m.mean) < 0.01 && sd >= 0.91 && sd <= 0.95 && frac >= 0.0025 && frac <= 0.0045 &&
                  secs < 120.0;
  return {ok, "mean=" + num(m.mean) + " sd=" + num(sd) + " censored=" + num(frac) + " runtime=" + num(secs, 3) + "s"};
}

// ---------------------------------------------------------------------------
// 2-4. Replication harness

struct Harness {
  ReplicationResult result;
  double seconds = 0.0;

  const ScoreSampleSet& get(EstimationMode mode, const std::string& rule, std::size_t n) const {
    for (const auto& s : result.sets)
      if (s.mode == mode && s.in_rule.id() == rule && s.n == n) return s;
    throw Error("harness cell missing: " + to_string(mode) + " " + rule + " n=" + std::to_string(n));
  }
};

const Harness& harness() {
  static std::optional<Harness> h;
  if (!h) {
    Setup& s = setup();
    ReplicationSpec spec;
    spec.dgp = s.dgp;
    spec.modes = {EstimationMode::one_stage, EstimationMode::two_stage, EstimationMode::two_stage_fixed_weight};
    spec.in_rules = {s.ls, s.cs20};
    spec.matched_only = true;
    spec.sample_sizes = {500, 2000};
    spec.replications = 200;
    spec.holdout_length = 5000;
    spec.holdout_source = HoldoutSource::common;
    spec.seed = kSeed;
    for (const auto& [id, ref] : s.refs) spec.eta_star.emplace(id, WeightVector(ref.theta_star.params.weights()));
    const auto t0 = std::chrono::steady_clock::now();
    Harness x;
    x.result = replicate_simulation(spec);
    x.seconds = seconds_since(t0);
    h = std::move(x);
  }
  return *h;
}

bool overlap(const Interval& a, const Interval& b) { return a.lo <= b.hi && b.lo <= a.hi; }

double scaled_var(const ScoreSampleSet& s) { return static_cast<double>(s.n) * central_moments(s.draws).m2; }

Outcome one_stage_ordering() {
  const auto& h = harness();
  bool ok = true;
  std::string d;
  for (const std::string rule : {"ls", "cs20"}) {
    for (std::size_t n : {500, 2000}) {
      const auto& one = h.get(EstimationMode::one_stage, rule, n);
      const auto& two = h.get(EstimationMode::two_stage, rule, n);
      const auto diff = paired_difference(one, two);
      const bool ordered = diff.mean > 0.0;
      const bool excl = n != 2000 || diff.ci.lo > 0.0;
      ok = ok && ordered && excl;
      d += rule + "/n=" + std::to_string(n) + " diff=" + num(diff.mean) + " ci=[" + num(diff.ci.lo) + "," +
           num(diff.ci.hi) + "] ";
    }
  }
  d += "failures=" + std::to_string(h.result.failures.size()) + " runtime=" + num(h.seconds, 4) + "s";
  return {ok, d};
}

Outcome weight_irrelevance() {
  const auto& h = harness();
  bool ok = true;
  std::string d;
  for (const std::string rule : {"ls", "cs20"}) {
    double scaled[2] = {0.0, 0.0};
    int k = 0;
    for (std::size_t n : {500, 2000}) {
      const auto& two = h.get(EstimationMode::two_stage, rule, n);
      const auto& fix = h.get(EstimationMode::two_stage_fixed_weight, rule, n);
      const double diff = central_moments(two.draws).mean - central_moments(fix.draws).mean;
      scaled[k++] = std::sqrt(static_cast<double>(n)) * std::abs(diff);
      if (n == 2000) {
        const bool mo = overlap(mean_ci(two.draws), mean_ci(fix.draws));
        const bool vo = overlap(variance_ci(two.draws), variance_ci(fix.draws));
        ok = ok && mo && vo;
        d += rule + " mean_ci_overlap=" + (mo ? "yes" : "no") + " var_ci_overlap=" + (vo ? "yes" : "no");
      }
    }
    ok = ok && scaled[1] <= scaled[0];
    d += " sqrt(n)|diff| 500=" + num(scaled[0]) + " 2000=" + num(scaled[1]) + "; ";
  }
  return {ok, d};
}

Outcome variance_rates() {
  const auto& h = harness();
  bool ok = true;
  std::string d;
  for (const std::string rule : {"ls", "cs20"}) {
    const double o5 = scaled_var(h.get(EstimationMode::one_stage, rule, 500));
    const double o20 = scaled_var(h.get(EstimationMode::one_stage, rule, 2000));
    const double t5 = scaled_var(h.get(EstimationMode::two_stage, rule, 500));
    const double t20 = scaled_var(h.get(EstimationMode::two_stage, rule, 2000));
    const double ratio = t20 / t5;
    ok = ok && o20 < o5 && ratio <= 2.5 && ratio >= 1.0 / 2.5;
    d += rule + " one n*Var " + num(o5) + "->" + num(o20) + " two n*Var " + num(t5) + "->" + num(t20) + "; ";
  }
  return {ok, d};
}

// ---------------------------------------------------------------------------
// 5. Propriety

Outcome propriety() {
  Setup& s = setup();
  const DgpParams dgp = s.dgp;
  const RngStream master(kSeed);
  const auto path = simulate_dgp_path(dgp, 1'000'000, master.split("propriety"));
  struct Perturbation {
    double ar, arch_const, arch_coef, shift, scale;
  };
  std::vector<Perturbation> g;
  RngStream r = master.split("perturbations");
  for (int i = 0; i < 50; ++i) {
    auto pm = [&](double lo, double hi) { return (r.uniform() < 0.5 ? -1.0 : 1.0) * (lo + (hi - lo) * r.uniform()); };
    g.push_back({dgp.ar * (1.0 + pm(0.0, 0.3)), dgp.arch_const * (1.0 + pm(0.0, 0.3)),
                 std::clamp(dgp.arch_coef * (1.0 + pm(0.0, 0.2)), 0.0, 0.99), pm(0.0, 0.1),
                 std::exp(pm(0.0, 0.15))});
    if (std::abs(g.back().shift) < 0.02 && std::abs(std::log(g.back().scale)) < 0.02) g.back().shift = 0.05;
  }
  bool ok = true;
  std::string d;
  for (const auto& rule : {s.ls, s.cs20}) {
    std::vector<double> truth_sum(g.size(), 0.0), alt_sum(g.size(), 0.0);
    parallel_for(g.size(), [&](std::size_t k) {
      const auto& p = g[k];
      double ts = 0.0, as = 0.0;
      for (std::size_t t = 1; t < path.size(); ++t) {
        const auto f0 = dgp_predictive(dgp, path.x[t - 1], path.v_sq[t - 1], path.z[t - 1]);
        const double v_sq = p.arch_const + p.arch_coef * path.v_sq[t - 1] * path.z[t - 1] * path.z[t - 1];
        const PredictiveDistribution f = CensoredGaussian{p.ar * path.x[t - 1] + p.shift, p.scale * std::sqrt(v_sq),
                                                          -dgp.censor_bound, dgp.censor_bound};
        ts += score(rule, f0, path.y[t]);
        as += score(rule, f, path.y[t]);
      }
      truth_sum[k] = ts;
      alt_sum[k] = as;
    });
    const double count = static_cast<double>(path.size() - 1);
    double min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) min_margin = std::min(min_margin, (truth_sum[k] - alt_sum[k]) / count);
    ok = ok && min_margin > 0.0;
    d += rule.id() + " min margin=" + num(min_margin) + "; ";
  }
  return {ok, d};
}

// ---------------------------------------------------------------------------
// 6. Estimator oracles

Outcome estimator_oracles() {
  Setup& s = setup();
  const RngStream master(kSeed);
  // Two-stage weight vs grid search.
  double worst_eta = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto y = simulate_dgp(s.dgp, 500, master.split("eta_grid", i)).values();
    const auto& rule = i % 2 == 0 ? s.ls : s.cs20;
    const auto fit = estimate_two_stage(y, rule);
    ScoreObjective obj(fit.estimate.constituents(), rule, y);
    const std::size_t steps = 10000;
    std::vector<double> vals(steps + 1);
    parallel_for(steps + 1, [&](std::size_t k) {
      const double eta = static_cast<double>(k) / static_cast<double>(steps);
      vals[k] = obj.value(detail::stack_stage1(fit.stages, WeightVector::two(eta)));
    });
    const auto best = static_cast<std::size_t>(std::max_element(vals.begin(), vals.end()) - vals.begin());
    worst_eta = std::max(worst_eta, std::abs(fit.estimate[0] - static_cast<double>(best) / static_cast<double>(steps)));
  }
  // AR(1) under the log score is Gaussian MLE = OLS.
  double worst_ols = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto y = simulate_dgp(s.dgp, 1000, master.split("ols", i)).values();
    const auto fit = estimate_constituent(ModelKind::ar1, y, s.ls);
    const std::size_t n = y.size() - 1;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd b(n);
    for (std::size_t t = 1; t < y.size(); ++t) {
      x(t - 1, 0) = 1.0;
      x(t - 1, 1) = y[t - 1];
      b(t - 1) = y[t];
    }
    const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(b);
    const double sigma = std::sqrt((b - x * beta).squaredNorm() / static_cast<double>(n));
    const double closed[3] = {beta(0), beta(1), sigma};
    for (int j = 0; j < 3; ++j) worst_ols = std::max(worst_ols, std::abs(fit.estimate[j] - closed[j]));
  }
  // Analytic gradient vs central differences.
  double worst_grad = 0.0;
  const auto y = simulate_dgp(s.dgp, 2000, master.split("gradient")).values();
  RngStream r = master.split("gradient_points");
  const std::vector<ModelKind> kinds{ModelKind::ar1, ModelKind::arch1};
  for (int i = 0; i < 50; ++i) {
    const auto& rule = i % 2 == 0 ? s.ls : s.cs20;
    std::vector<double> u(7);
    for (auto& v : u) v = 2.0 * r.normal() * 0.5;
    u[3] = std::log(0.5 + r.uniform());
    u[5] = std::log(0.2 + r.uniform());
    const ParameterVector theta = transform::from_unconstrained(kinds, u);
    ScoreObjective obj(kinds, rule, y);
    std::vector<double> g;
    obj.value_and_gradient(theta, g);
    double err = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < theta.dim(); ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(theta[j]));
      ParameterVector up = theta, dn = theta;
      up[j] += h;
      dn[j] -= h;
      const double fd = (obj.value(up) - obj.value(dn)) / (2.0 * h);
      err += (g[j] - fd) * (g[j] - fd);
      norm += g[j] * g[j];
    }
    worst_grad = std::max(worst_grad, std::sqrt(err / std::max(norm, 1e-300)));
  }
  const bool ok = worst_eta <= 1e-3 && worst_ols <= 1e-6 && worst_grad <= 1e-5;
  return {ok, "max|eta-grid|=" + num(worst_eta) + " max|ar1-ols|=" + num(worst_ols) +
                  " max grad rel err=" + num(worst_grad)};
}

// ---------------------------------------------------------------------------
// 7. Sandwich oracle

Outcome sandwich_oracle() {
  Setup& s = setup();
  const RngStream master(kSeed);
  const std::size_t n = 2000, reps = 500;
  const auto& ref = s.refs.at("ls");
  std::vector<std::vector<double>> est_one(reps), est_two(reps);
  std::vector<char> bound_one(reps, 0), bound_two(reps, 0);
  parallel_for(reps, [&](std::size_t m) {
    const auto y = simulate_dgp(s.dgp, n, master.split("bootstrap", m)).values();
    const auto two = estimate_two_stage(y, s.ls);
    const auto one = estimate_one_stage(y, s.ls, two.estimate);
    est_two[m] = two.estimate.values();
    est_one[m] = one.estimate.values();
    bound_two[m] = two.at_boundary();
    bound_one[m] = one.at_boundary();
  });
  const auto long_y = simulate_dgp(s.dgp, 200'000, master.split("sandwich_path")).values();
  bool ok = true;
  std::string d;
  auto check = [&](const char* label, MomentMode mode, const ParameterVector& theta,
                   const std::vector<std::vector<double>>& est, const std::vector<char>& bound) {
    const auto sw = sandwich(mode, theta, long_y, s.ls);
    double worst = 1.0;
    std::string ratios;
    for (std::size_t j = 0; j < theta.dim(); ++j) {
      std::vector<double> col(reps);
      for (std::size_t m = 0; m < reps; ++m) col[m] = est[m][j];
      double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(reps);
      double ss = 0.0;
      for (double v : col) ss += (v - mean) * (v - mean);
      const double boot = static_cast<double>(n) * ss / static_cast<double>(reps - 1);
      const double ratio = boot / sw.w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
      worst = std::max(worst, std::max(ratio, 1.0 / ratio));
      ratios += (j ? "," : "") + num(ratio, 3);
    }
    const auto at_bound = std::count(bound.begin(), bound.end(), 1);
    ok = ok && worst <= 1.5;
    d += std::string(label) + " boot/W=[" + ratios + "] boundary fits=" + std::to_string(at_bound) + "; ";
  };
  check("two_stage", MomentMode::two_stage, ref.theta_star.params, est_two, bound_two);
  check("one_stage", MomentMode::one_stage, ref.theta_zero.params, est_one, bound_one);

  // HAC on correctly specified AR(1) scores: the long-run variance is the information matrix.
  const double a0 = 0.2, a1 = 0.6, sigma = 1.3;
  RngStream r = master.split("hac_ar1");
  std::vector<double> y(10'000);
  double prev = a0 / (1.0 - a1);
  for (int b = 0; b < 1000; ++b) prev = a0 + a1 * prev + sigma * r.normal();
  for (auto& v : y) v = prev = a0 + a1 * prev + sigma * r.normal();
  const ParameterVector theta = ParameterVector::single(Ar1Params{a0, a1, sigma});
  const auto lrv = long_run_variance(ScoreObjective({ModelKind::ar1}, s.ls, y).contributions(theta));
  const double mu = a0 / (1.0 - a1);
  const double ey2 = mu * mu + sigma * sigma / (1.0 - a1 * a1);
  Eigen::Matrix3d closed;
  closed << 1.0, mu, 0.0, mu, ey2, 0.0, 0.0, 0.0, 2.0;
  closed /= sigma * sigma;
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double scale = closed(i, j) != 0.0 ? std::abs(closed(i, j)) : std::sqrt(closed(i, i) * closed(j, j));
      worst = std::max(worst, std::abs(lrv.v(i, j) - closed(i, j)) / scale);
    }
  ok = ok && worst <= 0.2;
  d += "HAC AR(1) max rel err=" + num(worst);
  return {ok, d};
}

// ---------------------------------------------------------------------------
// 8. Percentile intervals

Outcome percentile_machinery() {
  const RngStream master(kSeed);
  std::vector<double> draws(20000);
  std::iota(draws.begin(), draws.end(), 1.0);
  RngStream r = master.split("shuffle");
  for (std::size_t i = draws.size() - 1; i > 0; --i) std::swap(draws[i], draws[r.below(i + 1)]);
  const auto ci = percentile_ci(draws, 0.95);
  const bool ranks = ci.lo == 500.0 && ci.hi == 19500.0;

  RngStream r_cov = master.split("coverage_cov");
  Eigen::MatrixXd a(4, 4);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = r_cov.normal();
  const Eigen::MatrixXd cov = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(4, 4);
  const Eigen::MatrixXd factor = covariance_factor(cov);
  const Eigen::VectorXd truth = Eigen::Vector4d(0.3, -1.0, 2.0, 0.5);
  const Eigen::VectorXd weights = Eigen::Vector4d(1.0, 0.5, -0.25, 2.0);
  const std::size_t trials = 1000;
  std::vector<char> covered(trials, 0);
  parallel_for(trials, [&](std::size_t k) {
    RngStream t = master.split("coverage", k);
    const Eigen::VectorXd est = gaussian_draw(truth, factor, t);
    std::vector<double> f(2000);
    for (auto& v : f) v = weights.dot(gaussian_draw(est, factor, t));
    covered[k] = percentile_ci(f, 0.95).contains(weights.dot(truth));
  });
  const double coverage = static_cast<double>(std::count(covered.begin(), covered.end(), 1)) / trials;
  const bool ok = ranks && std::abs(coverage - 0.95) <= 0.03;
  return {ok, "ranks=[" + num(ci.lo, 6) + "," + num(ci.hi, 6) + "] coverage=" + num(coverage)};
}

// ---------------------------------------------------------------------------
// 9. Empirical pipeline

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("poolcast-acceptance-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string empirical_config(std::size_t draws) {
  return R"({
  "schema_version": 1,
  "seed": 20240611,
  "empirical": {
    "data": ")" + (fs::path(POOLCAST_SOURCE_DIR) / "data" / "synthetic_returns.csv").string() + R"(",
    "in_sample": 7306,
    "holdout": 1259,
    "modes": ["two_stage", "one_stage"],
    "in_rules": ["ls", "cs10", "cs20"],
    "eval_rules": ["ls", "cs10", "cs20"],
    "n_draws": )" + std::to_string(draws) + R"(
  }
}
)";
}

Outcome empirical_pipeline() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = scratch("empirical");
  write_file(dir / "config.json", empirical_config(2000));
  cli::Overrides ov;
  ov.out = (dir / "out").string();
  const int rc = cli::run("empirical", dir / "config.json", ov, {});
  const double secs = seconds_since(t0);
  if (rc != 0) return {false, "exit code " + std::to_string(rc)};
  const auto rows = read_csv_rows(dir / "out" / "table.csv");
  bool ok = rows.size() == 7;
  std::size_t finite = 0, ordered = 0, cells = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ok = ok && rows[i].size() == 11;
    for (std::size_t c = 2; c + 2 < rows[i].size(); c += 3) {
      ++cells;
      char* end = nullptr;
      const double avg = std::strtod(rows[i][c].c_str(), &end);
      const double lo = std::strtod(rows[i][c + 1].c_str(), nullptr);
      const double hi = std::strtod(rows[i][c + 2].c_str(), nullptr);
      const bool fin = !rows[i][c].empty() && !rows[i][c + 1].empty() && !rows[i][c + 2].empty() &&
                       std::isfinite(avg) && std::isfinite(lo) && std::isfinite(hi);
      finite += fin;
      ordered += fin && lo <= hi;
    }
  }
  ok = ok && cells == 18 && finite == 18 && ordered == 18 && secs < 1800.0;
  return {ok, std::to_string(rows.empty() ? 0 : rows.size() - 1) + " rows, " + std::to_string(finite) + "/18 finite, " +
                  std::to_string(ordered) + "/18 ordered CIs, runtime=" + num(secs, 4) + "s"};
}

// ---------------------------------------------------------------------------
// 10. Determinism

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), dir).generic_string()] = ss.str();
  }
  return files;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(POOLCAST_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

Outcome determinism() {
  const fs::path dir = scratch("determinism");
  write_file(dir / "replicate.json", R"({
  "schema_version": 1,
  "seed": 77,
  "reference": {"n_large": 100000, "quantile_draws": 1000000, "s_dgp_draws": 100000},
  "replicate": {
    "modes": ["one_stage", "two_stage", "two_stage_fixed_weight"],
    "in_rules": ["ls", "cs20"],
    "eval_rules": ["ls", "cs20"],
    "sample_sizes": [300, 600],
    "replications": 8,
    "holdout": {"length": 2000, "source": "common"}
  }
}
)");
  write_file(dir / "empirical.json", empirical_config(200));
  const fs::path out = dir / "out";
  std::string d;
  bool ok = true;
  for (const std::string cmd : {"replicate", "empirical"}) {
    std::vector<std::map<std::string, std::string>> snaps;
    // Fresh caches at 1 and 3 threads, then a cache hit at 3 threads.
    const std::vector<std::pair<int, bool>> runs{{1, true}, {3, true}, {3, false}};
    for (const auto& [threads, fresh_cache] : runs) {
      fs::remove_all(out);
      if (fresh_cache) fs::remove_all(dir / "cache");
      std::string cfg = (dir / (cmd + ".json")).string();
      std::ifstream in(cfg);
      std::stringstream ss;
      ss << in.rdbuf();
      std::string text = ss.str();
      text.insert(text.find('{') + 1, "\n  \"cache_dir\": \"" + (dir / "cache").string() + "\",");
      const std::string run_cfg = (dir / (cmd + "-run.json")).string();
      write_file(run_cfg, text);
      const int rc = run_cli(cmd + " --config " + run_cfg + " --out " + out.string() + " --threads " +
                             std::to_string(threads));
      if (rc != 0) return {false, cmd + " exited with " + std::to_string(rc)};
      snaps.push_back(snapshot(out));
    }
    std::size_t differing = 0;
    for (std::size_t k = 1; k < snaps.size(); ++k)
      for (const auto& [name, content] : snaps[0]) {
        auto it = snaps[k].find(name);
        if (it == snaps[k].end() || it->second != content) {
          ++differing;
          d += "[" + cmd + " run " + std::to_string(k) + " differs: " + name + "] ";
        }
      }
    const bool same = differing == 0 && snaps[0].size() == snaps[1].size() && snaps[0].size() == snaps[2].size();
    ok = ok && same;
    d += cmd + ": " + std::to_string(snaps[0].size()) + " files " + (same ? "identical" : "differ") + "; ";
  }
  return {ok, d};
}

}  // namespace

int main() {
  std::printf("poolcast acceptance suite (seed %llu, %d threads)\n", static_cast<unsigned long long>(kSeed),
              thread_count());
  const auto t0 = std::chrono::steady_clock::now();
  try {
    setup();
    std::printf("setup: cs20 threshold %s, reference optima at n=1e6 (%.1fs)\n", num(setup().cs20.threshold).c_str(),
                seconds_since(t0));
  } catch (const std::exception& e) {
    std::printf("setup failed: %s\n", e.what());
  }
  criterion(1, "DGP moments", dgp_moments);
  criterion(5, "propriety", propriety);
  criterion(8, "percentile intervals", percentile_machinery);
  criterion(6, "estimator oracles", estimator_oracles);
  criterion(2, "one-stage beats two-stage", one_stage_ordering);
  criterion(3, "first-stage weights irrelevant", weight_irrelevance);
  criterion(4, "variance rates", variance_rates);
  criterion(7, "sandwich oracle", sandwich_oracle);
  criterion(9, "empirical pipeline", empirical_pipeline);
  criterion(10, "determinism", determinism);
  std::printf("%d criteria failed\n", g_failed);
  return g_failed == 0 ? 0 : 1;
}
