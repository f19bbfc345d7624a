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

// Batch pipelines behind the `poolcast` command: configuration, the result
// cache, and the replicate / empirical / reference / score commands.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "poolcast/asymptotics.hpp"
#include "poolcast/common.hpp"
#include "poolcast/estimate.hpp"
#include "poolcast/evaluate.hpp"
#include "poolcast/models.hpp"
#include "poolcast/parallel.hpp"
#include "poolcast/rng.hpp"
#include "poolcast/scoring.hpp"
#include "poolcast/serialize.hpp"
#include "poolcast/series.hpp"

namespace poolcast::cli {

namespace fs = std::filesystem;

inline constexpr const char* kOutDirEnv = "POOLCAST_OUT";
inline constexpr const char* kDefaultOutDir = "poolcast-out";

struct Overrides {
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool dry_run = false;
};

// ---------------------------------------------------------------------------
// Configuration

/// Rule as written in a config: "ls", "cs<percent>" or an object
/// {"type": "cs", "p": 0.2} / {"type": "cs", "threshold": -1.1}.
struct RuleSpec {
  bool censored = false;
  double p = 0.0;
  std::optional<double> threshold;

  std::string id() const {
    if (!censored) return "ls";
    if (threshold) return ScoringRule::censored(*threshold).id();
    return ScoringRule::censored(0.0, p).id();
  }
};

inline RuleSpec parse_rule(const Json& j) {
  RuleSpec r;
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "ls") return r;
    if (s.rfind("cs", 0) == 0 && s.size() > 2) {
      const auto pct = detail::parse_double(std::string_view(s).substr(2));
      require(pct && *pct > 0.0 && *pct < 100.0, "bad censored rule '" + s + "'");
      r.censored = true;
      r.p = *pct / 100.0;
      return r;
    }
    throw InvalidArgument("unknown scoring rule '" + s + "' (expected ls or cs<percent>)");
  }
  require(j.is_object(), "scoring rule must be a string or an object");
  const std::string type = j.at("type").get<std::string>();
  if (type == "ls") return r;
  require(type == "cs", "unknown scoring rule type '" + type + "'");
  r.censored = true;
  if (j.contains("threshold")) {
    r.threshold = j.at("threshold").get<double>();
  } else {
    r.p = j.at("p").get<double>();
    require(r.p > 0.0 && r.p < 1.0, "censoring probability must lie in (0, 1)");
  }
  return r;
}

inline std::vector<RuleSpec> parse_rules(const Json& arr) {
  require(arr.is_array() && !arr.empty(), "rule list must be a non-empty array");
  std::vector<RuleSpec> out;
  for (const auto& j : arr) out.push_back(parse_rule(j));
  return out;
}

inline DgpParams parse_dgp(const Json& cfg) {
  DgpParams p;
  if (cfg.contains("dgp")) {
    const auto& j = cfg.at("dgp");
    p.ar = j.value("ar", p.ar);
    p.arch_const = j.value("arch_const", p.arch_const);
    p.arch_coef = j.value("arch_coef", p.arch_coef);
    p.censor_bound = j.value("censor_bound", p.censor_bound);
    p.burn_in = j.value("burn_in", p.burn_in);
  }
  p.validate();
  return p;
}

inline Json dgp_json(const DgpParams& p) {
  return Json{{"ar", p.ar},
              {"arch_const", p.arch_const},
              {"arch_coef", p.arch_coef},
              {"censor_bound", p.censor_bound},
              {"burn_in", p.burn_in}};
}

inline EstimatorOptions parse_estimator(const Json& cfg, std::uint64_t seed) {
  EstimatorOptions o;
  o.seed = detail::splitmix64(seed ^ fnv1a64("start_design"));
  if (cfg.contains("estimator")) {
    const auto& j = cfg.at("estimator");
    o.starts = j.value("starts", o.starts);
    o.optimizer.max_iter = j.value("max_iter", o.optimizer.max_iter);
    o.optimizer.grad_tol = j.value("grad_tol", o.optimizer.grad_tol);
  }
  require(o.starts >= 1, "estimator.starts must be >= 1");
  require(o.optimizer.max_iter >= 1, "estimator.max_iter must be >= 1");
  return o;
}

inline Json estimator_json(const EstimatorOptions& o) {
  return Json{{"starts", o.starts}, {"max_iter", o.optimizer.max_iter}, {"grad_tol", o.optimizer.grad_tol}};
}

struct ReferenceSettings {
  std::size_t n_large = 1000000;
  std::size_t quantile_draws = 10000000;
  std::size_t s_dgp_draws = 1000000;
};

inline ReferenceSettings parse_reference(const Json& cfg) {
  ReferenceSettings r;
  if (cfg.contains("reference")) {
    const auto& j = cfg.at("reference");
    r.n_large = j.value("n_large", r.n_large);
    r.quantile_draws = j.value("quantile_draws", r.quantile_draws);
    r.s_dgp_draws = j.value("s_dgp_draws", r.s_dgp_draws);
  }
  require(r.n_large >= 100000, "reference.n_large must be >= 1e5");
  require(r.quantile_draws >= 100000, "reference.quantile_draws must be >= 1e5");
  require(r.s_dgp_draws >= 100000, "reference.s_dgp_draws must be >= 1e5");
  return r;
}

inline std::vector<std::size_t> parse_sizes(const Json& j) {
  std::vector<std::size_t> out;
  if (j.is_array()) {
    out = j.get<std::vector<std::size_t>>();
  } else {
    const auto from = j.at("from").get<std::size_t>();
    const auto to = j.at("to").get<std::size_t>();
    const auto step = j.value("step", std::size_t{1});
    require(step >= 1 && from <= to, "bad sample size range");
    for (std::size_t n = from; n <= to; n += step) out.push_back(n);
  }
  require(!out.empty(), "sample_sizes is empty");
  return out;
}

/// Everything a pipeline needs: the resolved config plus run locations.
struct RunContext {
  std::string command;
  Json config;
  fs::path config_dir;
  fs::path out;
  fs::path cache_dir;
  std::uint64_t seed = 0;
  bool dry_run = false;
  LogFn log;
};

inline Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline void write_json_file(const fs::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

inline fs::path resolve_path(const RunContext& ctx, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : ctx.config_dir / path;
}

/// Applies flag overrides and defaults. Flags win over the config file, the
/// config wins over the environment.
inline RunContext make_context(const std::string& command, const fs::path& config_path, const Overrides& ov,
                               LogFn log) {
  RunContext ctx;
  ctx.command = command;
  ctx.config = read_json_file(config_path);
  require(ctx.config.is_object(), "config must be a JSON object");
  ctx.config_dir = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
  const int schema = ctx.config.value("schema_version", kSchemaVersion);
  require(schema == kSchemaVersion, "unsupported schema_version " + std::to_string(schema));
  ctx.config["schema_version"] = kSchemaVersion;
  if (ov.seed) ctx.config["seed"] = *ov.seed;
  require(ctx.config.contains("seed"), "config must set an explicit seed");
  ctx.seed = ctx.config.at("seed").get<std::uint64_t>();

  int threads = ctx.config.value("threads", 0);
  if (ov.threads) threads = *ov.threads;
  require(threads >= 0, "threads must be >= 0");
  set_thread_count(threads);
  ctx.config.erase("threads");  // results do not depend on it

  std::string out;
  if (ov.out) {
    out = *ov.out;
  } else if (ctx.config.contains("out")) {
    out = resolve_path(ctx, ctx.config.at("out").get<std::string>()).string();
  } else if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
    out = env;
  } else {
    out = kDefaultOutDir;
  }
  ctx.out = out;
  ctx.config["out"] = ctx.out.string();
  ctx.cache_dir = ctx.config.contains("cache_dir") ? resolve_path(ctx, ctx.config.at("cache_dir").get<std::string>())
                                                   : ctx.out.parent_path() / "poolcast-cache";
  ctx.dry_run = ov.dry_run;
  ctx.log = std::move(log);
  return ctx;
}

// ---------------------------------------------------------------------------
// Cache of expensive simulation artifacts, keyed by a hash of their inputs.

class Cache {
 public:
  Cache(fs::path dir, LogFn log) : dir_(std::move(dir)), log_(std::move(log)) {}

  std::optional<Json> get(const std::string& kind, const Json& key) const {
    const fs::path p = path_for(kind, key);
    if (!fs::exists(p)) return std::nullopt;
    Json stored;
    try {
      stored = read_json_file(p);
    } catch (const Error&) {
      return std::nullopt;
    }
    if (!stored.contains("key") || stored.at("key") != key) return std::nullopt;
    if (log_) log_("cache hit: " + kind + " " + p.filename().string());
    return stored.at("value");
  }

  void put(const std::string& kind, const Json& key, const Json& value) const {
    write_json_file(path_for(kind, key), Json{{"key", key}, {"value", value}});
  }

  fs::path path_for(const std::string& kind, const Json& key) const {
    return dir_ / (kind + "-" + hex64(fnv1a64(key.dump())) + ".json");
  }

 private:
  fs::path dir_;
  LogFn log_;
};

// ---------------------------------------------------------------------------
// Simulation references: B thresholds, S_DGP, limit optima.

struct SimulationSetup {
  DgpParams dgp;
  ReferenceSettings ref;
  EstimatorOptions estimator;
  RngStream master{0};
  Cache cache;
};

inline SimulationSetup make_setup(const RunContext& ctx) {
  return {parse_dgp(ctx.config), parse_reference(ctx.config), parse_estimator(ctx.config, ctx.seed),
          RngStream(ctx.seed), Cache(ctx.cache_dir, ctx.log)};
}

/// Resolves a rule against the simulated process: B = (-inf, F^-1(p)].
inline ScoringRule simulation_rule(const RuleSpec& r, const SimulationSetup& s, const RunContext& ctx) {
  if (!r.censored) return ScoringRule::log_score();
  if (r.threshold) return ScoringRule::censored(*r.threshold);
  const Json key{{"p", r.p}, {"dgp", dgp_json(s.dgp)}, {"n_draws", s.ref.quantile_draws}, {"seed", ctx.seed}};
  if (auto hit = s.cache.get("quantile", key)) return ScoringRule::censored(quantile_from_json(*hit).value, r.p);
  if (ctx.log) ctx.log("computing stationary " + format_double(r.p) + "-quantile from " +
                       std::to_string(s.ref.quantile_draws) + " draws");
  const auto stream = s.master.split("quantile", static_cast<std::uint64_t>(std::llround(r.p * 1e6)));
  const double q = stationary_quantile(s.dgp, r.p, s.ref.quantile_draws, stream);
  s.cache.put("quantile", key, to_json(QuantileArtifact{r.p, s.ref.quantile_draws, ctx.seed, q}));
  return ScoringRule::censored(q, r.p);
}

inline double cached_s_dgp(const ScoringRule& rule, const SimulationSetup& s, const RunContext& ctx) {
  const Json key{{"rule", to_json(rule)}, {"dgp", dgp_json(s.dgp)}, {"n_eval", s.ref.s_dgp_draws}, {"seed", ctx.seed}};
  if (auto hit = s.cache.get("s_dgp", key)) return hit->get<double>();
  if (ctx.log) ctx.log("computing S_DGP for " + rule.id());
  const double v = s_dgp(s.dgp, rule, s.ref.s_dgp_draws, s.master.split("s_dgp"));
  s.cache.put("s_dgp", key, v);
  return v;
}

inline ReferenceOptima cached_reference(const ScoringRule& rule, const SimulationSetup& s, const RunContext& ctx) {
  const Json key{{"rule", to_json(rule)},
                 {"dgp", dgp_json(s.dgp)},
                 {"n_large", s.ref.n_large},
                 {"seed", ctx.seed},
                 {"estimator", estimator_json(s.estimator)}};
  if (auto hit = s.cache.get("reference", key))
    return {reference_from_json(hit->at("theta_star")), reference_from_json(hit->at("theta_zero"))};
  if (ctx.log) ctx.log("computing reference optima for " + rule.id() + " on " + std::to_string(s.ref.n_large) +
                       " draws");
  const auto r = compute_reference_optima(rule, s.dgp, s.ref.n_large, s.master.split("reference"), s.estimator);
  s.cache.put("reference", key, Json{{"theta_star", to_json(r.theta_star)}, {"theta_zero", to_json(r.theta_zero)}});
  return r;
}

inline Json reference_entry(const ScoringRule& rule, double sdgp, const std::optional<ReferenceOptima>& r) {
  Json j{{"rule", to_json(rule)}, {"s_dgp", sdgp}};
  if (r) {
    j["theta_star"] = to_json(r->theta_star);
    j["theta_zero"] = to_json(r->theta_zero);
  }
  return j;
}

// ---------------------------------------------------------------------------
// CSV helpers

inline std::string csv_num(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

inline std::string csv_opt(const std::optional<Interval>& ci, bool hi) {
  if (!ci) return "";
  return csv_num(hi ? ci->hi : ci->lo);
}

inline std::string kde_csv(const KdeCurve& c) {
  std::ostringstream os;
  os << "grid,density\n";
  for (std::size_t i = 0; i < c.grid.size(); ++i) os << csv_num(c.grid[i]) << ',' << csv_num(c.density[i]) << '\n';
  return os.str();
}

inline double rough_seconds(EstimationMode m, std::size_t n) {
  switch (m) {
    case EstimationMode::one_stage:
      return 2.7e-4 * static_cast<double>(n);
    case EstimationMode::two_stage:
      return 6e-5 * static_cast<double>(n);
    default:
      return 1e-6 * static_cast<double>(n);
  }
}

inline double parallel_seconds(double serial) {
  return serial / static_cast<double>(std::max(1, thread_count()));
}

// ---------------------------------------------------------------------------
// reference

inline std::vector<RuleSpec> reference_rules(const Json& cfg) {
  if (cfg.contains("reference") && cfg.at("reference").contains("rules"))
    return parse_rules(cfg.at("reference").at("rules"));
  if (cfg.contains("replicate") && cfg.at("replicate").contains("in_rules"))
    return parse_rules(cfg.at("replicate").at("in_rules"));
  return {RuleSpec{}};
}

inline int cmd_reference(RunContext& ctx) {
  const auto setup = make_setup(ctx);
  const auto rules = reference_rules(ctx.config);
  if (ctx.dry_run) {
    double secs = 0.0;
    secs += static_cast<double>(rules.size()) *
            (rough_seconds(EstimationMode::one_stage, setup.ref.n_large) / 3.0 +
             rough_seconds(EstimationMode::two_stage, setup.ref.n_large) + 3e-7 * setup.ref.s_dgp_draws +
             1e-7 * setup.ref.quantile_draws);
    std::cout << Json{{"command", "reference"}, {"rules", rules.size()}, {"estimated_seconds", secs}}.dump() << "\n";
    return 0;
  }
  Json entries = Json::array();
  for (const auto& r : rules) {
    const auto rule = simulation_rule(r, setup, ctx);
    const double sdgp = cached_s_dgp(rule, setup, ctx);
    entries.push_back(reference_entry(rule, sdgp, cached_reference(rule, setup, ctx)));
  }
  fs::create_directories(ctx.out);
  write_json_file(ctx.out / "config.json", ctx.config);
  write_json_file(ctx.out / "reference.json",
                  Json{{"schema_version", kSchemaVersion}, {"seed", ctx.seed}, {"n_large", setup.ref.n_large},
                       {"rules", entries}});
  return 0;
}

// ---------------------------------------------------------------------------
// replicate

inline ReplicationSpec parse_replicate(const RunContext& ctx, const SimulationSetup& setup,
                                       std::vector<RuleSpec>& in_specs, std::vector<RuleSpec>& eval_specs) {
  require(ctx.config.contains("replicate"), "config has no 'replicate' section");
  const auto& j = ctx.config.at("replicate");
  ReplicationSpec spec;
  spec.dgp = setup.dgp;
  spec.seed = ctx.seed;
  spec.estimator = setup.estimator;
  if (j.contains("modes")) {
    spec.modes.clear();
    for (const auto& m : j.at("modes")) spec.modes.push_back(estimation_mode_from_string(m.get<std::string>()));
  }
  in_specs = parse_rules(j.at("in_rules"));
  spec.matched_only = j.value("matched_only", false);
  eval_specs = spec.matched_only ? in_specs : parse_rules(j.at("eval_rules"));
  if (j.contains("sample_sizes")) spec.sample_sizes = parse_sizes(j.at("sample_sizes"));
  spec.replications = j.value("replications", spec.replications);
  spec.path_length = j.value("path_length", std::size_t{0});
  if (j.contains("holdout")) {
    const auto& h = j.at("holdout");
    spec.holdout_multiplier = h.value("multiplier", std::size_t{0});
    spec.holdout_length = h.value("length", spec.holdout_length);
    const std::string src = h.value("source", std::string("path_tail"));
    require(src == "path_tail" || src == "common", "holdout.source must be path_tail or common");
    spec.holdout_source = src == "common" ? HoldoutSource::common : HoldoutSource::path_tail;
  }
  spec.max_failure_fraction = j.value("max_failure_fraction", spec.max_failure_fraction);
  return spec;
}

inline int cmd_replicate(RunContext& ctx) {
  const auto setup = make_setup(ctx);
  std::vector<RuleSpec> in_specs, eval_specs;
  ReplicationSpec spec = parse_replicate(ctx, setup, in_specs, eval_specs);
  const bool fixed = std::find(spec.modes.begin(), spec.modes.end(), EstimationMode::two_stage_fixed_weight) !=
                     spec.modes.end();
  const std::size_t kde_points = ctx.config.at("replicate").value("kde_points", std::size_t{512});

  if (ctx.dry_run) {
    // Validate what can be validated without simulating.
    for (const auto& r : in_specs) spec.in_rules.push_back(r.censored ? ScoringRule::censored(0.0, r.p) : ScoringRule::log_score());
    for (const auto& r : eval_specs) spec.eval_rules.push_back(r.censored ? ScoringRule::censored(0.0, r.p) : ScoringRule::log_score());
    if (fixed)
      for (const auto& r : spec.in_rules) spec.eta_star.emplace(r.id(), WeightVector::two(0.5));
    spec.validate();
    double est = 0.0;
    for (auto n : spec.sample_sizes)
      for (auto m : spec.modes) est += rough_seconds(m, n) * static_cast<double>(in_specs.size());
    est *= static_cast<double>(spec.replications);
    double ref = static_cast<double>(in_specs.size()) *
                 (fixed ? rough_seconds(EstimationMode::one_stage, setup.ref.n_large) / 3.0 +
                              rough_seconds(EstimationMode::two_stage, setup.ref.n_large)
                        : 0.0);
    std::cout << Json{{"command", "replicate"},
                      {"replications", spec.replications},
                      {"sample_sizes", spec.sample_sizes.size()},
                      {"modes", spec.modes.size()},
                      {"in_rules", in_specs.size()},
                      {"estimation_fits", spec.replications * spec.sample_sizes.size() * spec.modes.size() *
                                              in_specs.size()},
                      {"estimated_seconds", parallel_seconds(est) + ref}}
                     .dump()
              << "\n";
    return 0;
  }

  for (const auto& r : in_specs) spec.in_rules.push_back(simulation_rule(r, setup, ctx));
  for (const auto& r : eval_specs) spec.eval_rules.push_back(simulation_rule(r, setup, ctx));
  if (spec.matched_only) spec.eval_rules = spec.in_rules;

  Json ref_entries = Json::array();
  std::map<std::string, double> sdgp;
  std::set<std::string> seen;
  for (const auto& rule : spec.in_rules) {
    std::optional<ReferenceOptima> opt;
    if (fixed) {
      opt = cached_reference(rule, setup, ctx);
      spec.eta_star.emplace(rule.id(), WeightVector(opt->theta_star.params.weights()));
    }
    sdgp[rule.id()] = cached_s_dgp(rule, setup, ctx);
    seen.insert(rule.id());
    ref_entries.push_back(reference_entry(rule, sdgp[rule.id()], opt));
  }
  for (const auto& rule : spec.eval_rules) {
    if (seen.count(rule.id())) continue;
    sdgp[rule.id()] = cached_s_dgp(rule, setup, ctx);
    seen.insert(rule.id());
    ref_entries.push_back(reference_entry(rule, sdgp[rule.id()], std::nullopt));
  }

  const auto result = replicate_simulation(spec, ctx.log);

  fs::create_directories(ctx.out / "kde");
  write_json_file(ctx.out / "config.json", ctx.config);
  write_json_file(ctx.out / "reference.json", Json{{"schema_version", kSchemaVersion}, {"seed", ctx.seed}, {"rules", ref_entries}});

  std::ostringstream draws, summaries, comparisons;
  draws << "mode,in_rule,eval_rule,n,replication,score\n";
  summaries << "mode,in_rule,eval_rule,n,count,average,ci_lo,ci_hi,variance,scaled_variance,var_ci_lo,var_ci_hi,"
               "s_dgp,expected_divergence\n";
  for (const auto& s : result.sets) {
    const std::string prefix = to_string(s.mode) + "," + s.in_rule.id() + "," + s.eval_rule.id() + "," +
                               std::to_string(s.n) + ",";
    for (std::size_t i = 0; i < s.draws.size(); ++i)
      draws << prefix << s.replications[i] << ',' << csv_num(s.draws[i]) << '\n';
    if (s.draws.size() < 2) {
      summaries << prefix << s.draws.size() << ",,,,,,,,,\n";
      continue;
    }
    const auto d = summarize(s, sdgp.at(s.eval_rule.id()));
    summaries << prefix << d.count << ',' << csv_num(d.mean) << ',' << csv_opt(d.ci_mean, false) << ','
              << csv_opt(d.ci_mean, true) << ',' << csv_num(d.variance) << ',' << csv_num(d.scaled_variance) << ','
              << csv_opt(d.ci_variance, false) << ',' << csv_opt(d.ci_variance, true) << ',' << csv_num(d.s_dgp)
              << ',' << csv_num(d.expected_divergence) << '\n';
    if (s.draws.size() >= 10) {
      const auto grid = kde_grid(s.draws, kde_points);
      const auto curve = kde(s.draws, grid, ctx.log);
      write_text_file(ctx.out / "kde" /
                          (to_string(s.mode) + "_" + s.in_rule.id() + "_" + s.eval_rule.id() + "_n" +
                           std::to_string(s.n) + ".csv"),
                      kde_csv(curve));
    }
  }

  // Paired differences between modes, matched by replication.
  comparisons << "a,b,in_rule,eval_rule,n,count,mean_diff,ci_lo,ci_hi\n";
  auto find_set = [&](EstimationMode m, const ScoreSampleSet& like) -> const ScoreSampleSet* {
    for (const auto& s : result.sets)
      if (s.mode == m && s.in_rule.id() == like.in_rule.id() && s.eval_rule.id() == like.eval_rule.id() &&
          s.n == like.n)
        return &s;
    return nullptr;
  };
  const std::pair<EstimationMode, EstimationMode> pairs[] = {
      {EstimationMode::one_stage, EstimationMode::two_stage},
      {EstimationMode::two_stage, EstimationMode::two_stage_fixed_weight}};
  for (const auto& [a, b] : pairs) {
    for (const auto& s : result.sets) {
      if (s.mode != a) continue;
      const auto* other = find_set(b, s);
      if (other == nullptr || s.draws.size() < 2 || other->draws.size() < 2) continue;
      const auto p = paired_difference(s, *other);
      comparisons << to_string(a) << ',' << to_string(b) << ',' << s.in_rule.id() << ',' << s.eval_rule.id() << ','
                  << s.n << ',' << p.count << ',' << csv_num(p.mean) << ',' << csv_num(p.ci.lo) << ','
                  << csv_num(p.ci.hi) << '\n';
    }
  }

  Json failures = Json::array();
  for (const auto& f : result.failures)
    failures.push_back(Json{{"replication", f.replication}, {"n", f.n}, {"in_rule", f.in_rule}, {"mode", f.mode},
                            {"message", f.message}});
  write_text_file(ctx.out / "draws.csv", draws.str());
  write_text_file(ctx.out / "summaries.csv", summaries.str());
  write_text_file(ctx.out / "comparisons.csv", comparisons.str());
  write_json_file(ctx.out / "metadata.json", Json{{"schema_version", kSchemaVersion},
                                                  {"attempted", result.attempted},
                                                  {"failed", result.failures.size()},
                                                  {"nonconverged", result.nonconverged},
                                                  {"failures", failures}});
  return 0;
}

// ---------------------------------------------------------------------------
// empirical

struct EmpiricalSettings {
  fs::path data;
  std::size_t in_sample = 0;
  std::size_t holdout = 0;
  std::vector<EstimationMode> modes{EstimationMode::two_stage, EstimationMode::one_stage};
  std::vector<RuleSpec> in_rules;
  std::vector<RuleSpec> eval_rules;
  std::size_t n_draws = 20000;
  double level = 0.95;
  HacOptions hac;
  std::size_t kde_points = 512;
  bool write_draws = false;
};

inline EmpiricalSettings parse_empirical(const RunContext& ctx) {
  require(ctx.config.contains("empirical"), "config has no 'empirical' section");
  const auto& j = ctx.config.at("empirical");
  EmpiricalSettings e;
  e.data = resolve_path(ctx, j.at("data").get<std::string>());
  require(fs::exists(e.data), "data file not found: " + e.data.string());
  e.in_sample = j.at("in_sample").get<std::size_t>();
  e.holdout = j.at("holdout").get<std::size_t>();
  require(e.in_sample >= kMinEstimationLength, "empirical.in_sample too small");
  require(e.holdout >= 1, "empirical.holdout must be >= 1");
  if (j.contains("modes")) {
    e.modes.clear();
    for (const auto& m : j.at("modes")) {
      const auto mode = estimation_mode_from_string(m.get<std::string>());
      require(mode == EstimationMode::one_stage || mode == EstimationMode::two_stage,
              "empirical modes must be one_stage or two_stage");
      e.modes.push_back(mode);
    }
  }
  e.in_rules = parse_rules(j.at("in_rules"));
  e.eval_rules = j.contains("eval_rules") ? parse_rules(j.at("eval_rules")) : e.in_rules;
  e.n_draws = j.value("n_draws", e.n_draws);
  e.level = j.value("level", e.level);
  require(e.level > 0.0 && e.level < 1.0, "empirical.level must lie in (0, 1)");
  if (j.contains("hac")) {
    e.hac.prewhiten = j.at("hac").value("prewhiten", false);
    if (j.at("hac").contains("bandwidth")) e.hac.bandwidth = j.at("hac").at("bandwidth").get<double>();
  }
  e.kde_points = j.value("kde_points", e.kde_points);
  e.write_draws = j.value("write_draws", false);
  return e;
}

/// Thresholds for the returns data are in-sample empirical quantiles.
inline ScoringRule empirical_rule(const RuleSpec& r, std::span<const double> in_sample) {
  if (!r.censored) return ScoringRule::log_score();
  if (r.threshold) return ScoringRule::censored(*r.threshold);
  return ScoringRule::censored(empirical_quantile(std::vector<double>(in_sample.begin(), in_sample.end()), r.p), r.p);
}

inline int cmd_empirical(RunContext& ctx) {
  const auto e = parse_empirical(ctx);
  const auto series = load_csv(e.data.string());
  SampleSplit{e.in_sample, e.holdout}.validate(series.size());
  const auto est_opt = parse_estimator(ctx.config, ctx.seed);
  if (ctx.dry_run) {
    double secs = 0.0;
    for (auto m : e.modes) secs += rough_seconds(m, e.in_sample) * static_cast<double>(e.in_rules.size());
    secs += 2e-7 * static_cast<double>(e.n_draws * e.holdout * e.eval_rules.size() * e.modes.size() *
                                        e.in_rules.size());
    std::cout << Json{{"command", "empirical"},
                      {"rows", e.modes.size() * e.in_rules.size()},
                      {"columns", e.eval_rules.size()},
                      {"n_draws", e.n_draws},
                      {"estimated_seconds", secs}}
                     .dump()
              << "\n";
    return 0;
  }

  const std::vector<double>& all = series.values();
  const std::span<const double> sample(all.data(), e.in_sample);
  const std::span<const double> eval_y(all.data(), e.in_sample + e.holdout);
  const IndexRange holdout{e.in_sample, e.in_sample + e.holdout};
  std::vector<ScoringRule> eval_rules;
  for (const auto& r : e.eval_rules) eval_rules.push_back(empirical_rule(r, sample));
  const RngStream master(ctx.seed);

  fs::create_directories(ctx.out / "kde");
  write_json_file(ctx.out / "config.json", ctx.config);

  std::ostringstream table, longform, draws_csv;
  table << "in_rule,mode";
  for (const auto& r : eval_rules) table << ',' << r.id() << "_average," << r.id() << "_ci_lo," << r.id() << "_ci_hi";
  table << '\n';
  longform << "in_rule,mode,eval_rule,average,ci_lo,ci_hi,draws,rejected_draws,point_in_ci,notice\n";
  draws_csv << "in_rule,mode,eval_rule,draw,score\n";
  Json rows = Json::array();

  for (std::size_t ri = 0; ri < e.in_rules.size(); ++ri) {
    const ScoringRule rule = empirical_rule(e.in_rules[ri], sample);
    std::optional<EstimationResult> two;
    auto get_two = [&]() -> const EstimationResult& {
      if (!two) two = estimate_two_stage(sample, rule, {ModelKind::ar1, ModelKind::arch1}, est_opt);
      return *two;
    };
    for (auto mode : e.modes) {
      if (ctx.log) ctx.log("empirical: " + rule.id() + " / " + to_string(mode));
      const EstimationResult est =
          mode == EstimationMode::two_stage
              ? get_two()
              : estimate_one_stage(sample, rule, get_two().estimate, {ModelKind::ar1, ModelKind::arch1}, est_opt);
      Json row{{"in_rule", to_json(rule)}, {"mode", to_string(mode)}, {"estimate", to_json(est)}};
      std::string notice;
      std::optional<ParameterDrawResult> pd;
      if (est.at_boundary() || !est.estimate.valid()) {
        notice = "boundary estimate: Gaussian draws disabled";
      } else {
        try {
          const auto sw = sandwich(moment_mode(mode), est.estimate, sample, rule, e.hac);
          row["covariance"] = to_json(sw);
          const Eigen::MatrixXd cov = sw.w / static_cast<double>(sw.n);
          pd = parameter_sampling_distribution(est.estimate, cov, eval_y, holdout, eval_rules, e.n_draws,
                                               master.split("empirical:" + rule.id() + ":" + to_string(mode)));
        } catch (const InvalidArgument& ex) {
          notice = std::string("asymptotics unavailable: ") + ex.what();
        }
      }
      if (ctx.log && !notice.empty()) ctx.log("notice (" + rule.id() + " / " + to_string(mode) + "): " + notice);
      row["notice"] = notice;
      table << rule.id() << ',' << to_string(mode);
      Json cells = Json::array();
      for (std::size_t k = 0; k < eval_rules.size(); ++k) {
        const double point = out_of_sample_score(est.estimate, eval_y, holdout, eval_rules[k]);
        std::optional<Interval> ci;
        if (pd) ci = percentile_ci(pd->sets[k].draws, e.level);
        const bool inside = ci && ci->contains(point);
        table << ',' << csv_num(point) << ',' << csv_opt(ci, false) << ',' << csv_opt(ci, true);
        longform << rule.id() << ',' << to_string(mode) << ',' << eval_rules[k].id() << ',' << csv_num(point) << ','
                 << csv_opt(ci, false) << ',' << csv_opt(ci, true) << ',' << (pd ? e.n_draws : 0) << ','
                 << (pd ? pd->rejected : 0) << ',' << (ci ? (inside ? "yes" : "no") : "") << ','
                 << (notice.empty() ? "" : "\"" + notice + "\"") << '\n';
        Json cell{{"eval_rule", to_json(eval_rules[k])}, {"average", point}};
        if (ci) {
          cell["ci"] = Json::array({ci->lo, ci->hi});
          cell["point_in_ci"] = inside;
          if (!inside && ctx.log)
            ctx.log("flag: point estimate outside its percentile interval (" + rule.id() + " / " +
                    to_string(mode) + " / " + eval_rules[k].id() + ")");
          const auto& draws = pd->sets[k].draws;
          const auto curve = kde(draws, kde_grid(draws, e.kde_points), ctx.log);
          write_text_file(ctx.out / "kde" / (rule.id() + "_" + to_string(mode) + "_" + eval_rules[k].id() + ".csv"),
                          kde_csv(curve));
          if (e.write_draws)
            for (std::size_t i = 0; i < draws.size(); ++i)
              draws_csv << rule.id() << ',' << to_string(mode) << ',' << eval_rules[k].id() << ',' << i << ','
                        << csv_num(draws[i]) << '\n';
        }
        cells.push_back(cell);
      }
      table << '\n';
      row["cells"] = cells;
      if (pd) row["rejected_draws"] = pd->rejected;
      rows.push_back(row);
    }
  }
  write_text_file(ctx.out / "table.csv", table.str());
  write_text_file(ctx.out / "summary.csv", longform.str());
  if (e.write_draws) write_text_file(ctx.out / "draws.csv", draws_csv.str());
  write_json_file(ctx.out / "estimates.json",
                  Json{{"schema_version", kSchemaVersion},
                       {"data", e.data.filename().string()},
                       {"in_sample", e.in_sample},
                       {"holdout", e.holdout},
                       {"n_draws", e.n_draws},
                       {"level", e.level},
                       {"rows", rows}});
  return 0;
}

// ---------------------------------------------------------------------------
// score: evaluate a given parameter vector on a series.

inline int cmd_score(RunContext& ctx) {
  require(ctx.config.contains("score"), "config has no 'score' section");
  const auto& j = ctx.config.at("score");
  const ParameterVector theta = parameters_from_json(j.at("theta"));
  const auto rules = parse_rules(j.at("rules"));
  std::vector<double> y;
  if (j.contains("data")) {
    const auto path = resolve_path(ctx, j.at("data").get<std::string>());
    require(fs::exists(path), "data file not found: " + path.string());
    y = load_csv(path.string()).values();
  } else {
    const auto n = j.at("simulate").get<std::size_t>();
    require(n >= 2, "score.simulate must be >= 2");
    if (!ctx.dry_run) y = simulate_dgp(parse_dgp(ctx.config), n, RngStream(ctx.seed).split("score")).values();
  }
  if (ctx.dry_run) {
    std::cout << Json{{"command", "score"}, {"rules", rules.size()}, {"estimated_seconds", 0.1}}.dump() << "\n";
    return 0;
  }
  const std::size_t begin = j.value("begin", std::size_t{1});
  const std::size_t end = j.value("end", y.size());
  require(begin >= 1 && begin < end && end <= y.size(), "score range is outside the series");
  std::ostringstream os;
  os << "rule,threshold,count,average\n";
  for (const auto& r : rules) {
    const ScoringRule rule = empirical_rule(r, y);
    const double v = out_of_sample_score(theta, y, {begin, end}, rule);
    os << rule.id() << ',' << (rule.censored() ? csv_num(rule.threshold) : "") << ',' << (end - begin) << ','
       << csv_num(v) << '\n';
  }
  fs::create_directories(ctx.out);
  write_json_file(ctx.out / "config.json", ctx.config);
  write_text_file(ctx.out / "scores.csv", os.str());
  return 0;
}

// ---------------------------------------------------------------------------

inline Json error_report(const std::string& command, const std::exception& e) {
  Json j{{"schema_version", kSchemaVersion}, {"command", command}, {"message", e.what()}};
  if (const auto* s = dynamic_cast<const ScoringFailure*>(&e)) {
    j["error"] = "scoring_failure";
    j["index"] = s->index();
  } else if (const auto* p = dynamic_cast<const ParseError*>(&e)) {
    j["error"] = "parse_error";
    j["row"] = p->row();
  } else if (dynamic_cast<const EstimationError*>(&e) != nullptr) {
    j["error"] = "estimation_error";
  } else if (dynamic_cast<const InvalidArgument*>(&e) != nullptr) {
    j["error"] = "invalid_argument";
  } else {
    j["error"] = "runtime_error";
  }
  return j;
}

/// Runs one command; returns the process exit status. Failures leave
/// <out>/error.json behind when the output directory is known.
inline int run(const std::string& command, const fs::path& config_path, const Overrides& ov, const LogFn& log) {
  std::optional<fs::path> out;
  if (ov.out) {
    out = *ov.out;
  } else {
    try {
      const Json cfg = read_json_file(config_path);
      const fs::path base = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
      if (cfg.is_object() && cfg.contains("out")) {
        const fs::path p(cfg.at("out").get<std::string>());
        out = p.is_absolute() ? p : base / p;
      } else if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
        out = env;
      } else {
        out = kDefaultOutDir;
      }
    } catch (const std::exception&) {
    }
  }
  try {
    RunContext ctx = make_context(command, config_path, ov, log);
    out = ctx.out;
    if (command == "replicate") return cmd_replicate(ctx);
    if (command == "empirical") return cmd_empirical(ctx);
    if (command == "reference") return cmd_reference(ctx);
    if (command == "score") return cmd_score(ctx);
    throw InvalidArgument("unknown command '" + command + "'");
  } catch (const std::exception& e) {
    if (log) log(std::string("error: ") + e.what());
    if (out && !ov.dry_run) {
      try {
        write_json_file(*out / "error.json", error_report(command, e));
      } catch (const std::exception&) {
      }
    }
    return 1;
  }
}

}  // namespace poolcast::cli
