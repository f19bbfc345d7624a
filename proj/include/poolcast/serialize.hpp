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

// JSON forms of estimates, covariances and reference artifacts.

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "poolcast/asymptotics.hpp"
#include "poolcast/estimate.hpp"
#include "poolcast/pool.hpp"
#include "poolcast/scoring.hpp"

namespace poolcast {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline Json to_json(const Eigen::MatrixXd& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  require(data.size() == static_cast<std::size_t>(rows * cols), "matrix data has wrong length");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)].get<double>();
  return m;
}

inline Json to_json(const ScoringRule& r) {
  Json j{{"id", r.id()}, {"type", r.censored() ? "cs" : "ls"}};
  if (r.censored()) {
    j["threshold"] = r.threshold;
    j["p"] = r.prob;
  }
  return j;
}

inline ScoringRule rule_from_json(const Json& j) {
  if (j.at("type").get<std::string>() == "ls") return ScoringRule::log_score();
  return ScoringRule::censored(j.at("threshold").get<double>(), j.value("p", 0.0));
}

inline Json to_json(const ParameterVector& theta) {
  Json kinds = Json::array();
  for (auto k : theta.constituents()) kinds.push_back(to_string(k));
  return Json{{"constituents", kinds}, {"names", theta.names()}, {"values", theta.values()}};
}

inline ParameterVector parameters_from_json(const Json& j) {
  std::vector<ModelKind> kinds;
  for (const auto& k : j.at("constituents")) kinds.push_back(model_kind_from_string(k.get<std::string>()));
  ParameterVector theta(kinds, j.at("values").get<std::vector<double>>());
  theta.validate();
  return theta;
}

inline Json to_json(const EstimationResult& r) {
  Json j{{"mode", to_string(r.mode)},
         {"rule", to_json(r.rule)},
         {"estimate", to_json(r.estimate)},
         {"achieved_score", r.achieved_score},
         {"scored", r.scored},
         {"converged", r.converged},
         {"iterations", r.iterations},
         {"gradient_norm", r.gradient_norm},
         {"starts_used", r.starts_used},
         {"boundary", r.boundary}};
  return j;
}

inline Json to_json(const SandwichCovariance& s) {
  Json j{{"mode", s.mode == MomentMode::one_stage ? "one_stage" : "two_stage"},
         {"n", s.n},
         {"names", s.names},
         {"jacobian", to_json(s.m)},
         {"long_run_variance", to_json(s.v)},
         {"covariance", to_json(s.w)},
         {"jacobian_condition", s.condition},
         {"hac_bandwidth", s.bandwidth},
         {"psd_repair", s.psd_repair}};
  if (s.blocks) {
    j["g_eta"] = to_json(s.blocks->g_eta);
    j["g_gamma"] = to_json(s.blocks->g_gamma);
    j["m_gamma"] = to_json(s.blocks->m_gamma);
    j["first_stage_gap"] = s.blocks->g_gamma.norm();
    j["w_eta_blocks"] = to_json(s.w_eta_blocks);
  }
  return j;
}

/// Persisted stationary quantile F^-1(p) of the simulated process.
struct QuantileArtifact {
  double p = 0.0;
  std::size_t n_draws = 0;
  std::uint64_t seed = 0;
  double value = 0.0;
};

inline Json to_json(const QuantileArtifact& q) {
  return Json{{"p", q.p}, {"n_draws", q.n_draws}, {"seed", q.seed}, {"value", q.value}};
}

inline QuantileArtifact quantile_from_json(const Json& j) {
  return {j.at("p").get<double>(), j.at("n_draws").get<std::size_t>(), j.at("seed").get<std::uint64_t>(),
          j.at("value").get<double>()};
}

inline Json to_json(const ReferenceOptimum& r) {
  return Json{{"params", to_json(r.params)},
              {"source_sample_size", r.source_sample_size},
              {"score_kind", r.score_kind},
              {"score", r.result.achieved_score},
              {"converged", r.result.converged},
              {"boundary", r.result.boundary}};
}

inline ReferenceOptimum reference_from_json(const Json& j) {
  ReferenceOptimum r;
  r.params = parameters_from_json(j.at("params"));
  r.source_sample_size = j.at("source_sample_size").get<std::size_t>();
  r.score_kind = j.at("score_kind").get<std::string>();
  r.result.estimate = r.params;
  r.result.achieved_score = j.at("score").get<double>();
  r.result.converged = j.at("converged").get<bool>();
  r.result.boundary = j.at("boundary").get<std::vector<std::size_t>>();
  return r;
}

}  // namespace poolcast
