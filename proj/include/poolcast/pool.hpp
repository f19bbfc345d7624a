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

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "poolcast/common.hpp"
#include "poolcast/distribution.hpp"
#include "poolcast/models.hpp"
#include "poolcast/normal.hpp"

namespace poolcast {

/// Constituent model families that ship with the library.
enum class ModelKind { ar1, arch1 };

inline constexpr std::size_t kParamsPerModel = 3;

inline std::string to_string(ModelKind k) { return k == ModelKind::ar1 ? "ar1" : "arch1"; }

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "ar1") return ModelKind::ar1;
  if (s == "arch1") return ModelKind::arch1;
  throw InvalidArgument("unknown model '" + s + "' (expected ar1 or arch1)");
}

inline std::array<const char*, kParamsPerModel> param_names(ModelKind k) {
  if (k == ModelKind::ar1) return {"alpha0", "alpha1", "sigma"};
  return {"mu", "beta0", "beta1"};
}

using ConstituentParams = std::variant<Ar1Params, Arch1Params>;

/// Pool weights on the unit simplex.
class WeightVector {
 public:
  explicit WeightVector(std::vector<double> eta) : eta_(std::move(eta)) {
    require(!eta_.empty(), "weight vector is empty");
    double total = 0.0;
    for (double w : eta_) {
      require(w >= 0.0 && w <= 1.0, "pool weight outside [0, 1]");
      total += w;
    }
    require(std::abs(total - 1.0) < 1e-10, "pool weights must sum to 1");
  }

  /// Two-model pool: weight eta on the first model, 1 - eta on the second.
  static WeightVector two(double eta) { return WeightVector({eta, 1.0 - eta}); }

  std::size_t size() const noexcept { return eta_.size(); }
  double operator[](std::size_t k) const { return eta_[k]; }
  const std::vector<double>& values() const noexcept { return eta_; }

 private:
  std::vector<double> eta_;
};

struct CombinationSpec {
  std::vector<ModelKind> constituents{ModelKind::ar1, ModelKind::arch1};
  WeightVector weights = WeightVector::two(0.5);

  void validate() const {
    require(constituents.size() >= 2, "a pool needs at least 2 constituents");
    require(weights.size() == constituents.size(), "weight count differs from constituent count");
  }
};

/// Stacked natural parameters theta = [eta' gamma_1' ... gamma_K']'.
///
/// With K constituents the weight block holds the first K-1 weights (the last
/// is their complement); K = 1 describes a single constituent with no weight
/// block. Each gamma block has kParamsPerModel entries:
/// ar1 = (alpha0, alpha1, sigma), arch1 = (mu, beta0, beta1).
class ParameterVector {
 public:
  ParameterVector() = default;

  ParameterVector(std::vector<ModelKind> constituents, std::vector<double> values)
      : constituents_(std::move(constituents)), values_(std::move(values)) {
    require(!constituents_.empty(), "parameter vector needs a constituent");
    require(values_.size() == dim(), "parameter vector has wrong dimension");
  }

  static ParameterVector pool(const WeightVector& w, const std::vector<ConstituentParams>& gammas) {
    require(w.size() == gammas.size(), "weights and constituents differ in count");
    std::vector<ModelKind> kinds;
    std::vector<double> v(w.values().begin(), w.values().end() - 1);
    for (const auto& g : gammas) append(kinds, v, g);
    return ParameterVector(std::move(kinds), std::move(v));
  }

  static ParameterVector single(const ConstituentParams& g) {
    std::vector<ModelKind> kinds;
    std::vector<double> v;
    append(kinds, v, g);
    return ParameterVector(std::move(kinds), std::move(v));
  }

  const std::vector<ModelKind>& constituents() const noexcept { return constituents_; }
  std::size_t num_constituents() const noexcept { return constituents_.size(); }
  std::size_t eta_dim() const noexcept { return constituents_.size() - 1; }
  std::size_t gamma_offset(std::size_t j) const noexcept { return eta_dim() + j * kParamsPerModel; }
  std::size_t dim() const noexcept { return eta_dim() + constituents_.size() * kParamsPerModel; }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::vector<double> weights() const {
    std::vector<double> w(constituents_.size());
    double rest = 1.0;
    for (std::size_t k = 0; k < eta_dim(); ++k) {
      w[k] = values_[k];
      rest -= values_[k];
    }
    w.back() = constituents_.size() == 1 ? 1.0 : rest;
    return w;
  }

  std::span<const double> gamma(std::size_t j) const {
    return {values_.data() + gamma_offset(j), kParamsPerModel};
  }

  ConstituentParams constituent(std::size_t j) const {
    const auto g = gamma(j);
    if (constituents_[j] == ModelKind::ar1) return Ar1Params{g[0], g[1], g[2]};
    return Arch1Params{g[0], g[1], g[2]};
  }

  /// Replaces the weight block, leaving gamma untouched.
  ParameterVector with_weights(const WeightVector& w) const {
    require(w.size() == constituents_.size(), "weight count differs from constituent count");
    ParameterVector out = *this;
    for (std::size_t k = 0; k < eta_dim(); ++k) out.values_[k] = w[k];
    return out;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < eta_dim(); ++k) out.push_back("eta" + std::to_string(k + 1));
    for (std::size_t j = 0; j < constituents_.size(); ++j)
      for (const char* n : param_names(constituents_[j]))
        out.push_back(std::string(n) + "_" + std::to_string(j + 1));
    return out;
  }

  /// True when every block satisfies its own constraints.
  bool valid() const noexcept {
    double total = 0.0;
    for (std::size_t k = 0; k < eta_dim(); ++k) {
      if (!(values_[k] >= 0.0 && values_[k] <= 1.0)) return false;
      total += values_[k];
    }
    if (total > 1.0 + 1e-12) return false;
    for (std::size_t j = 0; j < constituents_.size(); ++j) {
      const auto g = gamma(j);
      for (double x : g)
        if (!std::isfinite(x)) return false;
      if (constituents_[j] == ModelKind::ar1) {
        if (!(g[2] > 0.0) || !(std::abs(g[1]) < 1.0)) return false;
      } else {
        if (!(g[1] > 0.0) || !(g[2] >= 0.0 && g[2] < 1.0)) return false;
      }
    }
    return true;
  }

  void validate() const { require(valid(), "parameter vector violates its constraints"); }

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

 private:
  static void append(std::vector<ModelKind>& kinds, std::vector<double>& v, const ConstituentParams& g) {
    if (const auto* a = std::get_if<Ar1Params>(&g)) {
      a->validate();
      kinds.push_back(ModelKind::ar1);
      v.insert(v.end(), {a->alpha0, a->alpha1, a->sigma});
    } else {
      const auto& b = std::get<Arch1Params>(g);
      b.validate();
      kinds.push_back(ModelKind::arch1);
      v.insert(v.end(), {b.mu, b.beta0, b.beta1});
    }
  }

  std::vector<ModelKind> constituents_;
  std::vector<double> values_;
};

inline PredictiveDistribution constituent_predictive(const ConstituentParams& g, double y_prev) {
  if (const auto* a = std::get_if<Ar1Params>(&g)) return ar1_predictive(*a, y_prev);
  return arch1_predictive(std::get<Arch1Params>(g), y_prev);
}

/// Linear pool: CDF(y) = sum_k eta_k F_k(y).
inline GaussianMixture pool_predictive(const CombinationSpec& spec,
                                       const std::vector<ConstituentParams>& params, double y_prev) {
  spec.validate();
  require(params.size() == spec.constituents.size(), "constituent parameter count mismatch");
  GaussianMixture m;
  for (std::size_t k = 0; k < params.size(); ++k) {
    m.weights.push_back(spec.weights[k]);
    m.components.push_back(std::get<Gaussian>(constituent_predictive(params[k], y_prev)));
  }
  return m;
}

/// Predictive for a stacked parameter vector (pool or single constituent).
inline PredictiveDistribution predictive(const ParameterVector& theta, double y_prev) {
  GaussianMixture m;
  m.weights = theta.weights();
  for (std::size_t k = 0; k < theta.num_constituents(); ++k)
    m.components.push_back(std::get<Gaussian>(constituent_predictive(theta.constituent(k), y_prev)));
  if (m.components.size() == 1) return m.components.front();
  return m;
}

/// log(sum_k eta_k phi_k(y)) via log-sum-exp.
inline double pool_log_density(const CombinationSpec& spec, const std::vector<ConstituentParams>& params,
                               double y_prev, double y) {
  return log_density(pool_predictive(spec, params, y_prev), y);
}

}  // namespace poolcast
