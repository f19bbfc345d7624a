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

// Smooth bijection between the constrained parameter space and R^d. The
// optimizer and all derivative-based asymptotics work in these coordinates.
//
//   weights  additive logistic (K = 2: eta = logistic(u))
//   alpha1   2 logistic(u) - 1
//   sigma    exp(u)
//   beta0    exp(u)
//   beta1    logistic(u)
//   alpha0, mu  identity

#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "poolcast/common.hpp"
#include "poolcast/normal.hpp"
#include "poolcast/pool.hpp"

namespace poolcast::transform {

/// |u| beyond this on a logistic coordinate is treated as a boundary optimum.
inline constexpr double kBoundaryLogit = 12.0;

enum class Coord { identity, log, logistic, signed_logistic };

inline Coord coordinate(const std::vector<ModelKind>& kinds, std::size_t i) {
  const std::size_t eta_dim = kinds.size() - 1;
  if (i < eta_dim) return Coord::logistic;
  const std::size_t j = (i - eta_dim) / kParamsPerModel;
  const std::size_t r = (i - eta_dim) % kParamsPerModel;
  if (r == 0) return Coord::identity;
  if (kinds[j] == ModelKind::ar1) return r == 1 ? Coord::signed_logistic : Coord::log;
  return r == 1 ? Coord::log : Coord::logistic;
}

inline std::vector<double> to_unconstrained(const ParameterVector& theta) {
  require(theta.valid(), "cannot transform a parameter vector outside its constraints");
  const auto& kinds = theta.constituents();
  const std::size_t eta_dim = theta.eta_dim();
  std::vector<double> u(theta.dim());
  if (eta_dim > 0) {
    const auto w = theta.weights();
    require(w.back() > 0.0, "weights must be interior to transform");
    for (std::size_t k = 0; k < eta_dim; ++k) {
      require(w[k] > 0.0, "weights must be interior to transform");
      u[k] = eta_dim == 1 ? math::logit(w[k]) : std::log(w[k]) - std::log(w.back());
    }
  }
  for (std::size_t i = eta_dim; i < u.size(); ++i) {
    const double v = theta[i];
    switch (coordinate(kinds, i)) {
      case Coord::identity: u[i] = v; break;
      case Coord::log: u[i] = std::log(v); break;
      case Coord::logistic:
        require(v > 0.0 && v < 1.0, "logistic coordinate must be interior to transform");
        u[i] = math::logit(v);
        break;
      case Coord::signed_logistic: u[i] = math::logit(0.5 * (v + 1.0)); break;
    }
  }
  return u;
}

inline ParameterVector from_unconstrained(const std::vector<ModelKind>& kinds, const std::vector<double>& u) {
  const std::size_t eta_dim = kinds.size() - 1;
  std::vector<double> v(u.size());
  if (eta_dim == 1) {
    v[0] = math::logistic(u[0]);
  } else if (eta_dim > 1) {
    double hi = 0.0;
    for (std::size_t k = 0; k < eta_dim; ++k) hi = std::max(hi, u[k]);
    double denom = std::exp(-hi);
    for (std::size_t k = 0; k < eta_dim; ++k) denom += std::exp(u[k] - hi);
    for (std::size_t k = 0; k < eta_dim; ++k) v[k] = std::exp(u[k] - hi) / denom;
  }
  for (std::size_t i = eta_dim; i < u.size(); ++i) {
    switch (coordinate(kinds, i)) {
      case Coord::identity: v[i] = u[i]; break;
      case Coord::log: v[i] = std::exp(u[i]); break;
      case Coord::logistic: v[i] = math::logistic(u[i]); break;
      case Coord::signed_logistic: v[i] = 2.0 * math::logistic(u[i]) - 1.0; break;
    }
  }
  return ParameterVector(kinds, std::move(v));
}

/// d theta / d u' evaluated at u.
inline Eigen::MatrixXd jacobian(const std::vector<ModelKind>& kinds, const std::vector<double>& u) {
  const auto theta = from_unconstrained(kinds, u);
  const std::size_t d = u.size();
  const std::size_t eta_dim = kinds.size() - 1;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < eta_dim; ++k)
    for (std::size_t l = 0; l < eta_dim; ++l)
      j(k, l) = theta[k] * ((k == l ? 1.0 : 0.0) - theta[l]);
  for (std::size_t i = eta_dim; i < d; ++i) {
    double dv = 1.0;
    switch (coordinate(kinds, i)) {
      case Coord::identity: break;
      case Coord::log: dv = theta[i]; break;
      case Coord::logistic: {
        const double l = math::logistic(u[i]);
        dv = l * (1.0 - l);
        break;
      }
      case Coord::signed_logistic: {
        const double l = math::logistic(u[i]);
        dv = 2.0 * l * (1.0 - l);
        break;
      }
    }
    j(i, i) = dv;
  }
  return j;
}

/// Indices of logistic coordinates that sit beyond the boundary cutoff.
inline std::vector<std::size_t> boundary_coordinates(const std::vector<ModelKind>& kinds,
                                                     const std::vector<double>& u) {
  std::vector<std::size_t> out;
  const std::size_t eta_dim = kinds.size() - 1;
  if (eta_dim > 1) {
    const auto theta = from_unconstrained(kinds, u);
    const auto w = theta.weights();
    const double cut = math::logistic(-kBoundaryLogit);
    for (std::size_t k = 0; k < eta_dim; ++k)
      if (w[k] < cut || w[k] > 1.0 - cut) out.push_back(k);
  } else if (eta_dim == 1 && std::abs(u[0]) > kBoundaryLogit) {
    out.push_back(0);
  }
  for (std::size_t i = eta_dim; i < u.size(); ++i) {
    const auto c = coordinate(kinds, i);
    if ((c == Coord::logistic || c == Coord::signed_logistic) && std::abs(u[i]) > kBoundaryLogit)
      out.push_back(i);
  }
  return out;
}

}  // namespace poolcast::transform
