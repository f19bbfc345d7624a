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
#include <cstddef>
#include <vector>

#include "poolcast/common.hpp"
#include "poolcast/distribution.hpp"
#include "poolcast/rng.hpp"
#include "poolcast/series.hpp"

namespace poolcast {

/// Gaussian AR(1): Y_t = alpha0 + alpha1 Y_{t-1} + sigma Z_t.
struct Ar1Params {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double sigma = 1.0;

  void validate() const {
    require(sigma > 0.0, "AR(1) sigma must be positive");
    require(std::abs(alpha1) < 1.0, "AR(1) coefficient must lie in (-1, 1)");
  }
};

/// Constant-mean Gaussian ARCH(1), variance beta0 + beta1 (Y_{t-1} - mu)^2.
struct Arch1Params {
  double mu = 0.0;
  double beta0 = 1.0;
  double beta1 = 0.0;

  void validate() const {
    require(beta0 > 0.0, "ARCH(1) beta0 must be positive");
    require(beta1 >= 0.0 && beta1 < 1.0, "ARCH(1) beta1 must lie in [0, 1)");
  }
};

/// Censored AR(1)-ARCH(1) data generating process:
///   X_t = ar X_{t-1} + V_t Z_t,  V_t^2 = arch_const + arch_coef V_{t-1}^2 Z_{t-1}^2,
///   Y_t = clamp(X_t, -censor_bound, censor_bound).
struct DgpParams {
  double ar = 0.5;
  double arch_const = 0.2;
  double arch_coef = 0.75;
  double censor_bound = 5.0;
  std::size_t burn_in = 1000;

  void validate() const {
    require(censor_bound > 0.0, "censor bound must be positive");
    require(arch_const > 0.0, "ARCH constant must be positive");
    require(arch_coef >= 0.0 && arch_coef < 1.0, "ARCH coefficient must lie in [0, 1)");
  }
};

inline PredictiveDistribution ar1_predictive(const Ar1Params& p, double y_prev) {
  p.validate();
  return Gaussian{p.alpha0 + p.alpha1 * y_prev, p.sigma};
}

inline PredictiveDistribution arch1_predictive(const Arch1Params& p, double y_prev) {
  p.validate();
  const double e = y_prev - p.mu;
  return Gaussian{p.mu, std::sqrt(p.beta0 + p.beta1 * e * e)};
}

/// Simulated path with the latent state needed by the true predictive.
struct DgpPath {
  std::vector<double> y;     // censored observations
  std::vector<double> x;     // uncensored X_t
  std::vector<double> v_sq;  // V_t^2
  std::vector<double> z;     // innovations Z_t

  std::size_t size() const noexcept { return y.size(); }
};

namespace detail {

/// Runs the recursion and hands each post-burn-in (y, x, v_sq, z) to sink.
template <typename Sink>
void run_dgp(const DgpParams& p, std::size_t n, RngStream& rng, Sink&& sink) {
  p.validate();
  double x = 0.0;
  double v_sq = p.arch_const / (1.0 - p.arch_coef);
  double z = rng.normal();
  const std::size_t total = p.burn_in + n;
  for (std::size_t t = 1; t <= total; ++t) {
    v_sq = p.arch_const + p.arch_coef * v_sq * z * z;
    z = rng.normal();
    x = p.ar * x + std::sqrt(v_sq) * z;
    if (t > p.burn_in) sink(std::clamp(x, -p.censor_bound, p.censor_bound), x, v_sq, z);
  }
}

}  // namespace detail

inline DgpPath simulate_dgp_path(const DgpParams& p, std::size_t n, RngStream rng) {
  require(n >= 1, "need at least one draw");
  DgpPath path;
  path.y.reserve(n);
  path.x.reserve(n);
  path.v_sq.reserve(n);
  path.z.reserve(n);
  detail::run_dgp(p, n, rng, [&](double y, double x, double v_sq, double z) {
    path.y.push_back(y);
    path.x.push_back(x);
    path.v_sq.push_back(v_sq);
    path.z.push_back(z);
  });
  return path;
}

/// Observations only. Deterministic given the stream.
inline ObservedSeries simulate_dgp(const DgpParams& p, std::size_t n, RngStream rng) {
  require(n >= 2, "a series needs at least 2 draws");
  std::vector<double> y;
  y.reserve(n);
  detail::run_dgp(p, n, rng, [&](double v, double, double, double) { y.push_back(v); });
  return ObservedSeries(std::move(y));
}

/// True one-step predictive of Y_t given the latent state at t-1.
inline PredictiveDistribution dgp_predictive(const DgpParams& p, double x_prev, double v_prev_sq,
                                             double z_prev) {
  require(v_prev_sq > 0.0, "previous conditional variance must be positive");
  const double v_sq = p.arch_const + p.arch_coef * v_prev_sq * z_prev * z_prev;
  return CensoredGaussian{p.ar * x_prev, std::sqrt(v_sq), -p.censor_bound, p.censor_bound};
}

/// Empirical p-quantile (order statistic at ceil(p N)) of n_draws simulated Y_t.
inline double stationary_quantile(const DgpParams& p, double prob, std::size_t n_draws,
                                  RngStream rng) {
  require(prob > 0.0 && prob < 1.0, "quantile probability must lie in (0, 1)");
  require(n_draws >= 100000, "stationary quantile needs at least 1e5 draws");
  std::vector<double> y;
  y.reserve(n_draws);
  detail::run_dgp(p, n_draws, rng, [&](double v, double, double, double) { y.push_back(v); });
  const auto rank = static_cast<std::size_t>(std::ceil(prob * static_cast<double>(n_draws)));
  const std::size_t k = std::clamp<std::size_t>(rank, 1, n_draws) - 1;
  std::nth_element(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(k), y.end());
  return y[k];
}

}  // namespace poolcast
