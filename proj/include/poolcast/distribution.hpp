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

#include <cmath>
#include <variant>
#include <vector>

#include "poolcast/common.hpp"
#include "poolcast/normal.hpp"

namespace poolcast {

struct Gaussian {
  double mean = 0.0;
  double sd = 1.0;
};

/// Finite mixture of Gaussians; weights on the simplex.
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Gaussian> components;
};

/// N(mean, sd) clamped to [lower, upper]: a density on the open interval plus
/// point masses at both bounds.
struct CensoredGaussian {
  double mean = 0.0;
  double sd = 1.0;
  double lower = -5.0;
  double upper = 5.0;
};

/// One-step-ahead predictive distribution.
using PredictiveDistribution = std::variant<Gaussian, GaussianMixture, CensoredGaussian>;

inline GaussianMixture mixture2(double weight, Gaussian first, Gaussian second) {
  return GaussianMixture{{weight, 1.0 - weight}, {first, second}};
}

inline void validate(const PredictiveDistribution& f) {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          require(d.sd > 0.0 && std::isfinite(d.mean), "gaussian needs sd > 0");
        } else if constexpr (std::is_same_v<T, GaussianMixture>) {
          require(!d.components.empty() && d.weights.size() == d.components.size(),
                  "mixture weights and components differ");
          double total = 0.0;
          for (std::size_t j = 0; j < d.weights.size(); ++j) {
            require(d.weights[j] >= 0.0 && d.weights[j] <= 1.0, "mixture weight outside [0,1]");
            require(d.components[j].sd > 0.0, "mixture component needs sd > 0");
            total += d.weights[j];
          }
          require(std::abs(total - 1.0) < 1e-12, "mixture weights must sum to 1");
        } else {
          require(d.sd > 0.0 && d.lower < d.upper, "censored gaussian needs sd > 0, lower < upper");
        }
      },
      f);
}

namespace detail {

inline double gaussian_log_pdf(const Gaussian& g, double y) {
  return math::normal_log_pdf((y - g.mean) / g.sd) - std::log(g.sd);
}

inline double gaussian_log_ccdf(const Gaussian& g, double y) {
  return math::log_normal_ccdf((y - g.mean) / g.sd);
}

template <typename Fn>
double mixture_log_combine(const GaussianMixture& m, Fn&& log_term) {
  double terms[16];
  std::vector<double> heap;
  double* buf = terms;
  if (m.components.size() > 16) {
    heap.resize(m.components.size());
    buf = heap.data();
  }
  for (std::size_t j = 0; j < m.components.size(); ++j)
    buf[j] = m.weights[j] > 0.0 ? std::log(m.weights[j]) + log_term(m.components[j]) : kNegInf;
  return math::log_sum_exp(std::span<const double>(buf, m.components.size()));
}

}  // namespace detail

inline double cdf(const PredictiveDistribution& f, double y) {
  return std::visit(
      [y](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return math::normal_cdf((y - d.mean) / d.sd);
        } else if constexpr (std::is_same_v<T, GaussianMixture>) {
          double acc = 0.0;
          for (std::size_t j = 0; j < d.components.size(); ++j)
            acc += d.weights[j] * math::normal_cdf((y - d.components[j].mean) / d.components[j].sd);
          return acc;
        } else {
          if (y < d.lower) return 0.0;
          if (y >= d.upper) return 1.0;
          return math::normal_cdf((y - d.mean) / d.sd);
        }
      },
      f);
}

/// log Pr(Y > y), from upper-tail primitives.
inline double log_ccdf(const PredictiveDistribution& f, double y) {
  return std::visit(
      [y](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return detail::gaussian_log_ccdf(d, y);
        } else if constexpr (std::is_same_v<T, GaussianMixture>) {
          return detail::mixture_log_combine(
              d, [y](const Gaussian& g) { return detail::gaussian_log_ccdf(g, y); });
        } else {
          if (y < d.lower) return 0.0;
          if (y >= d.upper) return kNegInf;
          return math::log_normal_ccdf((y - d.mean) / d.sd);
        }
      },
      f);
}

/// Log of the generalized density: Lebesgue density on continuous parts, log
/// of the atom mass at a censoring bound.
inline double log_density(const PredictiveDistribution& f, double y) {
  return std::visit(
      [y](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return detail::gaussian_log_pdf(d, y);
        } else if constexpr (std::is_same_v<T, GaussianMixture>) {
          return detail::mixture_log_combine(
              d, [y](const Gaussian& g) { return detail::gaussian_log_pdf(g, y); });
        } else {
          if (y == d.lower) return math::log_normal_cdf((d.lower - d.mean) / d.sd);
          if (y == d.upper) return math::log_normal_ccdf((d.upper - d.mean) / d.sd);
          if (y < d.lower || y > d.upper) return kNegInf;
          return detail::gaussian_log_pdf(Gaussian{d.mean, d.sd}, y);
        }
      },
      f);
}

/// Density of the continuous part (atoms excluded).
inline double pdf(const PredictiveDistribution& f, double y) {
  if (const auto* c = std::get_if<CensoredGaussian>(&f)) {
    if (y <= c->lower || y >= c->upper) return 0.0;
    return std::exp(detail::gaussian_log_pdf(Gaussian{c->mean, c->sd}, y));
  }
  return std::exp(log_density(f, y));
}

}  // namespace poolcast
