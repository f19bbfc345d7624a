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

// Standard-normal primitives with tail-stable logarithms.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "poolcast/common.hpp"

namespace poolcast::math {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

inline double normal_log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

inline double normal_pdf(double z) { return std::exp(normal_log_pdf(z)); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

/// Upper tail 1 - Phi(z), never formed by subtraction.
inline double normal_ccdf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

/// log(1 - Phi(z)), accurate for z far into either tail.
inline double log_normal_ccdf(double z) {
  if (z < 0.0) return std::log1p(-0.5 * std::erfc(-z * kInvSqrt2));
  if (z < 35.0) return std::log(0.5 * std::erfc(z * kInvSqrt2));
  // Mills-ratio asymptotic series; relative error below 1e-12 for z >= 35.
  const double r = 1.0 / (z * z);
  const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
  return normal_log_pdf(z) - std::log(z) + std::log(series);
}

/// log Phi(z).
inline double log_normal_cdf(double z) { return log_normal_ccdf(-z); }

/// phi(z) / (1 - Phi(z)).
inline double normal_hazard(double z) { return std::exp(normal_log_pdf(z) - log_normal_ccdf(z)); }

/// log(sum_i exp(x_i)); -inf entries are ignored, all -inf gives -inf.
inline double log_sum_exp(std::span<const double> xs) {
  double hi = kNegInf;
  for (double x : xs) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

inline double logistic(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace poolcast::math
