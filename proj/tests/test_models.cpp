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

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "poolcast/models.hpp"
#include "poolcast/scoring.hpp"

using namespace poolcast;

TEST(Models, Ar1AndArch1Predictives) {
  const auto a = std::get<Gaussian>(ar1_predictive({0.1, 0.5, 0.8}, 2.0));
  EXPECT_DOUBLE_EQ(a.mean, 1.1);
  EXPECT_DOUBLE_EQ(a.sd, 0.8);
  const auto b = std::get<Gaussian>(arch1_predictive({0.2, 0.3, 0.5}, 1.2));
  EXPECT_DOUBLE_EQ(b.mean, 0.2);
  EXPECT_NEAR(b.sd, std::sqrt(0.3 + 0.5), 1e-15);
  EXPECT_THROW(ar1_predictive({0.0, 1.0, 1.0}, 0.0), InvalidArgument);
  EXPECT_THROW(arch1_predictive({0.0, 1.0, 1.0}, 0.0), InvalidArgument);
  EXPECT_THROW(arch1_predictive({0.0, 0.0, 0.5}, 0.0), InvalidArgument);
}

TEST(Models, PathFollowsTheRecursion) {
  const DgpParams p;
  const auto path = simulate_dgp_path(p, 5000, RngStream(9));
  for (std::size_t t = 1; t < path.size(); ++t) {
    ASSERT_NEAR(path.v_sq[t], p.arch_const + p.arch_coef * path.v_sq[t - 1] * path.z[t - 1] * path.z[t - 1], 1e-12);
    ASSERT_NEAR(path.x[t], p.ar * path.x[t - 1] + std::sqrt(path.v_sq[t]) * path.z[t], 1e-12);
    ASSERT_EQ(path.y[t], std::clamp(path.x[t], -5.0, 5.0));
    const auto f = std::get<CensoredGaussian>(dgp_predictive(p, path.x[t - 1], path.v_sq[t - 1], path.z[t - 1]));
    ASSERT_NEAR(f.mean, p.ar * path.x[t - 1], 1e-15);
    ASSERT_NEAR(f.sd * f.sd, path.v_sq[t], 1e-12);
  }
}

TEST(Models, SimulationIsDeterministic) {
  const auto a = simulate_dgp(DgpParams{}, 1000, RngStream(4)).values();
  const auto b = simulate_dgp(DgpParams{}, 1000, RngStream(4)).values();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, simulate_dgp(DgpParams{}, 1000, RngStream(5)).values());
}

TEST(Models, StationaryMoments) {
  const auto y = simulate_dgp(DgpParams{}, 400000, RngStream(1)).values();
  double m = 0, s2 = 0;
  for (double v : y) m += v;
  m /= static_cast<double>(y.size());
  for (double v : y) s2 += (v - m) * (v - m);
  const double sd = std::sqrt(s2 / static_cast<double>(y.size()));
  EXPECT_LT(std::abs(m), 0.02);
  EXPECT_GT(sd, 0.89);
  EXPECT_LT(sd, 0.97);
}

TEST(Models, StationaryQuantileIsReproducible) {
  const double q1 = stationary_quantile(DgpParams{}, 0.2, 200000, RngStream(3));
  const double q2 = stationary_quantile(DgpParams{}, 0.2, 200000, RngStream(3));
  EXPECT_EQ(q1, q2);
  EXPECT_LT(q1, -0.5);
  EXPECT_GT(q1, -1.0);
  EXPECT_THROW(stationary_quantile(DgpParams{}, 0.2, 1000, RngStream(3)), InvalidArgument);
}

TEST(Models, InvalidParametersRejected) {
  DgpParams p;
  p.arch_coef = 1.0;
  EXPECT_THROW(simulate_dgp(p, 100, RngStream(1)), InvalidArgument);
  EXPECT_THROW(simulate_dgp(DgpParams{}, 1, RngStream(1)), InvalidArgument);
}
