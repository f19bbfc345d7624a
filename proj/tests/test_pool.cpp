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

#include <cmath>

#include <gtest/gtest.h>

#include "poolcast/pool.hpp"
#include "poolcast/transform.hpp"

using namespace poolcast;

namespace {

ParameterVector sample_theta() {
  return ParameterVector::pool(WeightVector::two(0.3), {Ar1Params{0.1, 0.5, 0.9}, Arch1Params{-0.05, 0.25, 0.6}});
}

}  // namespace

TEST(Pool, Layout) {
  const auto t = sample_theta();
  EXPECT_EQ(t.dim(), 7u);
  EXPECT_EQ(t.eta_dim(), 1u);
  EXPECT_EQ(t.gamma_offset(1), 4u);
  EXPECT_EQ(t.names(), (std::vector<std::string>{"eta1", "alpha0_1", "alpha1_1", "sigma_1", "mu_2", "beta0_2",
                                                  "beta1_2"}));
  EXPECT_EQ(t.weights(), (std::vector<double>{0.3, 0.7}));
  EXPECT_TRUE(t.valid());
  auto bad = t;
  bad[6] = 1.0;
  EXPECT_FALSE(bad.valid());
  EXPECT_THROW(WeightVector({0.5, 0.6}), InvalidArgument);
}

TEST(Pool, DensityIsWeightedSum) {
  const CombinationSpec spec{{ModelKind::ar1, ModelKind::arch1}, WeightVector::two(0.3)};
  const std::vector<ConstituentParams> g{Ar1Params{0.1, 0.5, 0.9}, Arch1Params{-0.05, 0.25, 0.6}};
  const double y_prev = 0.8, y = -0.4;
  const double d1 = std::exp(log_density(ar1_predictive(std::get<Ar1Params>(g[0]), y_prev), y));
  const double d2 = std::exp(log_density(arch1_predictive(std::get<Arch1Params>(g[1]), y_prev), y));
  EXPECT_NEAR(pool_log_density(spec, g, y_prev, y), std::log(0.3 * d1 + 0.7 * d2), 1e-14);
  EXPECT_NEAR(log_density(predictive(sample_theta(), y_prev), y), std::log(0.3 * d1 + 0.7 * d2), 1e-14);
  // Weight one on the first model collapses to that model.
  const auto one = sample_theta().with_weights(WeightVector::two(1.0));
  EXPECT_NEAR(log_density(predictive(one, y_prev), y), std::log(d1), 1e-14);
}

TEST(Pool, PoolCdfIsMonotone) {
  const auto f = predictive(sample_theta(), 1.0);
  double prev = 0.0;
  for (double y = -8.0; y <= 8.0; y += 0.01) {
    const double c = cdf(f, y);
    ASSERT_GE(c, prev);
    prev = c;
  }
  EXPECT_NEAR(prev, 1.0, 1e-12);
}

TEST(Transform, RoundTrip) {
  const auto t = sample_theta();
  const auto u = transform::to_unconstrained(t);
  const auto back = transform::from_unconstrained(t.constituents(), u);
  for (std::size_t i = 0; i < t.dim(); ++i) EXPECT_NEAR(back[i], t[i], 1e-14);
  EXPECT_TRUE(transform::boundary_coordinates(t.constituents(), u).empty());
}

TEST(Transform, JacobianMatchesFiniteDifferences) {
  const auto t = sample_theta();
  const auto u = transform::to_unconstrained(t);
  const auto jac = transform::jacobian(t.constituents(), u);
  for (std::size_t i = 0; i < u.size(); ++i) {
    auto up = u, dn = u;
    const double h = 1e-6;
    up[i] += h;
    dn[i] -= h;
    const auto a = transform::from_unconstrained(t.constituents(), up);
    const auto b = transform::from_unconstrained(t.constituents(), dn);
    for (std::size_t k = 0; k < u.size(); ++k)
      EXPECT_NEAR(jac(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)), (a[k] - b[k]) / (2 * h), 1e-8);
  }
}

TEST(Transform, BoundaryDetection) {
  auto t = sample_theta();
  t[6] = 1.0 - 1e-7;
  const auto u = transform::to_unconstrained(t);
  const auto b = transform::boundary_coordinates(t.constituents(), u);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0], 6u);
  t[0] = 1.0;
  EXPECT_THROW(transform::to_unconstrained(t), InvalidArgument);
}

TEST(Transform, ThreeModelSimplex) {
  const auto t = ParameterVector::pool(WeightVector({0.2, 0.5, 0.3}), {Ar1Params{0, 0.5, 1}, Arch1Params{0, 1, 0.5},
                                                                        Ar1Params{0.1, -0.2, 0.7}});
  const auto u = transform::to_unconstrained(t);
  const auto back = transform::from_unconstrained(t.constituents(), u);
  for (std::size_t i = 0; i < t.dim(); ++i) EXPECT_NEAR(back[i], t[i], 1e-14);
}
