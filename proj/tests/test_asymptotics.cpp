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
#include <vector>

#include <gtest/gtest.h>

#include "poolcast/asymptotics.hpp"
#include "poolcast/models.hpp"

using namespace poolcast;

namespace {

const std::vector<ModelKind> kPool{ModelKind::ar1, ModelKind::arch1};

std::vector<double> sim(std::size_t n, std::uint64_t seed) { return simulate_dgp(DgpParams{}, n, RngStream(seed)).values(); }

EstimationResult interior_one_stage(std::vector<double>& y, const ScoringRule& rule) {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    y = sim(2500, seed);
    auto r = estimate_one_stage(y, rule);
    if (!r.at_boundary() && r.converged) return r;
  }
  throw std::runtime_error("no interior one-stage fit found");
}

double score_at(const std::vector<ModelKind>& kinds, const std::vector<double>& theta, const ScoringRule& rule,
                const std::vector<double>& y, std::size_t t) {
  return observation_score(kinds, theta.data(), rule, y[t - 1], y[t], nullptr);
}

}  // namespace

TEST(Asymptotics, OneStageContributionsMatchFiniteDifferences) {
  const auto y = sim(400, 3);
  const auto rule = ScoringRule::censored(-0.7, 0.2);
  const ParameterVector theta(kPool, {0.4, 0.02, 0.45, 0.8, -0.03, 0.3, 0.6});
  const Eigen::MatrixXd q = moment_contributions(MomentMode::one_stage, theta, y, rule);
  for (std::size_t t = 1; t < y.size(); t += 37)
    for (std::size_t i = 0; i < theta.dim(); ++i) {
      auto up = theta.values(), dn = theta.values();
      const double h = 1e-6;
      up[i] += h;
      dn[i] -= h;
      const double fd = (score_at(kPool, up, rule, y, t) - score_at(kPool, dn, rule, y, t)) / (2 * h);
      EXPECT_NEAR(q(static_cast<Eigen::Index>(t - 1), static_cast<Eigen::Index>(i)), fd, 1e-6);
    }
}

TEST(Asymptotics, TwoStageContributionsStackOwnScores) {
  const auto y = sim(300, 4);
  const auto rule = ScoringRule::log_score();
  const ParameterVector theta(kPool, {0.4, 0.02, 0.45, 0.8, -0.03, 0.3, 0.6});
  const Eigen::MatrixXd q = moment_contributions(MomentMode::two_stage, theta, y, rule);
  const std::size_t t = 57;
  const double h = 1e-6;
  // eta column: pool score derivative.
  auto up = theta.values(), dn = theta.values();
  up[0] += h;
  dn[0] -= h;
  EXPECT_NEAR(q(t - 1, 0), (score_at(kPool, up, rule, y, t) - score_at(kPool, dn, rule, y, t)) / (2 * h), 1e-6);
  // gamma columns: each constituent scored on its own.
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t i = 0; i < 3; ++i) {
      std::vector<double> g(theta.values().begin() + 1 + 3 * j, theta.values().begin() + 4 + 3 * j);
      auto gu = g, gd = g;
      gu[i] += h;
      gd[i] -= h;
      const std::vector<ModelKind> k{kPool[j]};
      const double fd = (score_at(k, gu, rule, y, t) - score_at(k, gd, rule, y, t)) / (2 * h);
      EXPECT_NEAR(q(t - 1, static_cast<Eigen::Index>(1 + 3 * j + i)), fd, 1e-6);
    }
}

// In unconstrained coordinates the one-stage Jacobian is the Hessian of S_n.
TEST(Asymptotics, OneStageJacobianIsHessian) {
  const auto y = sim(800, 5);
  const auto rule = ScoringRule::log_score();
  const ParameterVector theta(kPool, {0.45, 0.0, 0.5, 0.85, 0.0, 0.3, 0.5});
  const auto jr = jacobian(MomentMode::one_stage, theta, y, rule);
  const ScoreObjective obj(kPool, rule, y);
  const auto u = transform::to_unconstrained(theta);
  auto f = [&](std::vector<double> v) { return obj.value(transform::from_unconstrained(kPool, v)); };
  const double h = 1e-4;
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t k = 0; k < u.size(); ++k) {
      auto pp = u, pm = u, mp = u, mm = u;
      pp[i] += h; pp[k] += h;
      pm[i] += h; pm[k] -= h;
      mp[i] -= h; mp[k] += h;
      mm[i] -= h; mm[k] -= h;
      const double hess = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h * h);
      EXPECT_NEAR(jr.m_u(i, k), hess, 1e-4 * std::max(1.0, std::abs(hess))) << i << "," << k;
    }
  EXPECT_LT((jr.m_u - jr.m_u.transpose()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Asymptotics, TwoStageBlockStructure) {
  const auto y = sim(2000, 7);
  const auto rule = ScoringRule::log_score();
  const auto two = estimate_two_stage(y, rule);
  ASSERT_FALSE(two.at_boundary());
  const auto jr = jacobian(MomentMode::two_stage, two.estimate, y, rule);
  ASSERT_TRUE(jr.blocks.has_value());
  EXPECT_EQ(jr.blocks->lower_left.cwiseAbs().maxCoeff(), 0.0);
  const auto gap = first_stage_irrelevance_gap(jr);
  EXPECT_GT(gap.norm, 0.0);

  const auto sw = sandwich(MomentMode::two_stage, two.estimate, y, rule);
  ASSERT_EQ(sw.psd_repair, 0.0);
  const double full = sw.w(0, 0);
  EXPECT_NEAR(sw.w_eta_blocks(0, 0), full, 1e-8 * std::abs(full));
  EXPECT_EQ(sw.w_gamma_gamma.rows(), 6);
  // W is symmetric positive semidefinite.
  EXPECT_LT((sw.w - sw.w.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sw.w);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
}

TEST(Asymptotics, OneStageSandwichAtInteriorOptimum) {
  std::vector<double> y;
  const auto rule = ScoringRule::log_score();
  const auto one = interior_one_stage(y, rule);
  const auto sw = sandwich(MomentMode::one_stage, one.estimate, y, rule);
  EXPECT_EQ(sw.w.rows(), 7);
  for (Eigen::Index i = 0; i < 7; ++i) EXPECT_GT(sw.w(i, i), 0.0);
  EXPECT_LT((sw.m - sw.m.transpose()).cwiseAbs().maxCoeff(), 1e-4 * sw.m.cwiseAbs().maxCoeff());
}

TEST(Asymptotics, RefusesBoundaryEstimates) {
  const auto y = sim(300, 9);
  ParameterVector theta(kPool, {1.0, 0.0, 0.5, 0.8, 0.0, 0.3, 0.5});
  EXPECT_THROW(sandwich(MomentMode::two_stage, theta, y, ScoringRule::log_score()), InvalidArgument);
  theta[0] = 0.5;
  theta[6] = 1.0 - 1e-9;
  EXPECT_THROW(moment_contributions(MomentMode::one_stage, theta, y, ScoringRule::log_score()), InvalidArgument);
  EXPECT_THROW(moment_mode(EstimationMode::constituent), InvalidArgument);
}

// Synthetic moment systems: weights moment independent of gamma gives G_gamma = 0.
TEST(Asymptotics, FirstStageGapOnSyntheticSystems) {
  auto decoupled = [](const std::vector<double>& u) {
    Eigen::VectorXd m(3);
    m << 0.3 - u[0] * u[0] * u[0], 1.0 - u[1], 2.0 * u[2] - u[1];
    return m;
  };
  auto coupled = [](const std::vector<double>& u) {
    Eigen::VectorXd m(3);
    m << 0.3 - u[0] + 0.5 * u[1] * u[2], 1.0 - u[1], 2.0 * u[2] - u[1];
    return m;
  };
  const std::vector<double> at{0.5, 1.0, 0.5};
  const auto d = first_stage_irrelevance_gap(numeric_jacobian(decoupled, at), 1);
  EXPECT_EQ(d.norm, 0.0);
  const auto c = first_stage_irrelevance_gap(numeric_jacobian(coupled, at), 1);
  EXPECT_NEAR(c.g_gamma(0, 0), 0.25, 1e-8);
  EXPECT_NEAR(c.g_gamma(0, 1), 0.5, 1e-8);
}

TEST(Asymptotics, ConditionNumber) {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 2, 4;
  EXPECT_GT(condition_number(m), kMaxConditionNumber);
  EXPECT_NEAR(condition_number(Eigen::MatrixXd::Identity(3, 3)), 1.0, 1e-14);
}

TEST(Hac, KernelAndBandwidth) {
  EXPECT_EQ(qs_kernel(0.0), 1.0);
  EXPECT_NEAR(qs_kernel(1e-6), 1.0, 1e-9);
  EXPECT_LT(std::abs(qs_kernel(50.0)), 1e-3);
  RngStream r(1);
  Eigen::MatrixXd white(5000, 1), persistent(5000, 1);
  double x = 0;
  for (int t = 0; t < 5000; ++t) {
    white(t, 0) = r.normal();
    x = 0.8 * x + r.normal();
    persistent(t, 0) = x;
  }
  EXPECT_LT(andrews_bandwidth(white), andrews_bandwidth(persistent));
}

TEST(Hac, IidMatchesSampleCovariance) {
  RngStream r(2);
  const Eigen::Index n = 20000;
  Eigen::MatrixXd x(n, 2);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double a = r.normal(), b = r.normal();
    x(t, 0) = a;
    x(t, 1) = 0.5 * a + b;
  }
  const auto lrv = long_run_variance(x);
  EXPECT_NEAR(lrv.v(0, 0), 1.0, 0.06);
  EXPECT_NEAR(lrv.v(0, 1), 0.5, 0.06);
  EXPECT_NEAR(lrv.v(1, 1), 1.25, 0.08);
}

TEST(Hac, Ar1ClosedForm) {
  // Long-run variance of an AR(1) with unit innovations: 1 / (1 - rho)^2.
  for (double rho : {0.3, 0.6}) {
    RngStream r(static_cast<std::uint64_t>(rho * 10));
    const Eigen::Index n = 10000;
    Eigen::MatrixXd x(n, 1);
    double v = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
      v = rho * v + r.normal();
      x(t, 0) = v;
    }
    const double truth = 1.0 / ((1 - rho) * (1 - rho));
    EXPECT_NEAR(long_run_variance(x).v(0, 0), truth, 0.2 * truth) << rho;
    HacOptions pw;
    pw.prewhiten = true;
    EXPECT_NEAR(long_run_variance(x, pw).v(0, 0), truth, 0.2 * truth) << rho;
  }
}

TEST(Hac, ConstantColumnsGiveZero) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(500, 2, 3.0);
  const auto lrv = long_run_variance(x);
  EXPECT_EQ(lrv.v.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(long_run_variance(Eigen::MatrixXd::Zero(10, 1)), InvalidArgument);
}
