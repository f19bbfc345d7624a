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

// GMM view of the estimators: per-observation moment contributions, their
// Jacobian, HAC long-run variance and the sandwich W = M^-1 V M^-1'.
//
// Moments for the one-stage estimator are the score gradient q_t(theta). For
// the two-stage estimator they are g_t (pool score gradient in the weights)
// stacked on m_t (each constituent's own score gradient in its parameters);
// the Jacobian of that system is block upper-triangular,
//
//   M* = [ G_eta  G_gamma ]
//        [   0    M_gamma ].
//
// Derivatives are taken in unconstrained coordinates u and mapped to natural
// coordinates with the transform Jacobian J = d theta / d u'.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "poolcast/common.hpp"
#include "poolcast/estimate.hpp"
#include "poolcast/objective.hpp"
#include "poolcast/pool.hpp"
#include "poolcast/scoring.hpp"
#include "poolcast/transform.hpp"

namespace poolcast {

enum class MomentMode { one_stage, two_stage };

inline MomentMode moment_mode(EstimationMode m) {
  if (m == EstimationMode::one_stage) return MomentMode::one_stage;
  if (m == EstimationMode::two_stage) return MomentMode::two_stage;
  throw InvalidArgument("asymptotics are defined for one_stage and two_stage estimates only");
}

inline constexpr double kMaxConditionNumber = 1e12;

namespace detail {

/// Unconstrained coordinates of an interior estimate; boundary estimates are refused.
inline std::vector<double> interior_coordinates(const ParameterVector& theta) {
  std::vector<double> u;
  try {
    u = transform::to_unconstrained(theta);
  } catch (const InvalidArgument&) {
    throw InvalidArgument("estimate lies on the parameter boundary; asymptotic normality does not apply");
  }
  if (!transform::boundary_coordinates(theta.constituents(), u).empty())
    throw InvalidArgument("estimate lies at a logistic boundary; asymptotic normality does not apply");
  return u;
}

/// Moment contributions in unconstrained coordinates.
inline Eigen::MatrixXd moments_u(MomentMode mode, const std::vector<ModelKind>& kinds, const std::vector<double>& u,
                                 std::span<const double> y, const ScoringRule& rule, IndexRange range) {
  const ParameterVector theta = transform::from_unconstrained(kinds, u);
  const Eigen::MatrixXd jac = transform::jacobian(kinds, u);
  ScoreObjective pool(kinds, rule, y, range);
  Eigen::MatrixXd q = pool.contributions(theta) * jac;  // rows: (J' q_t)'
  if (mode == MomentMode::one_stage) return q;
  for (std::size_t j = 0; j < kinds.size(); ++j) {
    const std::size_t off = theta.gamma_offset(j);
    std::vector<double> g(theta.values().begin() + static_cast<std::ptrdiff_t>(off),
                          theta.values().begin() + static_cast<std::ptrdiff_t>(off + kParamsPerModel));
    const ParameterVector single({kinds[j]}, g);
    ScoreObjective own({kinds[j]}, rule, y, range);
    const Eigen::MatrixXd mj = own.contributions(single);
    for (std::size_t i = 0; i < kParamsPerModel; ++i)
      q.col(static_cast<Eigen::Index>(off + i)) = mj.col(static_cast<Eigen::Index>(i)) * jac(static_cast<Eigen::Index>(off + i), static_cast<Eigen::Index>(off + i));
  }
  return q;
}

inline Eigen::VectorXd column_means(const Eigen::MatrixXd& x) {
  return x.colwise().mean().transpose();
}

}  // namespace detail

/// Per-observation moment contributions in natural coordinates (rows = t).
inline Eigen::MatrixXd moment_contributions(MomentMode mode, const ParameterVector& theta, std::span<const double> y,
                                            const ScoringRule& rule) {
  const auto u = detail::interior_coordinates(theta);
  const auto& kinds = theta.constituents();
  const IndexRange range{1, y.size()};
  const Eigen::MatrixXd qu = detail::moments_u(mode, kinds, u, y, rule, range);
  const Eigen::MatrixXd jac = transform::jacobian(kinds, u);
  // q_theta' = q_u' J^-1
  return jac.transpose().partialPivLu().solve(qu.transpose()).transpose();
}

/// Central-difference Jacobian of a vector function of u.
template <typename Fn>
Eigen::MatrixXd numeric_jacobian(Fn&& fn, const std::vector<double>& u, double rel_step = 1e-5) {
  const Eigen::VectorXd f0 = fn(u);
  Eigen::MatrixXd jac(f0.size(), static_cast<Eigen::Index>(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(u[i]));
    auto up = u, dn = u;
    up[i] += h;
    dn[i] -= h;
    jac.col(static_cast<Eigen::Index>(i)) = (fn(up) - fn(dn)) / (2.0 * h);
  }
  return jac;
}

/// Blocks of a two-stage Jacobian.
struct TwoStageBlocks {
  Eigen::MatrixXd g_eta;
  Eigen::MatrixXd g_gamma;
  Eigen::MatrixXd lower_left;
  Eigen::MatrixXd m_gamma;
};

inline TwoStageBlocks split_blocks(const Eigen::MatrixXd& m, std::size_t eta_dim) {
  const auto e = static_cast<Eigen::Index>(eta_dim);
  const auto g = m.rows() - e;
  return {m.topLeftCorner(e, e), m.topRightCorner(e, g), m.bottomLeftCorner(g, e), m.bottomRightCorner(g, g)};
}

inline double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 0.0;
  const double lo = s(s.size() - 1);
  return lo > 0.0 ? s(0) / lo : std::numeric_limits<double>::infinity();
}

struct JacobianResult {
  Eigen::MatrixXd m;    // natural coordinates
  Eigen::MatrixXd m_u;  // unconstrained coordinates
  double condition = 0.0;
  std::optional<TwoStageBlocks> blocks;  // two-stage only, natural coordinates
};

namespace detail {

inline JacobianResult jacobian_at(MomentMode mode, const std::vector<ModelKind>& kinds, const std::vector<double>& u,
                                  std::span<const double> y, const ScoringRule& rule) {
  const IndexRange range{1, y.size()};
  auto mean_moments = [&](const std::vector<double>& at) {
    return column_means(moments_u(mode, kinds, at, y, rule, range));
  };
  JacobianResult r;
  r.m_u = numeric_jacobian(mean_moments, u);
  const Eigen::MatrixXd jac = transform::jacobian(kinds, u);
  const Eigen::MatrixXd jinv = jac.inverse();
  r.m = jinv.transpose() * r.m_u * jinv;
  r.condition = condition_number(r.m_u);
  if (mode == MomentMode::two_stage) {
    const std::size_t eta_dim = kinds.size() - 1;
    const auto bu = split_blocks(r.m_u, eta_dim);
    if (bu.lower_left.cwiseAbs().maxCoeff() != 0.0)
      throw Error("two-stage Jacobian has a nonzero lower-left block");
    r.blocks = split_blocks(r.m, eta_dim);
  }
  return r;
}

}  // namespace detail

/// Jacobian of the sample moment mean. Throws if it is numerically singular.
inline JacobianResult jacobian(MomentMode mode, const ParameterVector& theta, std::span<const double> y,
                               const ScoringRule& rule) {
  const auto u = detail::interior_coordinates(theta);
  auto r = detail::jacobian_at(mode, theta.constituents(), u, y, rule);
  if (!(r.condition <= kMaxConditionNumber))
    throw Error("moment Jacobian is singular (condition number " + format_double(r.condition) + ")");
  return r;
}

struct HacOptions {
  bool prewhiten = false;
  std::optional<double> bandwidth;  // automatic (Andrews AR(1) rule) when empty
  std::size_t max_lag = 0;          // 0: all lags up to 20000 rows, else 100 x bandwidth
  bool psd_repair = true;
};

struct LongRunVariance {
  Eigen::MatrixXd v;
  double bandwidth = 0.0;
  std::size_t lags_used = 0;
  double psd_repair = 0.0;  // Frobenius norm of the removed negative part
};

/// Quadratic-spectral kernel weight.
inline double qs_kernel(double x) {
  if (x == 0.0) return 1.0;
  const double a = 6.0 * kPi * x / 5.0;
  if (std::abs(a) < 1e-2) return 1.0 - a * a / 10.0 + a * a * a * a / 280.0;
  return 25.0 / (12.0 * kPi * kPi * x * x) * (std::sin(a) / a - std::cos(a));
}

/// Andrews (1991) plug-in bandwidth for the QS kernel from per-column AR(1) fits.
inline double andrews_bandwidth(const Eigen::MatrixXd& x) {
  const auto t = x.rows();
  double num = 0.0, den = 0.0;
  for (Eigen::Index a = 0; a < x.cols(); ++a) {
    const Eigen::VectorXd c = x.col(a);
    const double sxx = c.head(t - 1).squaredNorm();
    if (sxx <= 0.0) continue;
    double rho = c.tail(t - 1).dot(c.head(t - 1)) / sxx;
    rho = std::clamp(rho, -0.97, 0.97);
    const double s2 = (c.tail(t - 1) - rho * c.head(t - 1)).squaredNorm() / static_cast<double>(t - 1);
    const double s4 = s2 * s2;
    num += 4.0 * rho * rho * s4 / std::pow(1.0 - rho, 8);
    den += s4 / std::pow(1.0 - rho, 4);
  }
  if (den <= 0.0 || num <= 0.0) return 1.0;
  return 1.3221 * std::pow(num / den * static_cast<double>(t), 0.2);
}

/// HAC estimate of the long-run covariance of the rows of `contributions`
/// (columns are centered first).
inline LongRunVariance long_run_variance(const Eigen::MatrixXd& contributions, const HacOptions& opt = {}) {
  require(contributions.rows() >= 50, "long-run variance needs at least 50 observations");
  Eigen::MatrixXd x = contributions.rowwise() - contributions.colwise().mean();
  const auto k = x.cols();
  Eigen::MatrixXd recolor = Eigen::MatrixXd::Identity(k, k);
  if (opt.prewhiten) {
    const auto t = x.rows();
    const Eigen::MatrixXd lag = x.topRows(t - 1);
    const Eigen::MatrixXd lead = x.bottomRows(t - 1);
    const Eigen::MatrixXd a =
        (lag.transpose() * lag).completeOrthogonalDecomposition().solve(lag.transpose() * lead).transpose();
    x = lead - lag * a.transpose();
    recolor = (Eigen::MatrixXd::Identity(k, k) - a).inverse();
  }
  const auto t = x.rows();
  LongRunVariance out;
  out.bandwidth = opt.bandwidth ? *opt.bandwidth : andrews_bandwidth(x);
  std::size_t max_lag = static_cast<std::size_t>(t - 1);
  if (opt.max_lag > 0) {
    max_lag = std::min(max_lag, opt.max_lag);
  } else if (t > 20000) {
    max_lag = std::min(max_lag, static_cast<std::size_t>(std::ceil(100.0 * out.bandwidth)));
  }
  out.lags_used = max_lag;
  Eigen::MatrixXd v = x.transpose() * x;
  for (std::size_t j = 1; j <= max_lag; ++j) {
    const double w = qs_kernel(static_cast<double>(j) / out.bandwidth);
    if (w == 0.0) continue;
    const auto len = t - static_cast<Eigen::Index>(j);
    const Eigen::MatrixXd gamma = x.bottomRows(len).transpose() * x.topRows(len);
    v += w * (gamma + gamma.transpose());
  }
  v /= static_cast<double>(t);
  v = recolor * v * recolor.transpose();
  v = 0.5 * (v + v.transpose()).eval();
  if (opt.psd_repair) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
    Eigen::VectorXd ev = es.eigenvalues();
    if (ev.minCoeff() < 0.0) {
      const Eigen::VectorXd neg = ev.cwiseMin(0.0);
      out.psd_repair = neg.norm();
      ev = ev.cwiseMax(0.0);
      v = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    }
  }
  out.v = v;
  return out;
}

/// Sandwich covariance of sqrt(n)(estimate - limit), natural coordinates.
struct SandwichCovariance {
  MomentMode mode = MomentMode::one_stage;
  std::size_t n = 0;
  std::vector<std::string> names;
  Eigen::MatrixXd m;  // Jacobian
  Eigen::MatrixXd v;  // long-run covariance of the moments
  Eigen::MatrixXd w;  // M^-1 V M^-1'
  double condition = 0.0;
  double bandwidth = 0.0;
  double psd_repair = 0.0;
  // Two-stage extras.
  std::optional<TwoStageBlocks> blocks;
  Eigen::MatrixXd w_eta_blocks;  // G_eta^-1 V_eta G_eta^-1' assembled from the blocks
  Eigen::MatrixXd w_gamma_gamma;
};

inline SandwichCovariance sandwich(MomentMode mode, const ParameterVector& theta, std::span<const double> y,
                                   const ScoringRule& rule, const HacOptions& hac = {}) {
  const auto u = detail::interior_coordinates(theta);
  const auto& kinds = theta.constituents();
  const IndexRange range{1, y.size()};
  auto jr = detail::jacobian_at(mode, kinds, u, y, rule);
  if (!(jr.condition <= kMaxConditionNumber))
    throw Error("moment Jacobian is singular (condition number " + format_double(jr.condition) + ")");
  const Eigen::MatrixXd qu = detail::moments_u(mode, kinds, u, y, rule, range);
  const auto lrv = long_run_variance(qu, hac);
  const Eigen::MatrixXd minv = jr.m_u.inverse();
  Eigen::MatrixXd w_u = minv * lrv.v * minv.transpose();
  w_u = 0.5 * (w_u + w_u.transpose()).eval();
  const Eigen::MatrixXd jac = transform::jacobian(kinds, u);
  const Eigen::MatrixXd jinv = jac.inverse();

  SandwichCovariance out;
  out.mode = mode;
  out.n = range.size();
  out.names = theta.names();
  out.m = jr.m;
  out.v = jinv.transpose() * lrv.v * jinv;
  out.w = jac * w_u * jac.transpose();
  out.condition = jr.condition;
  out.bandwidth = lrv.bandwidth;
  out.psd_repair = lrv.psd_repair;
  if (mode == MomentMode::two_stage) {
    out.blocks = jr.blocks;
    const std::size_t eta_dim = theta.eta_dim();
    const auto e = static_cast<Eigen::Index>(eta_dim);
    const auto bu = split_blocks(jr.m_u, eta_dim);
    // Influence of the weights: G_eta^-1 (g_t - G_gamma M_gamma^-1 m_t).
    const Eigen::MatrixXd adj = bu.g_gamma * bu.m_gamma.inverse();
    const Eigen::MatrixXd h = qu.leftCols(e) - qu.rightCols(qu.cols() - e) * adj.transpose();
    HacOptions same = hac;
    same.bandwidth = lrv.bandwidth;
    same.psd_repair = false;
    same.max_lag = lrv.lags_used;
    const auto v_eta = long_run_variance(h, same);
    const Eigen::MatrixXd ge_inv = bu.g_eta.inverse();
    const Eigen::MatrixXd j_eta = jac.topLeftCorner(e, e);
    out.w_eta_blocks = j_eta * (ge_inv * v_eta.v * ge_inv.transpose()) * j_eta.transpose();
    out.w_gamma_gamma = out.w.bottomRightCorner(out.w.rows() - e, out.w.cols() - e);
  }
  return out;
}

struct FirstStageGap {
  Eigen::MatrixXd g_gamma;
  double norm = 0.0;  // Frobenius
};

/// G_gamma and its norm: zero means ignoring the first stage leaves second-stage
/// inference valid.
inline FirstStageGap first_stage_irrelevance_gap(const Eigen::MatrixXd& m_star, std::size_t eta_dim) {
  const auto b = split_blocks(m_star, eta_dim);
  return {b.g_gamma, b.g_gamma.norm()};
}

inline FirstStageGap first_stage_irrelevance_gap(const JacobianResult& two_stage) {
  require(two_stage.blocks.has_value(), "first-stage gap needs a two-stage Jacobian");
  return {two_stage.blocks->g_gamma, two_stage.blocks->g_gamma.norm()};
}

}  // namespace poolcast
