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

// Quasi-Newton minimization (BFGS, strong-Wolfe line search) followed by a
// Newton polish on a finite-difference Hessian of the analytic gradient.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace poolcast {

struct OptimizerOptions {
  double grad_tol = 1e-8;
  int max_iter = 500;
};

struct OptimizerResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

namespace detail {

template <typename Fn>
struct Evaluator {
  Fn& fn;
  std::vector<double> xbuf, gbuf;

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    xbuf.assign(x.data(), x.data() + x.size());
    const double f = fn(xbuf, gbuf);
    g = Eigen::Map<const Eigen::VectorXd>(gbuf.data(), static_cast<Eigen::Index>(gbuf.size()));
    if (!std::isfinite(f) || !g.allFinite()) return std::numeric_limits<double>::infinity();
    return f;
  }
};

/// Strong-Wolfe line search (Nocedal & Wright, Alg. 3.5/3.6) with safeguarded
/// quadratic interpolation in the zoom phase. Returns the accepted step or 0.
template <typename Eval>
double wolfe_search(Eval& eval, const Eigen::VectorXd& x, double f0, const Eigen::VectorXd& g0,
                    const Eigen::VectorXd& p, double alpha_init, double& f_out, Eigen::VectorXd& g_out) {
  constexpr double c1 = 1e-4;
  constexpr double c2 = 0.9;
  const double dphi0 = g0.dot(p);
  if (!(dphi0 < 0.0)) return 0.0;

  Eigen::VectorXd g;
  auto phi = [&](double a, double& dphi) {
    const double f = eval(x + a * p, g);
    dphi = std::isfinite(f) ? g.dot(p) : std::numeric_limits<double>::quiet_NaN();
    return f;
  };

  auto zoom = [&](double lo, double f_lo, double dlo, double hi, double f_hi) -> double {
    for (int it = 0; it < 40; ++it) {
      double a;
      const double denom = 2.0 * (f_hi - f_lo - dlo * (hi - lo));
      if (std::isfinite(f_hi) && denom > 0.0) {
        a = lo - dlo * (hi - lo) * (hi - lo) / denom;
      } else {
        a = 0.5 * (lo + hi);
      }
      const double lo_b = std::min(lo, hi), hi_b = std::max(lo, hi);
      const double margin = 0.1 * (hi_b - lo_b);
      if (!(a > lo_b + margin && a < hi_b - margin)) a = 0.5 * (lo + hi);
      double da;
      const double fa = phi(a, da);
      if (!std::isfinite(fa) || fa > f0 + c1 * a * dphi0 || fa >= f_lo) {
        hi = a;
        f_hi = fa;
      } else {
        if (std::abs(da) <= -c2 * dphi0) {
          f_out = fa;
          g_out = g;
          return a;
        }
        if (da * (hi - lo) >= 0.0) {
          hi = lo;
          f_hi = f_lo;
        }
        lo = a;
        f_lo = fa;
        dlo = da;
      }
      if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
    }
    // Accept the best sufficient-decrease point found, if any.
    if (lo > 0.0) {
      double d;
      f_out = phi(lo, d);
      g_out = g;
      return lo;
    }
    return 0.0;
  };

  double a_prev = 0.0, f_prev = f0, d_prev = dphi0;
  double a = alpha_init;
  for (int it = 0; it < 40; ++it) {
    double da;
    const double fa = phi(a, da);
    if (!std::isfinite(fa) || fa > f0 + c1 * a * dphi0 || (it > 0 && fa >= f_prev))
      return zoom(a_prev, f_prev, d_prev, a, fa);
    if (std::abs(da) <= -c2 * dphi0) {
      f_out = fa;
      g_out = g;
      return a;
    }
    if (da >= 0.0) return zoom(a, fa, da, a_prev, f_prev);
    a_prev = a;
    f_prev = fa;
    d_prev = da;
    a *= 2.0;
  }
  return 0.0;
}

}  // namespace detail

/// Minimizes fn(x, grad) -> f. The callback fills grad; non-finite values are
/// treated as +inf so the line search backs away from them.
template <typename Fn>
OptimizerResult minimize_bfgs(Fn&& fn, const std::vector<double>& x0, const OptimizerOptions& opt = {}) {
  detail::Evaluator<std::remove_reference_t<Fn>> eval{fn, {}, {}};
  const auto n = static_cast<Eigen::Index>(x0.size());
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(x0.data(), n);
  Eigen::VectorXd g(n);
  double f = eval(x, g);
  OptimizerResult res;
  if (!std::isfinite(f)) {
    res.x = x0;
    return res;
  }
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  int iter = 0;
  bool fresh = true;
  int stalls = 0;
  for (; iter < opt.max_iter; ++iter) {
    if (g.norm() <= opt.grad_tol) break;
    Eigen::VectorXd p = -h_inv * g;
    if (g.dot(p) >= 0.0) {
      h_inv.setIdentity();
      p = -g;
      fresh = true;
    }
    const double alpha0 = fresh ? std::min(1.0, 1.0 / std::max(g.norm(), 1e-300)) : 1.0;
    double f_new = f;
    Eigen::VectorXd g_new(n);
    const double alpha = detail::wolfe_search(eval, x, f, g, p, alpha0, f_new, g_new);
    if (alpha <= 0.0) {
      if (fresh) break;
      h_inv.setIdentity();
      fresh = true;
      continue;
    }
    const Eigen::VectorXd s = alpha * p;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    const double f_prev = f;
    x += s;
    f = f_new;
    g = g_new;
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (fresh) h_inv *= sy / yv.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);
      h_inv = (ident - rho * s * yv.transpose()) * h_inv * (ident - rho * yv * s.transpose()) +
              rho * s * s.transpose();
      fresh = false;
    }
    stalls = (f_prev - f) <= 1e-15 * std::max(1.0, std::abs(f)) ? stalls + 1 : 0;
    if (stalls >= 5) break;
  }

  // Newton polish. Near the optimum f changes by less than its rounding error,
  // so progress is judged on the gradient norm instead.
  for (int k = 0; k < 8 && g.norm() > opt.grad_tol && iter < opt.max_iter; ++k, ++iter) {
    Eigen::MatrixXd hess(n, n);
    Eigen::VectorXd gp(n), gm(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double step = 1e-5 * std::max(1.0, std::abs(x[i]));
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += step;
      xm[i] -= step;
      if (!std::isfinite(eval(xp, gp)) || !std::isfinite(eval(xm, gm))) {
        hess.resize(0, 0);
        break;
      }
      hess.col(i) = (gp - gm) / (2.0 * step);
    }
    if (hess.size() == 0) break;
    hess = 0.5 * (hess + hess.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    if (llt.info() != Eigen::Success) break;
    const Eigen::VectorXd dx = -llt.solve(g);
    Eigen::VectorXd g_new(n);
    const double f_new = eval(x + dx, g_new);
    if (!std::isfinite(f_new) || g_new.norm() >= g.norm() ||
        f_new > f + 1e-10 * std::max(1.0, std::abs(f)))
      break;
    x += dx;
    f = f_new;
    g = g_new;
  }

  res.x.assign(x.data(), x.data() + n);
  res.f = f;
  res.grad_norm = g.norm();
  res.iterations = iter;
  res.converged = res.grad_norm <= opt.grad_tol;
  return res;
}

}  // namespace poolcast
