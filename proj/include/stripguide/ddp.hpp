// Copyright 2026 The stripguide Authors
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

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "stripguide/common.hpp"

/// Continuous-time constrained differential dynamic programming.
///
/// The value function is expanded to second order in the state and in the
/// terminal-constraint multiplier nu. Its six expansion coefficients are
/// integrated backward with RK4 on the same fixed grid used by the forward
/// rollout; controls are held constant over each step. Path constraints are
/// handled with an augmented Lagrangian whose multipliers live on every
/// quadrature sample (interval start, midpoint and end).
namespace stripguide::ddp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct CostExpansion {
  double value = 0.0;
  VectorXd x;
  VectorXd u;
  MatrixXd xx;
  MatrixXd xu;
  MatrixXd uu;
};

struct DynamicsExpansion {
  VectorXd f;
  MatrixXd fx;
  MatrixXd fu;
};

/// Vector-valued path constraint and its Jacobians (rows are constraints).
struct ConstraintExpansion {
  VectorXd value;
  MatrixXd x;
  MatrixXd u;
};

struct TerminalExpansion {
  double value = 0.0;
  VectorXd x;
  MatrixXd xx;
};

/// Terminal constraint psi(x) = 0 with Jacobian (d x n) and per-row Hessians.
struct TerminalConstraintExpansion {
  VectorXd value;
  MatrixXd x;
  std::vector<MatrixXd> xx;
};

/// Sampled trajectory. x has steps+1 nodes, u and x_mid have one entry per
/// step; u[k] is held over [t[k], t[k+1]).
struct Trajectory {
  std::vector<double> t;
  std::vector<VectorXd> x;
  std::vector<VectorXd> x_mid;
  std::vector<VectorXd> u;

  std::size_t steps() const { return u.size(); }
};

using RunningFn = std::function<double(double, const VectorXd&, const VectorXd&)>;
using RunningExpansionFn =
    std::function<CostExpansion(double, const VectorXd&, const VectorXd&)>;
using DynamicsFn = std::function<VectorXd(double, const VectorXd&, const VectorXd&)>;
using DynamicsExpansionFn =
    std::function<DynamicsExpansion(double, const VectorXd&, const VectorXd&)>;
using PathFn = std::function<VectorXd(double, const VectorXd&, const VectorXd&)>;
using PathExpansionFn =
    std::function<ConstraintExpansion(double, const VectorXd&, const VectorXd&)>;

/// Optimal control problem on a fixed horizon with a fixed step.
///
/// Optional callbacks may be left empty: no terminal cost, no terminal
/// constraint (d = 0), no path constraints. `refresh` runs before every
/// iteration with the current nominal trajectory and may retune the cost.
struct Problem {
  int n = 0;
  int m = 0;
  int d = 0;
  int num_inequality = 0;
  int num_equality = 0;
  double t0 = 0.0;
  double tf = 0.0;
  double dt = 0.0;
  VectorXd x0;

  DynamicsFn dynamics;
  DynamicsExpansionFn dynamics_expansion;
  RunningFn running_cost;
  RunningExpansionFn running_cost_expansion;
  std::function<double(const VectorXd&)> terminal_cost;
  std::function<TerminalExpansion(const VectorXd&)> terminal_cost_expansion;
  std::function<VectorXd(const VectorXd&)> terminal_constraint;
  std::function<TerminalConstraintExpansion(const VectorXd&)>
      terminal_constraint_expansion;
  PathFn inequality;
  PathExpansionFn inequality_expansion;
  PathFn equality;
  PathExpansionFn equality_expansion;
  std::function<void(const Trajectory&)> refresh;

  std::size_t steps() const {
    return static_cast<std::size_t>(std::llround((tf - t0) / dt));
  }

  void validate() const {
    if (n <= 0 || m <= 0 || d < 0 || num_inequality < 0 || num_equality < 0) {
      throw ValidationError("problem dimensions must be positive");
    }
    if (!(dt > 0.0) || !(tf > t0)) {
      throw ValidationError("problem needs tf > t0 and dt > 0");
    }
    const double ratio = (tf - t0) / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
      throw ValidationError("horizon must be an integer number of steps");
    }
    if (x0.size() != n) {
      throw ValidationError("initial state has the wrong dimension");
    }
    if (!dynamics || !dynamics_expansion || !running_cost || !running_cost_expansion) {
      throw ValidationError("dynamics and running cost callbacks are required");
    }
    if (d > 0 && (!terminal_constraint || !terminal_constraint_expansion)) {
      throw ValidationError("terminal constraint callbacks are required when d > 0");
    }
    if (num_inequality > 0 && (!inequality || !inequality_expansion)) {
      throw ValidationError("inequality callbacks are required");
    }
    if (num_equality > 0 && (!equality || !equality_expansion)) {
      throw ValidationError("equality callbacks are required");
    }
  }
};

/// Quadrature sample inside one step: 0 start, 1 midpoint, 2 end.
inline constexpr int kSamplesPerStep = 3;
inline constexpr double kSimpsonWeights[kSamplesPerStep] = {1.0 / 6.0, 4.0 / 6.0,
                                                            1.0 / 6.0};

inline double sample_time(const Trajectory& tr, std::size_t k, int j) {
  return tr.t[k] + 0.5 * j * (tr.t[k + 1] - tr.t[k]);
}

inline const VectorXd& sample_state(const Trajectory& tr, std::size_t k, int j) {
  return j == 0 ? tr.x[k] : (j == 1 ? tr.x_mid[k] : tr.x[k + 1]);
}

/// Augmented Lagrangian multipliers and penalties, one entry per sample.
struct AlState {
  std::vector<VectorXd> lambda;
  std::vector<VectorXd> mu;
  std::vector<VectorXd> eta;
  std::vector<VectorXd> kappa;
  double gamma = 1.1;
};

inline AlState make_al_state(const Problem& p, double lambda0 = 0.0, double mu0 = 1.0,
                             double kappa0 = 1.0, double gamma = 1.1) {
  const std::size_t samples = p.steps() * kSamplesPerStep;
  AlState al;
  al.gamma = gamma;
  al.lambda.assign(samples, VectorXd::Constant(p.num_inequality, lambda0));
  al.mu.assign(samples, VectorXd::Constant(p.num_inequality, mu0));
  al.eta.assign(samples, VectorXd::Zero(p.num_equality));
  al.kappa.assign(samples, VectorXd::Constant(p.num_equality, kappa0));
  return al;
}

/// Path-constraint values on every sample of a trajectory.
struct ConstraintSamples {
  std::vector<VectorXd> g;
  std::vector<VectorXd> h;

  double max_inequality() const {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& v : g) {
      if (v.size() > 0) worst = std::max(worst, v.maxCoeff());
    }
    return worst;
  }

  double max_abs_equality() const {
    double worst = 0.0;
    for (const auto& v : h) {
      if (v.size() > 0) worst = std::max(worst, v.cwiseAbs().maxCoeff());
    }
    return worst;
  }
};

inline ConstraintSamples evaluate_constraints(const Problem& p, const Trajectory& tr) {
  ConstraintSamples out;
  const std::size_t samples = tr.steps() * kSamplesPerStep;
  out.g.assign(samples, VectorXd());
  out.h.assign(samples, VectorXd());
  for (std::size_t k = 0; k < tr.steps(); ++k) {
    for (int j = 0; j < kSamplesPerStep; ++j) {
      const std::size_t i = k * kSamplesPerStep + j;
      const double t = sample_time(tr, k, j);
      const VectorXd& x = sample_state(tr, k, j);
      if (p.num_inequality > 0) out.g[i] = p.inequality(t, x, tr.u[k]);
      if (p.num_equality > 0) out.h[i] = p.equality(t, x, tr.u[k]);
    }
  }
  return out;
}

/// Multiplier update followed by the geometric penalty increase.
inline AlState update_al(const AlState& al, const std::vector<VectorXd>& g_values,
                         const std::vector<VectorXd>& h_values) {
  AlState next = al;
  for (std::size_t i = 0; i < al.lambda.size(); ++i) {
    if (al.lambda[i].size() > 0) {
      next.lambda[i] = (al.lambda[i] + al.mu[i].cwiseProduct(g_values[i])).cwiseMax(0.0);
      next.mu[i] = al.gamma * al.mu[i];
    }
  }
  for (std::size_t i = 0; i < al.eta.size(); ++i) {
    if (al.eta[i].size() > 0) {
      next.eta[i] = al.eta[i] + al.kappa[i].cwiseProduct(h_values[i]);
      next.kappa[i] = al.gamma * al.kappa[i];
    }
  }
  return next;
}

/// Active-set indicator: the penalty applies when violated or when the
/// multiplier is still positive.
inline bool penalty_active(double g, double lambda) { return g >= 0.0 || lambda > 0.0; }

inline double penalty_value(const VectorXd& g, const VectorXd& lambda, const VectorXd& mu,
                            const VectorXd& h, const VectorXd& eta, const VectorXd& kappa) {
  double value = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    value += lambda[i] * g[i];
    if (penalty_active(g[i], lambda[i])) value += mu[i] * g[i] * g[i];
  }
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    value += eta[i] * h[i] + kappa[i] * h[i] * h[i];
  }
  return value;
}

/// Adds the augmented Lagrangian terms to a running-cost expansion. Second
/// derivatives of the constraints are dropped (Gauss-Newton).
inline void augment(CostExpansion& c, const ConstraintExpansion& g, const VectorXd& lambda,
                    const VectorXd& mu, const ConstraintExpansion& h, const VectorXd& eta,
                    const VectorXd& kappa) {
  for (Eigen::Index i = 0; i < g.value.size(); ++i) {
    const double gi = g.value[i];
    const bool active = penalty_active(gi, lambda[i]);
    const double w = lambda[i] + (active ? 2.0 * mu[i] * gi : 0.0);
    c.value += lambda[i] * gi + (active ? mu[i] * gi * gi : 0.0);
    c.x += w * g.x.row(i).transpose();
    c.u += w * g.u.row(i).transpose();
    if (active) {
      const double two_mu = 2.0 * mu[i];
      c.xx += two_mu * g.x.row(i).transpose() * g.x.row(i);
      c.xu += two_mu * g.x.row(i).transpose() * g.u.row(i);
      c.uu += two_mu * g.u.row(i).transpose() * g.u.row(i);
    }
  }
  for (Eigen::Index i = 0; i < h.value.size(); ++i) {
    const double hi = h.value[i];
    const double w = eta[i] + 2.0 * kappa[i] * hi;
    const double two_kappa = 2.0 * kappa[i];
    c.value += eta[i] * hi + kappa[i] * hi * hi;
    c.x += w * h.x.row(i).transpose();
    c.u += w * h.u.row(i).transpose();
    c.xx += two_kappa * h.x.row(i).transpose() * h.x.row(i);
    c.xu += two_kappa * h.x.row(i).transpose() * h.u.row(i);
    c.uu += two_kappa * h.u.row(i).transpose() * h.u.row(i);
  }
}

// ---------------------------------------------------------------------------
// Forward pass

namespace detail {

inline VectorXd checked(VectorXd v) {
  if (!v.allFinite()) {
    throw DivergenceError("rollout produced a non-finite state");
  }
  return v;
}

inline VectorXd rk4(const Problem& p, double t, const VectorXd& x, const VectorXd& u,
                    double h) {
  const VectorXd k1 = p.dynamics(t, x, u);
  const VectorXd k2 = p.dynamics(t + 0.5 * h, x + 0.5 * h * k1, u);
  const VectorXd k3 = p.dynamics(t + 0.5 * h, x + 0.5 * h * k2, u);
  const VectorXd k4 = p.dynamics(t + h, x + h * k3, u);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline Trajectory empty_trajectory(const Problem& p) {
  const std::size_t steps = p.steps();
  Trajectory tr;
  tr.t.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    tr.t[k] = p.t0 + static_cast<double>(k) * p.dt;
  }
  tr.t[steps] = p.tf;
  tr.x.resize(steps + 1);
  tr.x_mid.resize(steps);
  tr.u.resize(steps);
  return tr;
}

}  // namespace detail

/// Integrates the dynamics from x0 under zero-order-hold controls.
inline Trajectory forward_rollout(const Problem& p, const std::vector<VectorXd>& controls,
                                  const VectorXd& x0) {
  if (controls.size() != p.steps()) {
    throw ValidationError("control sequence length does not match the grid");
  }
  Trajectory tr = detail::empty_trajectory(p);
  tr.x[0] = detail::checked(x0);
  for (std::size_t k = 0; k < controls.size(); ++k) {
    const double h = tr.t[k + 1] - tr.t[k];
    tr.u[k] = controls[k];
    tr.x_mid[k] = detail::checked(detail::rk4(p, tr.t[k], tr.x[k], controls[k], 0.5 * h));
    tr.x[k + 1] = detail::checked(detail::rk4(p, tr.t[k], tr.x[k], controls[k], h));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Cost

struct CostBreakdown {
  double running = 0.0;      // integral of L
  double penalty = 0.0;      // integral of the augmented Lagrangian terms
  double terminal = 0.0;     // phi(x(tf))
  double multiplier = 0.0;   // nu' psi(x(tf))
  VectorXd psi;

  double objective() const { return running + terminal; }
  double augmented() const { return running + penalty + terminal + multiplier; }
};

/// Simpson quadrature on every step, matching what the RK4 backward sweep
/// integrates for the running cost.
inline CostBreakdown evaluate_cost(const Problem& p, const Trajectory& tr, const VectorXd& nu,
                                   const AlState* al = nullptr) {
  CostBreakdown c;
  const bool constrained = al != nullptr && (p.num_inequality > 0 || p.num_equality > 0);
  const VectorXd none;
  for (std::size_t k = 0; k < tr.steps(); ++k) {
    const double h = tr.t[k + 1] - tr.t[k];
    for (int j = 0; j < kSamplesPerStep; ++j) {
      const double t = sample_time(tr, k, j);
      const VectorXd& x = sample_state(tr, k, j);
      const double w = kSimpsonWeights[j] * h;
      c.running += w * p.running_cost(t, x, tr.u[k]);
      if (constrained) {
        const std::size_t i = k * kSamplesPerStep + j;
        const VectorXd g = p.num_inequality > 0 ? p.inequality(t, x, tr.u[k]) : none;
        const VectorXd hv = p.num_equality > 0 ? p.equality(t, x, tr.u[k]) : none;
        c.penalty += w * penalty_value(g, al->lambda[i], al->mu[i], hv, al->eta[i],
                                       al->kappa[i]);
      }
    }
  }
  const VectorXd& xf = tr.x.back();
  if (p.terminal_cost) c.terminal = p.terminal_cost(xf);
  if (p.d > 0) {
    c.psi = p.terminal_constraint(xf);
    c.multiplier = nu.dot(c.psi);
  } else {
    c.psi = VectorXd();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Backward sweep

/// Second-order expansion of V(x, nu, t) on every grid node.
struct ValueExpansion {
  std::vector<double> V;
  std::vector<VectorXd> V_x;
  std::vector<VectorXd> V_nu;
  std::vector<MatrixXd> V_xx;
  std::vector<MatrixXd> V_xnu;
  std::vector<MatrixXd> V_nunu;
};

/// Feedback gains per step: du = beta_u + beta_x dx + beta_nu dnu.
struct Gains {
  std::vector<VectorXd> beta_u;
  std::vector<MatrixXd> beta_x;
  std::vector<MatrixXd> beta_nu;
};

struct RegularizationParams {
  double initial = 1e-8;
  double factor = 10.0;
  double max = 1e2;
};

struct SweepResult {
  ValueExpansion value;
  Gains gains;
  /// Predicted change of the cost from the control correction alone
  /// (V(t0) minus the augmented nominal cost); never positive.
  double expected_control_change = 0.0;
  double max_regularization = 0.0;
};

namespace detail {

/// Node values of the expansion.
struct ValueState {
  double V = 0.0;
  VectorXd Vx;
  VectorXd Vnu;
  MatrixXd Vxx;
  MatrixXd Vxnu;
  MatrixXd Vnunu;
};

/// Expansion of the cost-to-go inside one step, with the held control u_k
/// treated as a free parameter. Nothing inside the step depends on nu, so
/// W_nu and W_nunu stay at their values from the step end.
struct StepState {
  double W = 0.0;
  VectorXd Wx;
  VectorXd Wu;
  MatrixXd Wxx;
  MatrixXd Wxu;
  MatrixXd Wuu;
  MatrixXd Wxnu;
  MatrixXd Wunu;

  StepState plus(double s, const StepState& o) const {
    return {W + s * o.W,       Wx + s * o.Wx,     Wu + s * o.Wu,
            Wxx + s * o.Wxx,   Wxu + s * o.Wxu,   Wuu + s * o.Wuu,
            Wxnu + s * o.Wxnu, Wunu + s * o.Wunu};
  }
};

struct NodeGains {
  VectorXd beta_u;
  MatrixXd beta_x;
  MatrixXd beta_nu;
  double regularization = 0.0;
  double control_change = 0.0;
};

/// Augmented running cost and dynamics expansions at one sample point.
struct PointModel {
  CostExpansion cost;
  DynamicsExpansion dyn;
};

inline PointModel point_model(const Problem& p, const AlState& al, std::size_t sample,
                              double t, const VectorXd& x, const VectorXd& u) {
  PointModel pm{p.running_cost_expansion(t, x, u), p.dynamics_expansion(t, x, u)};
  if (p.num_inequality > 0 || p.num_equality > 0) {
    ConstraintExpansion g{VectorXd(), MatrixXd(0, p.n), MatrixXd(0, p.m)};
    ConstraintExpansion h{VectorXd(), MatrixXd(0, p.n), MatrixXd(0, p.m)};
    if (p.num_inequality > 0) g = p.inequality_expansion(t, x, u);
    if (p.num_equality > 0) h = p.equality_expansion(t, x, u);
    augment(pm.cost, g, al.lambda[sample], al.mu[sample], h, al.eta[sample],
            al.kappa[sample]);
  }
  return pm;
}

/// Right-hand side of the in-step expansion, d/d(tf - t).
inline StepState step_rhs(const PointModel& pm, const StepState& y) {
  const auto& c = pm.cost;
  const MatrixXd fxT = pm.dyn.fx.transpose();
  const MatrixXd fuT = pm.dyn.fu.transpose();
  const MatrixXd WxxFx = y.Wxx * pm.dyn.fx;
  const MatrixXd FuWxu = fuT * y.Wxu;
  StepState dy;
  dy.W = c.value;
  dy.Wx = c.x + fxT * y.Wx;
  dy.Wu = c.u + fuT * y.Wx;
  dy.Wxx = c.xx + WxxFx + WxxFx.transpose();
  dy.Wxu = c.xu + fxT * y.Wxu + y.Wxx * pm.dyn.fu;
  dy.Wuu = c.uu + FuWxu + FuWxu.transpose();
  dy.Wxnu = fxT * y.Wxnu;
  dy.Wunu = fuT * y.Wxnu;
  return dy;
}

/// Minimizes the step expansion over the held control and returns the node
/// expansion at the step start.
///
/// The shift is delta * scale * I with scale = max(h, |W_uu|): W_uu
/// approximates h * Q_uu, so this is delta relative to the larger of 1 and
/// |Q_uu|, keeping the schedule meaningful whatever the cost units.
inline ValueState minimize_control(const StepState& y, const MatrixXd& Wnunu_in,
                                   const VectorXd& Wnu, double h,
                                   const RegularizationParams& reg, NodeGains& g) {
  const Eigen::Index m = y.Wu.size();
  const Eigen::Index d = Wnu.size();
  const MatrixXd Wuu_raw = 0.5 * (y.Wuu + y.Wuu.transpose());
  const double scale = std::max(h, Wuu_raw.cwiseAbs().maxCoeff());

  double delta = reg.initial;
  MatrixXd Quu;
  Eigen::LLT<MatrixXd> llt;
  while (true) {
    Quu = Wuu_raw + delta * scale * MatrixXd::Identity(m, m);
    llt.compute(Quu);
    if (llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > 0.0).all()) {
      break;
    }
    delta *= reg.factor;
    if (delta > reg.max * (1.0 + 1e-12)) {
      throw SweepFailure("Q_uu is not positive definite after maximum regularization");
    }
  }

  const MatrixXd Wux = y.Wxu.transpose();
  g.beta_u = -llt.solve(y.Wu);
  g.beta_x = -llt.solve(Wux);
  g.beta_nu = d > 0 ? MatrixXd(-llt.solve(y.Wunu)) : MatrixXd(m, 0);
  g.regularization = delta;
  const auto& bu = g.beta_u;
  const auto& bx = g.beta_x;
  const auto& bnu = g.beta_nu;

  ValueState v;
  g.control_change = y.Wu.dot(bu) + 0.5 * bu.dot(Quu * bu);
  v.V = y.W + g.control_change;
  v.Vx = y.Wx + bx.transpose() * y.Wu + y.Wxu * bu + bx.transpose() * (Quu * bu);
  const MatrixXd WxuBx = y.Wxu * bx;
  v.Vxx = y.Wxx + WxuBx + WxuBx.transpose() + bx.transpose() * Quu * bx;
  v.Vxx = 0.5 * (v.Vxx + v.Vxx.transpose());
  if (d > 0) {
    v.Vnu = Wnu + bnu.transpose() * y.Wu + bnu.transpose() * (Quu * bu) +
            y.Wunu.transpose() * bu;
    v.Vxnu = y.Wxnu + y.Wxu * bnu + bx.transpose() * y.Wunu + bx.transpose() * Quu * bnu;
    const MatrixXd WnuuBnu = y.Wunu.transpose() * bnu;
    v.Vnunu = Wnunu_in + WnuuBnu + WnuuBnu.transpose() + bnu.transpose() * Quu * bnu;
    v.Vnunu = 0.5 * (v.Vnunu + v.Vnunu.transpose());
  } else {
    v.Vnu = VectorXd::Zero(0);
    v.Vxnu = MatrixXd::Zero(y.Wx.size(), 0);
    v.Vnunu = MatrixXd::Zero(0, 0);
  }
  return v;
}

inline ValueState terminal_value(const Problem& p, const VectorXd& xf, const VectorXd& nu) {
  ValueState y;
  y.V = 0.0;
  y.Vx = VectorXd::Zero(p.n);
  y.Vxx = MatrixXd::Zero(p.n, p.n);
  if (p.terminal_cost_expansion) {
    const TerminalExpansion te = p.terminal_cost_expansion(xf);
    y.V = te.value;
    y.Vx = te.x;
    y.Vxx = te.xx;
  } else if (p.terminal_cost) {
    y.V = p.terminal_cost(xf);
  }
  if (p.d > 0) {
    const TerminalConstraintExpansion ce = p.terminal_constraint_expansion(xf);
    y.V += nu.dot(ce.value);
    y.Vx += ce.x.transpose() * nu;
    for (int i = 0; i < p.d; ++i) {
      if (static_cast<std::size_t>(i) < ce.xx.size() && ce.xx[i].size() > 0) {
        y.Vxx += nu[i] * ce.xx[i];
      }
    }
    y.Vnu = ce.value;
    y.Vxnu = ce.x.transpose();
    y.Vnunu = MatrixXd::Zero(p.d, p.d);
  } else {
    y.Vnu = VectorXd::Zero(0);
    y.Vxnu = MatrixXd::Zero(p.n, 0);
    y.Vnunu = MatrixXd::Zero(0, 0);
  }
  y.Vxx = 0.5 * (y.Vxx + y.Vxx.transpose());
  return y;
}

}  // namespace detail

/// Integrates the value expansion backward from tf and stores the feedback
/// gains at every step start.
///
/// Within a step the held control is a parameter of the expansion; its
/// first- and second-order sensitivities are integrated with RK4 alongside
/// V_x and V_xx, and the control correction is chosen at the step start.
/// This keeps the predicted change consistent with zero-order-hold rollouts
/// at any step size.
inline SweepResult backward_sweep(const Problem& p, const Trajectory& tr, const VectorXd& nu,
                                  const AlState& al, const RegularizationParams& reg = {}) {
  const std::size_t steps = tr.steps();
  SweepResult out;
  auto& v = out.value;
  v.V.resize(steps + 1);
  v.V_x.resize(steps + 1);
  v.V_nu.resize(steps + 1);
  v.V_xx.resize(steps + 1);
  v.V_xnu.resize(steps + 1);
  v.V_nunu.resize(steps + 1);
  out.gains.beta_u.resize(steps);
  out.gains.beta_x.resize(steps);
  out.gains.beta_nu.resize(steps);

  auto store = [&v](std::size_t k, const detail::ValueState& y) {
    v.V[k] = y.V;
    v.V_x[k] = y.Vx;
    v.V_nu[k] = y.Vnu;
    v.V_xx[k] = y.Vxx;
    v.V_xnu[k] = y.Vxnu;
    v.V_nunu[k] = y.Vnunu;
  };

  detail::ValueState node = detail::terminal_value(p, tr.x.back(), nu);
  store(steps, node);

  for (std::size_t kk = steps; kk-- > 0;) {
    const double h = tr.t[kk + 1] - tr.t[kk];
    const VectorXd& u = tr.u[kk];
    const std::size_t base = kk * kSamplesPerStep;
    const auto end_model = detail::point_model(p, al, base + 2, tr.t[kk + 1], tr.x[kk + 1], u);
    const auto mid_model =
        detail::point_model(p, al, base + 1, sample_time(tr, kk, 1), tr.x_mid[kk], u);
    const auto start_model = detail::point_model(p, al, base, tr.t[kk], tr.x[kk], u);

    detail::StepState y{node.V,
                        node.Vx,
                        VectorXd::Zero(p.m),
                        node.Vxx,
                        MatrixXd::Zero(p.n, p.m),
                        MatrixXd::Zero(p.m, p.m),
                        node.Vxnu,
                        MatrixXd::Zero(p.m, p.d)};
    const auto k1 = detail::step_rhs(end_model, y);
    const auto k2 = detail::step_rhs(mid_model, y.plus(0.5 * h, k1));
    const auto k3 = detail::step_rhs(mid_model, y.plus(0.5 * h, k2));
    const auto k4 = detail::step_rhs(start_model, y.plus(h, k3));
    y = y.plus(h / 6.0, k1.plus(2.0, k2).plus(2.0, k3).plus(1.0, k4));
    if (!std::isfinite(y.W) || !y.Wx.allFinite() || !y.Wxx.allFinite() ||
        !y.Wuu.allFinite()) {
      throw SweepFailure("backward sweep produced non-finite values");
    }

    detail::NodeGains g;
    node = detail::minimize_control(y, node.Vnunu, node.Vnu, h, reg, g);
    store(kk, node);
    out.gains.beta_u[kk] = g.beta_u;
    out.gains.beta_x[kk] = g.beta_x;
    out.gains.beta_nu[kk] = g.beta_nu;
    out.max_regularization = std::max(out.max_regularization, g.regularization);
    out.expected_control_change += g.control_change;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Updates

struct NuStep {
  VectorXd full;     // minimizer of the quadratic model
  VectorXd applied;  // k_nu * full
  double expected_change = 0.0;
  bool regularized = false;
};

/// Multiplier correction from the value expansion at t0.
inline NuStep update_nu(const ValueExpansion& value, double k_nu) {
  NuStep out;
  const VectorXd& Vnu = value.V_nu.front();
  const MatrixXd& Vnunu = value.V_nunu.front();
  const Eigen::Index d = Vnu.size();
  if (d == 0) {
    out.full = out.applied = VectorXd::Zero(0);
    return out;
  }
  // V is concave in nu; factor -V_nunu and shift it if it is not definite.
  const MatrixXd neg = -0.5 * (Vnunu + Vnunu.transpose());
  const double scale = std::max(1.0, neg.cwiseAbs().maxCoeff());
  double delta = 0.0;
  Eigen::LLT<MatrixXd> llt(neg);
  const double min_pivot = 1e-12 * scale;
  auto ok = [&]() {
    return llt.info() == Eigen::Success &&
           (llt.matrixLLT().diagonal().array() > std::sqrt(min_pivot)).all();
  };
  while (!ok()) {
    delta = delta == 0.0 ? 1e-8 * scale : delta * 10.0;
    llt.compute(neg + delta * MatrixXd::Identity(d, d));
    out.regularized = true;
  }
  out.full = llt.solve(Vnu);
  out.applied = k_nu * out.full;
  out.expected_change = Vnu.dot(out.full) + 0.5 * out.full.dot(Vnunu * out.full);
  return out;
}

/// Forward pass with the corrected controls:
/// u = u_bar + k_u (beta_u + beta_x dx + beta_nu dnu), dx against the nominal.
inline Trajectory update_controls(const Problem& p, const Trajectory& nominal,
                                  const Gains& gains, const VectorXd& dnu, double k_u) {
  Trajectory tr = detail::empty_trajectory(p);
  tr.x[0] = nominal.x[0];
  for (std::size_t k = 0; k < nominal.steps(); ++k) {
    const VectorXd dx = tr.x[k] - nominal.x[k];
    VectorXd du = gains.beta_u[k] + gains.beta_x[k] * dx;
    if (dnu.size() > 0) du += gains.beta_nu[k] * dnu;
    tr.u[k] = nominal.u[k] + k_u * du;
    if (!tr.u[k].allFinite()) {
      throw DivergenceError("control update produced non-finite values");
    }
    const double h = tr.t[k + 1] - tr.t[k];
    tr.x_mid[k] = detail::checked(detail::rk4(p, tr.t[k], tr.x[k], tr.u[k], 0.5 * h));
    tr.x[k + 1] = detail::checked(detail::rk4(p, tr.t[k], tr.x[k], tr.u[k], h));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Driver

struct SolverParams {
  double k_u = 0.5;
  double k_nu = 0.5;
  double gamma = 1.1;
  double eps_V = 1e-6;
  double eps_g = 1e-6;
  double eps_h = 1e-6;
  double eps_psi = 1e-9;
  int max_iterations = 200;
  double min_step = 1e-4;
  double lambda0 = 0.0;
  double mu0 = 1.0;
  double kappa0 = 1.0;
  RegularizationParams regularization;

  void validate() const {
    if (!(k_u > 0.0 && k_u <= 1.0)) throw ValidationError("k_u must lie in (0, 1]");
    if (!(k_nu >= 0.0 && k_nu <= 1.0)) throw ValidationError("k_nu must lie in [0, 1]");
    if (!(gamma > 1.0)) throw ValidationError("gamma must exceed 1");
    if (!(eps_V > 0.0 && eps_g > 0.0 && eps_h > 0.0 && eps_psi > 0.0)) {
      throw ValidationError("tolerances must be positive");
    }
    if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
    if (!(min_step > 0.0 && min_step <= k_u)) {
      throw ValidationError("min_step must lie in (0, k_u]");
    }
    if (!(mu0 > 0.0 && kappa0 > 0.0 && lambda0 >= 0.0)) {
      throw ValidationError("initial penalties must be positive");
    }
  }
};

/// One row of the solver trace.
struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;             // objective after the iteration
  double augmented_before = 0.0; // merit of the nominal, with the updated nu
  double augmented_after = 0.0;  // merit of the accepted trajectory
  double psi_norm = 0.0;
  double max_g = 0.0;
  double max_h = 0.0;
  double delta_v = 0.0;
  double step = 0.0;             // accepted k_u, 0 when nothing improved
  double regularization = 0.0;
  double min_lambda = 0.0;
  double max_asymmetry = 0.0;    // worst |A - A'| over V_xx, V_nunu
};

enum class Status { kConverged, kMaxIterations };

struct Solution {
  Trajectory trajectory;
  VectorXd nu;
  AlState al;
  int iterations = 0;
  bool converged = false;
  Status status = Status::kMaxIterations;
  std::vector<IterationRecord> history;
  std::vector<std::string> warnings;
};

inline double max_asymmetry(const ValueExpansion& v) {
  double worst = 0.0;
  for (const auto& a : v.V_xx) worst = std::max(worst, (a - a.transpose()).cwiseAbs().maxCoeff());
  for (const auto& a : v.V_nunu) {
    if (a.size() > 0) worst = std::max(worst, (a - a.transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

/// Constrained DDP main loop.
///
/// Each iteration: sweep around the nominal, update nu, line-search the
/// control correction on the augmented cost (halving k_u on increase), then
/// update the path-constraint multipliers and penalties.
inline Solution solve(const Problem& p, const std::vector<VectorXd>& initial_controls,
                      const VectorXd& initial_nu, const SolverParams& params,
                      const std::function<void(const IterationRecord&)>& on_iteration = {}) {
  p.validate();
  params.validate();
  if (initial_nu.size() != p.d) {
    throw ValidationError("initial multiplier has the wrong dimension");
  }

  Solution sol;
  sol.nu = initial_nu;
  sol.al = make_al_state(p, params.lambda0, params.mu0, params.kappa0, params.gamma);
  sol.trajectory = forward_rollout(p, initial_controls, p.x0);
  const bool has_path = p.num_inequality > 0 || p.num_equality > 0;

  for (int it = 1; it <= params.max_iterations; ++it) {
    if (p.refresh) p.refresh(sol.trajectory);
    const Trajectory& nominal = sol.trajectory;

    const SweepResult sweep = backward_sweep(p, nominal, sol.nu, sol.al, params.regularization);
    const NuStep nu_step = update_nu(sweep.value, params.k_nu);
    if (nu_step.regularized) {
      sol.warnings.push_back("iteration " + std::to_string(it) +
                             ": V_nunu(t0) singular, regularized inverse used");
    }
    const double delta_v = sweep.expected_control_change + nu_step.expected_change;
    const VectorXd nu_next = sol.nu + nu_step.applied;

    const CostBreakdown nominal_cost = evaluate_cost(p, nominal, nu_next, &sol.al);
    const double merit_nominal = nominal_cost.augmented();
    const double merit_tolerance = 1e-13 * (1.0 + std::abs(merit_nominal));
    const double psi_nominal = p.d > 0 ? nominal_cost.psi.norm() : 0.0;
    std::optional<Trajectory> best;
    double best_merit = merit_nominal;
    double accepted_step = 0.0;
    for (double step = params.k_u; step >= params.min_step * (1.0 - 1e-12); step *= 0.5) {
      try {
        Trajectory cand = update_controls(p, nominal, sweep.gains, nu_step.full, step);
        const CostBreakdown cand_cost = evaluate_cost(p, cand, nu_next, &sol.al);
        const double merit = cand_cost.augmented();
        // Near a solution the merit change falls below roundoff; still take
        // steps that reduce the terminal violation without raising the merit.
        const bool flat = merit <= merit_nominal + merit_tolerance &&
                          p.d > 0 && cand_cost.psi.norm() < psi_nominal;
        if (std::isfinite(merit) && (merit < best_merit || flat)) {
          best = std::move(cand);
          best_merit = merit;
          accepted_step = step;
          break;
        }
      } catch (const DivergenceError&) {
        // rejected; shrink
      }
    }
    if (best) sol.trajectory = std::move(*best);
    sol.nu = nu_next;

    const CostBreakdown cost = evaluate_cost(p, sol.trajectory, sol.nu);
    IterationRecord rec;
    rec.iteration = it;
    rec.cost = cost.objective();
    rec.augmented_before = merit_nominal;
    rec.augmented_after = best_merit;
    rec.psi_norm = p.d > 0 ? cost.psi.norm() : 0.0;
    rec.delta_v = delta_v;
    rec.step = accepted_step;
    rec.regularization = sweep.max_regularization;
    rec.max_asymmetry = max_asymmetry(sweep.value);

    ConstraintSamples cs;
    if (has_path) {
      cs = evaluate_constraints(p, sol.trajectory);
      rec.max_g = p.num_inequality > 0 ? cs.max_inequality() : 0.0;
      rec.max_h = cs.max_abs_equality();
      sol.al = update_al(sol.al, cs.g, cs.h);
    }
    double min_lambda = 0.0;
    bool first = true;
    for (const auto& l : sol.al.lambda) {
      if (l.size() == 0) continue;
      min_lambda = first ? l.minCoeff() : std::min(min_lambda, l.minCoeff());
      first = false;
    }
    rec.min_lambda = min_lambda;
    sol.history.push_back(rec);
    sol.iterations = it;
    if (on_iteration) on_iteration(rec);

    const bool done = std::abs(delta_v) <= params.eps_V && rec.psi_norm <= params.eps_psi &&
                      rec.max_g <= params.eps_g && rec.max_h <= params.eps_h;
    if (done) {
      sol.converged = true;
      sol.status = Status::kConverged;
      break;
    }
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Finite-difference expansions

/// Central-difference step sizes; each step is scaled by max(1, |value|).
struct FdSteps {
  double x_gradient = 1e-7;
  double u_gradient = 1e-9;
  double x_hessian = 1e-5;
  double u_hessian = 1e-7;
};

namespace detail {

inline double scaled(double base, double v) { return base * std::max(1.0, std::abs(v)); }

}  // namespace detail

/// Gradient and Hessian of a scalar running cost by central differences.
inline CostExpansion fd_cost_expansion(const RunningFn& fn, double t, const VectorXd& x,
                                       const VectorXd& u, const FdSteps& steps = {}) {
  const Eigen::Index n = x.size();
  const Eigen::Index m = u.size();
  // Stack (x, u) to share one loop.
  VectorXd z(n + m);
  z << x, u;
  auto eval = [&](const VectorXd& zz) { return fn(t, zz.head(n), zz.tail(m)); };
  auto grad_step = [&](Eigen::Index i) {
    return i < n ? detail::scaled(steps.x_gradient, z[i])
                 : detail::scaled(steps.u_gradient, z[i]);
  };
  auto hess_step = [&](Eigen::Index i) {
    return i < n ? detail::scaled(steps.x_hessian, z[i])
                 : detail::scaled(steps.u_hessian, z[i]);
  };

  CostExpansion c;
  c.value = eval(z);
  VectorXd grad(n + m);
  for (Eigen::Index i = 0; i < n + m; ++i) {
    const double hi = grad_step(i);
    VectorXd zp = z, zm = z;
    zp[i] += hi;
    zm[i] -= hi;
    grad[i] = (eval(zp) - eval(zm)) / (2.0 * hi);
  }
  MatrixXd hess(n + m, n + m);
  for (Eigen::Index i = 0; i < n + m; ++i) {
    const double hi = hess_step(i);
    VectorXd zp = z, zm = z;
    zp[i] += hi;
    zm[i] -= hi;
    hess(i, i) = (eval(zp) - 2.0 * c.value + eval(zm)) / (hi * hi);
    for (Eigen::Index j = i + 1; j < n + m; ++j) {
      const double hj = hess_step(j);
      VectorXd zpp = z, zpm = z, zmp = z, zmm = z;
      zpp[i] += hi; zpp[j] += hj;
      zpm[i] += hi; zpm[j] -= hj;
      zmp[i] -= hi; zmp[j] += hj;
      zmm[i] -= hi; zmm[j] -= hj;
      hess(i, j) = hess(j, i) =
          (eval(zpp) - eval(zpm) - eval(zmp) + eval(zmm)) / (4.0 * hi * hj);
    }
  }
  c.x = grad.head(n);
  c.u = grad.tail(m);
  c.xx = hess.topLeftCorner(n, n);
  c.xu = hess.topRightCorner(n, m);
  c.uu = hess.bottomRightCorner(m, m);
  return c;
}

/// Value and Jacobians of a vector constraint by central differences.
inline ConstraintExpansion fd_constraint_expansion(const PathFn& fn, double t,
                                                   const VectorXd& x, const VectorXd& u,
                                                   const FdSteps& steps = {}) {
  ConstraintExpansion c;
  c.value = fn(t, x, u);
  const Eigen::Index p = c.value.size();
  c.x.resize(p, x.size());
  c.u.resize(p, u.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = detail::scaled(steps.x_gradient, x[i]);
    VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    c.x.col(i) = (fn(t, xp, u) - fn(t, xm, u)) / (2.0 * h);
  }
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double h = detail::scaled(steps.u_gradient, u[i]);
    VectorXd up = u, um = u;
    up[i] += h;
    um[i] -= h;
    c.u.col(i) = (fn(t, x, up) - fn(t, x, um)) / (2.0 * h);
  }
  return c;
}

}  // namespace stripguide::ddp
