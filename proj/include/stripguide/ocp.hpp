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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stripguide/astro.hpp"
#include "stripguide/attitude.hpp"
#include "stripguide/common.hpp"
#include "stripguide/ddp.hpp"
#include "stripguide/target.hpp"

namespace stripguide::ocp {

using ddp::MatrixXd;
using ddp::VectorXd;

enum class Objective { kLinear, kMinIntegral, kMinMax };

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::kLinear:
      return "linear";
    case Objective::kMinIntegral:
      return "min_integral";
    case Objective::kMinMax:
      return "min_max";
  }
  return "unknown";
}

/// One strip-imaging task: orbit, strip, camera and horizon.
struct StripScenario {
  std::string name = "scenario";
  astro::OrbitState orbit;  // at t0
  Vec3 start_ecef = Vec3::Zero();
  Vec3 end_ecef = Vec3::Zero();
  double t0 = 0.0;
  double tf = 30.0;
  double dt = 1.0;
  attitude::CameraParams camera;
  astro::EarthModel earth;
  bool f_ccd_bounds_active = false;

  void validate() const {
    earth.validate();
    camera.validate();
    require_finite(t0, "t0");
    require_finite(tf, "tf");
    if (!(tf > t0)) throw ValidationError("scenario needs tf > t0");
    if (!(dt > 0.0)) throw ValidationError("scenario dt must be positive");
    const double ratio = (tf - t0) / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
      throw ValidationError("scenario horizon must be a whole number of steps");
    }
  }
};

/// Precomputed geometry shared by every method on one scenario.
///
/// The ephemeris is sampled at dt/2 so that every quadrature sample of the
/// solver hits a stored state.
class StripContext {
 public:
  explicit StripContext(const StripScenario& sc) : scenario_(sc) {
    sc.validate();
    curve_ = target::build_curve(sc.start_ecef, sc.end_ecef, sc.earth.radius);
    ephemeris_ = astro::Ephemeris(sc.orbit, sc.earth, sc.t0, sc.tf, 0.5 * sc.dt);
    check_visibility();
  }

  const StripScenario& scenario() const { return scenario_; }
  const target::TargetCurve& curve() const { return curve_; }
  const astro::Ephemeris& ephemeris() const { return ephemeris_; }
  double s_final() const { return curve_.arc_length; }
  std::size_t steps() const {
    return static_cast<std::size_t>(std::llround((scenario_.tf - scenario_.t0) / scenario_.dt));
  }

  attitude::AttitudeCommand command(double t, const target::ScanState& scan) const {
    const auto sat = ephemeris_.at(t);
    const auto tgt = target::evaluate(curve_, scan, t, scenario_.earth);
    return attitude::command(sat, tgt, scenario_.earth, scenario_.camera);
  }

  /// ||omega_D|| in deg/s for a held rate; the rate does not depend on s-ddot.
  double rate_deg(double t, double s, double u) const {
    const auto sat = ephemeris_.at(t);
    const auto tgt = target::evaluate(curve_, {s, u, 0.0, 0.0}, t, scenario_.earth);
    const auto los = attitude::los_state(sat, tgt);
    const auto ref = attitude::reference_vector(tgt, scenario_.earth);
    const Mat3 frame = attitude::desired_frame(los, ref);
    return attitude::angular_velocity(los, ref, frame).norm() * kRadToDeg;
  }

  double line_rate(double t, double s, double u) const {
    const auto sat = ephemeris_.at(t);
    const auto tgt = target::evaluate(curve_, {s, u, 0.0, 0.0}, t, scenario_.earth);
    const auto los = attitude::los_state(sat, tgt);
    const auto ref = attitude::reference_vector(tgt, scenario_.earth);
    const Mat3 frame = attitude::desired_frame(los, ref);
    return attitude::scan_metrics(los, tgt, frame, scenario_.camera).f_ccd;
  }

 private:
  // The target must stay above the local horizon along the linear profile.
  void check_visibility() const {
    const std::size_t n = steps();
    const double rate = s_final() / (scenario_.tf - scenario_.t0);
    for (std::size_t k = 0; k <= n; ++k) {
      const double t = scenario_.t0 + static_cast<double>(k) * scenario_.dt;
      const double s = rate * (t - scenario_.t0);
      const auto sat = ephemeris_.at(t);
      const Vec3 r_t =
          astro::earth_rotation_dcm(t, scenario_.earth) * curve_.position_ecef(s);
      if ((sat.position - r_t).dot(r_t) <= 0.0) {
        throw ValidationError("target is below the local horizon at t = " +
                              std::to_string(t));
      }
    }
  }

  StripScenario scenario_;
  target::TargetCurve curve_;
  astro::Ephemeris ephemeris_;
};

/// Constant-rate profile from 0 to s_f with nu = 0.
struct InitialGuess {
  std::vector<VectorXd> controls;
  VectorXd nu;
};

inline InitialGuess linear_guess(const StripContext& ctx) {
  const auto& sc = ctx.scenario();
  const double rate = ctx.s_final() / (sc.tf - sc.t0);
  return {std::vector<VectorXd>(ctx.steps(), VectorXd::Constant(1, rate)), VectorXd::Zero(1)};
}

// ---------------------------------------------------------------------------
// Problem builders

/// Shared plumbing: s' = u, psi = s(tf) - s_f, FD expansions.
inline ddp::Problem base_problem(const StripContext& ctx, const ddp::FdSteps& steps) {
  const auto& sc = ctx.scenario();
  ddp::Problem p;
  p.n = 1;
  p.m = 1;
  p.d = 1;
  p.t0 = sc.t0;
  p.tf = sc.tf;
  p.dt = sc.dt;
  p.x0 = VectorXd::Zero(1);
  p.dynamics = [](double, const VectorXd&, const VectorXd& u) { return u; };
  p.dynamics_expansion = [](double, const VectorXd&, const VectorXd& u) {
    return ddp::DynamicsExpansion{u, MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1)};
  };
  const double sf = ctx.s_final();
  p.terminal_constraint = [sf](const VectorXd& x) { return VectorXd::Constant(1, x[0] - sf); };
  p.terminal_constraint_expansion = [sf](const VectorXd& x) {
    return ddp::TerminalConstraintExpansion{VectorXd::Constant(1, x[0] - sf),
                                            MatrixXd::Identity(1, 1),
                                            {MatrixXd::Zero(1, 1)}};
  };

  if (sc.f_ccd_bounds_active) {
    const double lb = sc.camera.line_rate_min;
    const double ub = sc.camera.line_rate_max;
    if (!(lb > 0.0)) {
      throw ValidationError("line-rate bounds need a positive lower bound");
    }
    p.num_inequality = 2;
    p.inequality = [&ctx, lb, ub](double t, const VectorXd& x, const VectorXd& u) {
      const double f = ctx.line_rate(t, x[0], u[0]);
      VectorXd g(2);
      g << (lb - f) / lb, (f - ub) / ub;
      return g;
    };
    p.inequality_expansion = [fn = p.inequality, steps](double t, const VectorXd& x,
                                                        const VectorXd& u) {
      return ddp::fd_constraint_expansion(fn, t, x, u, steps);
    };
  }
  return p;
}

/// Minimize the integral of ||omega_D||^2 (deg/s).
inline ddp::Problem build_min_integral(const StripContext& ctx,
                                       const ddp::FdSteps& steps = {}) {
  ddp::Problem p = base_problem(ctx, steps);
  p.running_cost = [&ctx](double t, const VectorXd& x, const VectorXd& u) {
    const double w = ctx.rate_deg(t, x[0], u[0]);
    return w * w;
  };
  p.running_cost_expansion = [fn = p.running_cost, steps](double t, const VectorXd& x,
                                                          const VectorXd& u) {
    return ddp::fd_cost_expansion(fn, t, x, u, steps);
  };
  return p;
}

/// Nested-exponential surrogate for max ||omega_D||.
///
/// L = exp(exp(N w) - exp(N w_ref)) with N = sharpness / w_ref, i.e. the
/// exp(exp(N w)) / M form with M = exp(exp(N w_ref)) folded into the exponent.
/// w_ref is the largest rate of the previous iterate.
struct SoftmaxSchedule {
  double sharpness = 4.0;       // N * w_ref
  double max_exponent = 30.0;   // guard on N * w_ref
  double reference_rate = 0.0;  // deg/s; refreshed by the solver hook
  /// Softer sharpness values solved first, each warm-starting the next;
  /// the final solve always uses `sharpness`.
  std::vector<double> warm_start = {3.0};
  /// Extra solves at the final sharpness, re-centering w_ref on the previous
  /// solution, until w_ref moves by less than `reference_tolerance`.
  int max_recenter = 5;
  double reference_tolerance = 1e-6;
  bool refresh_every_iteration = false;

  double N() const { return std::min(sharpness, max_exponent) / reference_rate; }

  void validate() const {
    if (!(sharpness > 0.0) || !(max_exponent > 0.0)) {
      throw ValidationError("softmax sharpness must be positive");
    }
    for (double c : warm_start) {
      if (!(c > 0.0)) throw ValidationError("softmax warm-start sharpness must be positive");
    }
  }
};

inline double softmax_cost(double w, const SoftmaxSchedule& sched) {
  const double n = sched.N();
  return std::exp(std::exp(n * w) - std::exp(n * sched.reference_rate));
}

/// Largest ||omega_D|| (deg/s) over every quadrature sample.
inline double max_rate(const StripContext& ctx, const ddp::Trajectory& tr) {
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.steps(); ++k) {
    for (int j = 0; j < ddp::kSamplesPerStep; ++j) {
      worst = std::max(worst, ctx.rate_deg(ddp::sample_time(tr, k, j),
                                           ddp::sample_state(tr, k, j)[0], tr.u[k][0]));
    }
  }
  return worst;
}

/// The scale is set from `sched->reference_rate`, or from the linear profile
/// if that is unset. With `refresh_every_iteration` the solver hook re-centers
/// it on every iterate; otherwise the caller re-centers between solves.
inline ddp::Problem build_minmax(const StripContext& ctx,
                                 std::shared_ptr<SoftmaxSchedule> sched,
                                 const ddp::FdSteps& steps = {}) {
  sched->validate();
  ddp::Problem p = base_problem(ctx, steps);
  p.running_cost = [&ctx, sched](double t, const VectorXd& x, const VectorXd& u) {
    return softmax_cost(ctx.rate_deg(t, x[0], u[0]), *sched);
  };
  p.running_cost_expansion = [fn = p.running_cost, steps](double t, const VectorXd& x,
                                                          const VectorXd& u) {
    return ddp::fd_cost_expansion(fn, t, x, u, steps);
  };
  if (sched->refresh_every_iteration) {
    p.refresh = [&ctx, sched](const ddp::Trajectory& tr) {
      sched->reference_rate = max_rate(ctx, tr);
    };
  }
  if (!(sched->reference_rate > 0.0)) {
    const auto guess = linear_guess(ctx);
    sched->reference_rate = max_rate(ctx, ddp::forward_rollout(p, guess.controls, p.x0));
  }
  if (!(sched->reference_rate > 0.0)) {
    throw DegenerateGeometryError("zero angular rate; softmax scale undefined");
  }
  return p;
}

// ---------------------------------------------------------------------------
// Reporting

/// Command profile on the grid nodes plus Table-style metrics.
struct ProfileReport {
  std::vector<double> t;
  std::vector<double> s;
  std::vector<double> u;
  std::vector<attitude::AttitudeCommand> commands;
  std::vector<double> omega_deg;  // ||omega_D|| at nodes, deg/s
  double integral_omega_sq = 0.0;  // Simpson with held controls, deg^2/s
  double integral_omega_sq_trapezoid = 0.0;
  double max_omega = 0.0;          // over all quadrature samples, deg/s
  double min_omega = 0.0;
  double mean_omega = 0.0;
  double terminal_error = 0.0;     // |s(tf) - s_f|, rad
  double max_f_ccd = 0.0;
  double min_f_ccd = 0.0;
  double max_drift = 0.0;
  double max_bound_violation = 0.0;  // max normalized g over samples (bounds from camera)
};

inline ProfileReport evaluate_profile(const StripContext& ctx, const ddp::Trajectory& tr) {
  const std::size_t n = tr.steps();
  if (n == 0) throw ValidationError("profile has no steps");
  const auto& cam = ctx.scenario().camera;
  ProfileReport r;
  r.t = tr.t;
  r.s.resize(n + 1);
  r.u.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    r.s[k] = tr.x[k][0];
    r.u[k] = tr.u[std::min(k, n - 1)][0];
  }

  r.max_omega = 0.0;
  r.min_omega = std::numeric_limits<double>::infinity();
  r.max_bound_violation = -std::numeric_limits<double>::infinity();
  const bool bounded = cam.line_rate_min > 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double h = tr.t[k + 1] - tr.t[k];
    for (int j = 0; j < ddp::kSamplesPerStep; ++j) {
      const double t = ddp::sample_time(tr, k, j);
      const double s = ddp::sample_state(tr, k, j)[0];
      const double w = ctx.rate_deg(t, s, tr.u[k][0]);
      r.integral_omega_sq += ddp::kSimpsonWeights[j] * h * w * w;
      r.max_omega = std::max(r.max_omega, w);
      r.min_omega = std::min(r.min_omega, w);
      if (bounded) {
        const double f = ctx.line_rate(t, s, tr.u[k][0]);
        r.max_bound_violation =
            std::max({r.max_bound_violation, (cam.line_rate_min - f) / cam.line_rate_min,
                      (f - cam.line_rate_max) / cam.line_rate_max});
      }
    }
  }

  // Node commands; s-ddot from central differences of the held controls.
  r.commands.resize(n + 1);
  r.omega_deg.resize(n + 1);
  r.max_f_ccd = 0.0;
  r.min_f_ccd = std::numeric_limits<double>::infinity();
  double mean_acc = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = std::min(k + 1, n);
    const double accel = (r.u[hi] - r.u[lo]) / (r.t[hi] - r.t[lo]);
    r.commands[k] = ctx.command(r.t[k], {r.s[k], r.u[k], accel, 0.0});
    r.omega_deg[k] = r.commands[k].omega.norm() * kRadToDeg;
    r.max_f_ccd = std::max(r.max_f_ccd, r.commands[k].f_ccd);
    r.min_f_ccd = std::min(r.min_f_ccd, r.commands[k].f_ccd);
    r.max_drift = std::max(r.max_drift, r.commands[k].drift);
    if (k > 0) {
      const double h = r.t[k] - r.t[k - 1];
      // Left node uses its own held control, right node the left-limit one.
      const double w_left = r.omega_deg[k - 1];
      const double w_right = ctx.rate_deg(r.t[k], r.s[k], tr.u[k - 1][0]);
      r.integral_omega_sq_trapezoid += 0.5 * h * (w_left * w_left + w_right * w_right);
    }
  }
  for (double w : r.omega_deg) mean_acc += w;
  r.mean_omega = mean_acc / static_cast<double>(n + 1);
  r.terminal_error = std::abs(tr.x.back()[0] - ctx.s_final());
  if (!bounded) r.max_bound_violation = 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Solving

struct MethodResult {
  Objective objective = Objective::kLinear;
  bool constrained = false;
  ddp::Trajectory trajectory;
  std::optional<ddp::Solution> solution;  // empty for the linear profile
  ProfileReport report;

  bool converged() const { return !solution || solution->converged; }
};

/// Solver settings used throughout the scenarios.
inline ddp::SolverParams default_solver_params() {
  ddp::SolverParams p;
  p.k_u = 0.5;
  p.k_nu = 0.5;
  p.gamma = 1.1;
  p.eps_V = 1e-6;
  p.eps_g = 1e-6;
  p.eps_h = 1e-6;
  p.max_iterations = 300;
  return p;
}

inline MethodResult run_linear(const StripContext& ctx) {
  MethodResult out;
  const auto guess = linear_guess(ctx);
  const ddp::Problem p = base_problem(ctx, {});
  out.trajectory = ddp::forward_rollout(p, guess.controls, p.x0);
  out.report = evaluate_profile(ctx, out.trajectory);
  return out;
}

using IterationCallback = std::function<void(const ddp::IterationRecord&)>;

inline MethodResult run_min_integral(const StripContext& ctx, const ddp::SolverParams& params,
                                     const IterationCallback& on_iteration = {}) {
  MethodResult out;
  out.objective = Objective::kMinIntegral;
  out.constrained = ctx.scenario().f_ccd_bounds_active;
  const ddp::Problem p = build_min_integral(ctx);
  const auto guess = linear_guess(ctx);
  out.solution = ddp::solve(p, guess.controls, guess.nu, params, on_iteration);
  out.trajectory = out.solution->trajectory;
  out.report = evaluate_profile(ctx, out.trajectory);
  return out;
}

/// Min-max solve by continuation: each stage freezes N and M from the
/// previous solution's peak rate, solves to convergence, and warm-starts the
/// next stage with its controls and multiplier.
inline MethodResult run_min_max(const StripContext& ctx, const ddp::SolverParams& params,
                                const SoftmaxSchedule& schedule = {},
                                const IterationCallback& on_iteration = {}) {
  schedule.validate();
  MethodResult out;
  out.objective = Objective::kMinMax;
  out.constrained = ctx.scenario().f_ccd_bounds_active;
  std::vector<double> stages = schedule.warm_start;
  for (int i = 0; i <= std::max(0, schedule.max_recenter); ++i) {
    stages.push_back(schedule.sharpness);
  }

  auto guess = linear_guess(ctx);
  ddp::Trajectory current =
      ddp::forward_rollout(base_problem(ctx, {}), guess.controls, VectorXd::Zero(1));
  std::vector<ddp::IterationRecord> history;
  std::vector<std::string> warnings;
  double previous_reference = 0.0;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    auto sched = std::make_shared<SoftmaxSchedule>(schedule);
    sched->sharpness = stages[i];
    sched->reference_rate = max_rate(ctx, current);
    const bool final_sharpness = i >= schedule.warm_start.size();
    if (final_sharpness && i > schedule.warm_start.size() &&
        std::abs(sched->reference_rate - previous_reference) <=
            schedule.reference_tolerance * previous_reference) {
      break;
    }
    previous_reference = sched->reference_rate;

    const ddp::Problem p = build_minmax(ctx, sched);
    ddp::Solution sol = ddp::solve(p, guess.controls, guess.nu, params, on_iteration);
    for (auto rec : sol.history) {
      rec.iteration += static_cast<int>(history.size());
      history.push_back(rec);
    }
    warnings.insert(warnings.end(), sol.warnings.begin(), sol.warnings.end());
    if (!sol.converged && out.solution && out.solution->converged) {
      // Keep the last converged stage rather than a stalled sharper one.
      warnings.push_back("softmax stage at sharpness " + std::to_string(stages[i]) +
                         " did not converge; kept the previous stage");
      break;
    }
    guess.controls = sol.trajectory.u;
    guess.nu = sol.nu;
    current = sol.trajectory;
    const bool converged = sol.converged;
    out.solution = std::move(sol);
    if (!converged) break;
  }
  out.solution->history = std::move(history);
  out.solution->warnings = std::move(warnings);
  out.solution->iterations = static_cast<int>(out.solution->history.size());
  out.trajectory = out.solution->trajectory;
  out.report = evaluate_profile(ctx, out.trajectory);
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force oracle

using TrajectoryCost = std::function<double(const ddp::Trajectory&)>;

struct OracleResult {
  bool found = false;
  std::vector<VectorXd> controls;
  ddp::Trajectory trajectory;
  double cost = std::numeric_limits<double>::infinity();
  double control_spacing = 0.0;
};

/// Exhaustive search over held controls u_k = u_lin + j_k * spacing with
/// |j_k| <= (grid_per_step - 1) / 2, keeping endpoint-feasible candidates.
inline OracleResult brute_force_oracle(const StripContext& ctx, const ddp::Problem& problem,
                                       const TrajectoryCost& cost, int grid_per_step,
                                       double control_spacing) {
  const std::size_t n = problem.steps();
  if (n < 1 || n > 4) throw ValidationError("brute-force oracle needs 1 to 4 steps");
  if (grid_per_step < 1 || grid_per_step > 15 || grid_per_step % 2 == 0) {
    throw ValidationError("grid_per_step must be odd and at most 15");
  }
  if (!(control_spacing > 0.0)) throw ValidationError("control spacing must be positive");
  const auto guess = linear_guess(ctx);
  const double center = guess.controls.front()[0];
  const int half = (grid_per_step - 1) / 2;
  const double tolerance = 0.5 * control_spacing * problem.dt;

  OracleResult best;
  best.control_spacing = control_spacing;
  std::vector<int> idx(n, -half);
  while (true) {
    std::vector<VectorXd> controls(n);
    for (std::size_t k = 0; k < n; ++k) {
      controls[k] = VectorXd::Constant(1, center + idx[k] * control_spacing);
    }
    const ddp::Trajectory tr = ddp::forward_rollout(problem, controls, problem.x0);
    if (std::abs(tr.x.back()[0] - ctx.s_final()) <= tolerance) {
      const double c = cost(tr);
      if (c < best.cost) {
        best.found = true;
        best.cost = c;
        best.controls = controls;
        best.trajectory = tr;
      }
    }
    std::size_t pos = 0;
    while (pos < n && idx[pos] == half) {
      idx[pos] = -half;
      ++pos;
    }
    if (pos == n) break;
    ++idx[pos];
  }
  return best;
}

/// Objective part of a problem's cost (no multiplier term).
inline TrajectoryCost objective_of(const ddp::Problem& p) {
  return [p](const ddp::Trajectory& tr) {
    return ddp::evaluate_cost(p, tr, VectorXd::Zero(p.d)).objective();
  };
}

}  // namespace stripguide::ocp
