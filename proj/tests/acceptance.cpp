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


// Acceptance checks: one PASS/FAIL line per criterion, exit 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "stripguide/config.hpp"
#include "stripguide/ocp.hpp"

namespace {

using namespace stripguide;
using ddp::MatrixXd;
using ddp::VectorXd;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what.c_str(),
              detail.c_str());
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

config::RunConfig bundled(const std::string& name) {
  return config::load(std::string(STRIPGUIDE_SCENARIO_DIR) + "/" + name + ".yaml");
}

const std::vector<std::string> kScenarios = {"parallel", "offset", "perpendicular", "reverse"};

// ---------------------------------------------------------------------------
// Criterion 1: analytic rates against differenced DCMs and rates.

Vec3 dcm_rate(const Mat3& before, const Mat3& mid, const Mat3& after, double h) {
  const Mat3 w = -(after - before) / (2 * h) * mid.transpose();
  return mid.transpose() * Vec3(0.5 * (w(2, 1) - w(1, 2)), 0.5 * (w(0, 2) - w(2, 0)),
                                0.5 * (w(1, 0) - w(0, 1)));
}

void criterion_kinematics() {
  const auto t0 = Clock::now();
  double worst_w = 0.0, worst_a = 0.0;
  const double h = 1e-3;
  for (const auto& name : kScenarios) {
    const ocp::StripContext ctx(bundled(name).scenario);
    const auto& sc = ctx.scenario();
    const double rate = ctx.s_final() / (sc.tf - sc.t0);
    // Linear profile plus a smooth profile with nonzero s-ddot and jerk.
    const double a = 0.3 * rate, om = 2 * kPi / (sc.tf - sc.t0);
    const std::vector<std::function<target::ScanState(double)>> profiles = {
        [&](double t) { return target::ScanState{rate * t, rate, 0, 0}; },
        [&](double t) {
          return target::ScanState{rate * t - a / om * std::sin(om * t), rate - a * std::cos(om * t),
                                   a * om * std::sin(om * t), a * om * om * std::cos(om * t)};
        }};
    for (const auto& prof : profiles) {
      for (std::size_t k = 0; k <= ctx.steps(); ++k) {
        const double t = sc.t0 + k * sc.dt;
        const auto mid = ctx.command(t, prof(t));
        const auto lo = ctx.command(t - h, prof(t - h));
        const auto hi = ctx.command(t + h, prof(t + h));
        worst_w = std::max(worst_w, (dcm_rate(lo.dcm, mid.dcm, hi.dcm, h) - mid.omega).norm());
        worst_a = std::max(worst_a, ((hi.omega - lo.omega) / (2 * h) - mid.alpha).norm());
      }
    }
  }
  const double secs = seconds_since(t0);
  report(1, worst_w < 1e-6 && worst_a < 1e-5 && secs < 10.0, "kinematics oracle",
         "max |dw| " + fmt("%.2e rad/s", worst_w) + ", max |da| " + fmt("%.2e rad/s^2", worst_a) +
             ", " + fmt("%.2f s", secs));
}

// ---------------------------------------------------------------------------
// Criteria 2, 3, 4, 6, 8 share the twelve scenario solves.

struct ScenarioRuns {
  std::string name;
  ocp::MethodResult linear, min_integral, min_max;
};

std::vector<ScenarioRuns> solve_all(double& secs) {
  const auto t0 = Clock::now();
  std::vector<ScenarioRuns> out;
  for (const auto& name : kScenarios) {
    const auto c = bundled(name);
    const ocp::StripContext ctx(c.scenario);
    out.push_back({name, ocp::run_linear(ctx), ocp::run_min_integral(ctx, c.solver),
                   ocp::run_min_max(ctx, c.solver, c.softmax)});
  }
  secs = seconds_since(t0);
  return out;
}

void criterion_drift(const std::vector<ScenarioRuns>& runs) {
  double worst = 0.0;
  for (const auto& r : runs) {
    for (const auto* m : {&r.linear, &r.min_integral, &r.min_max}) {
      for (const auto& c : m->report.commands) worst = std::max(worst, c.drift);
    }
  }
  report(2, worst < 1e-9, "zero drift", "max drift " + fmt("%.2e rad", worst));
}

void criterion_ordering(const std::vector<ScenarioRuns>& runs, double secs) {
  bool ok = secs < 120.0;
  std::string detail;
  for (const auto& r : runs) {
    const auto& L = r.linear.report;
    const auto& I = r.min_integral.report;
    const auto& M = r.min_max.report;
    const bool converged = r.min_integral.converged() && r.min_max.converged();
    const bool integral_ok = I.integral_omega_sq <= L.integral_omega_sq &&
                             I.integral_omega_sq <= M.integral_omega_sq;
    const bool max_ok = M.max_omega <= L.max_omega && M.max_omega <= I.max_omega;
    bool close_ok = true;
    if (r.name == "parallel") {
      auto within = [](double a, double b) { return std::abs(a - b) <= 0.005 * std::min(a, b); };
      for (const auto* m : {&I, &M}) {
        close_ok = close_ok && within(m->integral_omega_sq, L.integral_omega_sq) &&
                   within(m->max_omega, L.max_omega);
      }
    }
    const bool row = converged && integral_ok && max_ok && close_ok;
    ok = ok && row;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s%s int %.6f/%.6f/%.6f max %.6f/%.6f/%.6f%s",
                  detail.empty() ? "" : "; ", r.name.c_str(), L.integral_omega_sq,
                  I.integral_omega_sq, M.integral_omega_sq, L.max_omega, I.max_omega, M.max_omega,
                  row ? "" : " <- wrong");
    detail += buf;
  }
  report(3, ok, "ordering (linear/min_integral/min_max)", detail + fmt("; %.1f s", secs));
}

void criterion_terminal(const std::vector<ScenarioRuns>& runs,
                        const std::vector<ocp::MethodResult>& extra) {
  double worst = 0.0;
  int converged = 0, total = 0;
  auto visit = [&](const ocp::MethodResult& m) {
    if (!m.solution) return;
    ++total;
    if (!m.converged()) return;
    ++converged;
    worst = std::max(worst, m.report.terminal_error);
  };
  for (const auto& r : runs) {
    visit(r.min_integral);
    visit(r.min_max);
  }
  for (const auto& m : extra) visit(m);
  report(4, worst <= 1e-8 && converged > 0, "terminal feasibility",
         "max |s(tf)-s_f| " + fmt("%.2e rad", worst) + " over " + std::to_string(converged) +
             "/" + std::to_string(total) + " converged solves");
}

struct ConstrainedRun {
  std::string name;
  double lower, upper;
  double v_linear, v_free, v_bounded;
  ocp::MethodResult bounded;
  bool ok;
};

std::vector<ConstrainedRun> solve_constrained() {
  std::vector<ConstrainedRun> out;
  std::string detail;
  for (const auto& name : {"perpendicular_constrained", "reverse_constrained"}) {
    const auto c = bundled(name);
    const auto& cam = c.scenario.camera;
    auto violation = [&](const ocp::ProfileReport& r) {
      double v = -1.0;
      for (const auto& cmd : r.commands) {
        v = std::max({v, (cam.line_rate_min - cmd.f_ccd) / cam.line_rate_min,
                      (cmd.f_ccd - cam.line_rate_max) / cam.line_rate_max});
      }
      return v;
    };
    auto free = c.scenario;
    free.f_ccd_bounds_active = false;
    const ocp::StripContext free_ctx(free);
    const ocp::StripContext ctx(c.scenario);
    const auto lin = ocp::run_linear(free_ctx);
    const auto mi = ocp::run_min_integral(free_ctx, c.solver);
    const auto con = ocp::run_min_integral(ctx, c.solver);
    const double v_lin = violation(lin.report), v_mi = violation(mi.report);
    const double v_con = violation(con.report);
    const bool row = con.converged() && v_con <= c.solver.eps_g &&
                     con.report.max_bound_violation <= c.solver.eps_g && v_lin > 1e-3 &&
                     v_mi > 1e-3;
    out.push_back({name, cam.line_rate_min, cam.line_rate_max, v_lin, v_mi, v_con, con, row});
  }
  return out;
}

void criterion_constrained(const std::vector<ConstrainedRun>& runs) {
  bool ok = true;
  std::string detail;
  for (const auto& r : runs) {
    ok = ok && r.ok;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%s%s [%g, %g] Hz: constrained %.1e, linear %.1e, unconstrained %.1e",
                  detail.empty() ? "" : "; ", r.name.c_str(), r.lower, r.upper, r.v_bounded,
                  r.v_linear, r.v_free);
    detail += buf;
  }
  report(5, ok, "constrained runs", detail + " (max normalized violation)");
}

void criterion_flatness(const std::vector<ScenarioRuns>& runs) {
  for (const auto& r : runs) {
    if (r.name != "offset") continue;
    const auto& m = r.min_max.report;
    const double spread = (m.max_omega - m.min_omega) / m.mean_omega;
    report(6, r.min_max.converged() && spread < 0.05, "min-max flatness",
           "offset (max-min)/mean " + fmt("%.4f", spread));
  }
}

// ---------------------------------------------------------------------------
// Criterion 7: solver against closed forms and exhaustive search.

ddp::Problem integrator(double horizon, double dt, double x0) {
  ddp::Problem p;
  p.n = p.m = 1;
  p.tf = horizon;
  p.dt = dt;
  p.x0 = VectorXd::Constant(1, x0);
  p.dynamics = [](double, const VectorXd&, const VectorXd& u) { return u; };
  p.dynamics_expansion = [](double, const VectorXd&, const VectorXd& u) {
    return ddp::DynamicsExpansion{u, MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1)};
  };
  return p;
}

// Independent Riccati oracle: RK4 on P' = P^2 - 1 backward from P(T) = 0.
double riccati_p0(double horizon) {
  double p = 0.0;
  const int n = 100000;
  const double h = horizon / n;
  auto f = [](double v) { return 1.0 - v * v; };  // dP/d(T - t)
  for (int i = 0; i < n; ++i) {
    const double k1 = f(p), k2 = f(p + 0.5 * h * k1), k3 = f(p + 0.5 * h * k2),
                 k4 = f(p + h * k3);
    p += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return p;
}

void criterion_solver() {
  const auto t0 = Clock::now();
  ddp::SolverParams full;
  full.k_u = 1.0;
  full.k_nu = 1.0;

  // (a) LQR, x0 = 1, L = (x^2 + u^2)/2 over 1 s.
  auto lqr = integrator(1.0, 1e-3, 1.0);
  lqr.running_cost = [](double, const VectorXd& x, const VectorXd& u) {
    return 0.5 * (x.squaredNorm() + u.squaredNorm());
  };
  lqr.running_cost_expansion = [](double, const VectorXd& x, const VectorXd& u) {
    return ddp::CostExpansion{0.5 * (x.squaredNorm() + u.squaredNorm()), x, u,
                              MatrixXd::Identity(1, 1), MatrixXd::Zero(1, 1),
                              MatrixXd::Identity(1, 1)};
  };
  const auto a = ddp::solve(lqr, std::vector<VectorXd>(lqr.steps(), VectorXd::Zero(1)),
                            VectorXd(0), full);
  const double a_err =
      std::abs(ddp::evaluate_cost(lqr, a.trajectory, a.nu).objective() - 0.5 * riccati_p0(1.0));
  const bool a_ok = a.converged && a.iterations <= 3 && a_err <= 1e-6;

  // (b) Minimum energy transfer x(0) = 0.2 -> x(T) = 1.4 over T = 2: u = 0.6, J = 0.36.
  auto steer = integrator(2.0, 0.05, 0.2);
  steer.d = 1;
  steer.running_cost = [](double, const VectorXd&, const VectorXd& u) {
    return 0.5 * u.squaredNorm();
  };
  steer.running_cost_expansion = [](double, const VectorXd&, const VectorXd& u) {
    return ddp::CostExpansion{0.5 * u.squaredNorm(), VectorXd::Zero(1), u, MatrixXd::Zero(1, 1),
                              MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1)};
  };
  steer.terminal_constraint = [](const VectorXd& x) { return VectorXd::Constant(1, x[0] - 1.4); };
  steer.terminal_constraint_expansion = [](const VectorXd& x) {
    return ddp::TerminalConstraintExpansion{VectorXd::Constant(1, x[0] - 1.4),
                                            MatrixXd::Identity(1, 1), {MatrixXd::Zero(1, 1)}};
  };
  const auto b = ddp::solve(steer, std::vector<VectorXd>(steer.steps(), VectorXd::Zero(1)),
                            VectorXd::Zero(1), full);
  const double J = 1.2 * 1.2 / (2 * 2.0);
  double b_err = std::abs(ddp::evaluate_cost(steer, b.trajectory, b.nu).objective() - J);
  for (const auto& u : b.trajectory.u) b_err = std::max(b_err, std::abs(u[0] - 0.6));
  const bool b_ok = b.converged && b_err <= 1e-6;

  // (c) Three-step slice of the offset strip against exhaustive search.
  auto sc = bundled("offset").scenario;
  const ocp::StripContext full_ctx(sc);
  sc.end_ecef = full_ctx.curve().position_ecef(0.1 * full_ctx.s_final());
  sc.tf = sc.t0 + 3.0 * sc.dt;
  const ocp::StripContext ctx(sc);
  const auto p = ocp::build_min_integral(ctx);
  const auto mi = ocp::run_min_integral(ctx, ocp::default_solver_params());
  const double spacing = 1e-6;
  const auto oracle = ocp::brute_force_oracle(ctx, p, ocp::objective_of(p), 15, spacing);
  const double ddp_cost = ocp::objective_of(p)(mi.trajectory);
  const double bound = std::abs(mi.solution->nu[0]) * 0.5 * spacing * p.dt;
  const bool c_ok = mi.converged() && oracle.found && ddp_cost <= oracle.cost + bound;

  const double secs = seconds_since(t0);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "(a) LQR |dJ| %.1e in %d iterations; (b) min-energy err %.1e; (c) DDP %.9f vs "
                "oracle %.9f + %.1e; %.2f s",
                a_err, a.iterations, b_err, ddp_cost, oracle.cost, bound, secs);
  report(7, a_ok && b_ok && c_ok && secs < 10.0, "solver verification", buf);
}

// ---------------------------------------------------------------------------
// Criterion 8: hygiene over every solve and the bundled orbit.

void criterion_hygiene(const std::vector<ScenarioRuns>& runs,
                       const std::vector<ocp::MethodResult>& extra) {
  double asym = 0.0, min_lambda = 0.0, worst_rise = -std::numeric_limits<double>::infinity();
  auto visit = [&](const ocp::MethodResult& m) {
    if (!m.solution) return;
    for (const auto& h : m.solution->history) {
      asym = std::max(asym, h.max_asymmetry);
      min_lambda = std::min(min_lambda, h.min_lambda);
      if (h.step > 0.0) {
        // Rise relative to the roundoff band the line search allows.
        const double band = 1e-13 * (1.0 + std::abs(h.augmented_before));
        worst_rise = std::max(worst_rise, (h.augmented_after - h.augmented_before) / band);
      }
    }
  };
  for (const auto& r : runs) {
    visit(r.min_integral);
    visit(r.min_max);
  }
  for (const auto& m : extra) visit(m);

  const auto c = bundled("parallel");
  const auto s30 = astro::propagate_orbit(c.scenario.orbit, 30.0, c.scenario.earth);
  const double e0 = astro::specific_energy(c.scenario.orbit, c.scenario.earth.mu);
  const double drift = std::abs(astro::specific_energy(s30, c.scenario.earth.mu) - e0) / std::abs(e0);

  const bool ok = asym < 1e-10 && min_lambda >= 0.0 && worst_rise <= 1.0 && drift < 1e-10;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "max asymmetry %.1e, min lambda %.1e, max merit rise %.2f x roundoff band, "
                "energy drift %.1e",
                asym, min_lambda, std::max(worst_rise, 0.0), drift);
  report(8, ok, "numerical hygiene", buf);
}

}  // namespace

int main() {
  try {
    criterion_kinematics();
    double secs = 0.0;
    const auto runs = solve_all(secs);
    criterion_drift(runs);
    criterion_ordering(runs, secs);
    const auto bounded = solve_constrained();
    std::vector<ocp::MethodResult> constrained;
    for (const auto& b : bounded) constrained.push_back(b.bounded);
    criterion_terminal(runs, constrained);
    criterion_constrained(bounded);
    criterion_flatness(runs);
    criterion_solver();
    criterion_hygiene(runs, constrained);
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
