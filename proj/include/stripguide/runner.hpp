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

#include <Eigen/Geometry>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stripguide/config.hpp"
#include "stripguide/ocp.hpp"
#include "stripguide/plot.hpp"

namespace stripguide::runner {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kNonConvergence = 3, kSingularity = 4 };

/// Command-line overrides applied on top of a scenario file.
struct Overrides {
  std::optional<ocp::Objective> objective;
  bool constrained = false;
  std::optional<double> dt;
  std::optional<int> max_iterations;
};

inline void apply(config::RunConfig& c, const Overrides& o) {
  if (o.objective) c.objectives = {*o.objective};
  if (o.constrained) {
    if (!c.has_bounds) {
      throw config::ConfigError("--constrained",
                                "scenario has no camera.line_rate_min/line_rate_max");
    }
    c.scenario.f_ccd_bounds_active = true;
  }
  if (o.dt) {
    c.scenario.dt = *o.dt;
    try {
      c.scenario.validate();
    } catch (const ValidationError& e) {
      throw config::ConfigError("--dt", e.what());
    }
  }
  if (o.max_iterations) {
    if (*o.max_iterations < 1) throw config::ConfigError("--max-iters", "must be >= 1");
    c.solver.max_iterations = *o.max_iterations;
  }
}

/// One solved (or attempted) method.
struct MethodRun {
  std::string label;
  ocp::Objective objective = ocp::Objective::kLinear;
  bool constrained = false;
  std::optional<ocp::MethodResult> result;
  std::string error;  // set when the method threw
  int error_code = kOk;

  bool converged() const { return result && result->converged(); }
};

inline std::string label_of(ocp::Objective o, bool constrained) {
  return std::string(ocp::to_string(o)) + (constrained ? "_constrained" : "");
}

/// Methods a config expands to. A constrained run also solves each optimizing
/// objective without bounds, so the summary can show what the bounds change.
inline std::vector<std::pair<ocp::Objective, bool>> plan(const config::RunConfig& c) {
  std::vector<std::pair<ocp::Objective, bool>> out;
  for (auto o : c.objectives) {
    out.emplace_back(o, false);
    if (o != ocp::Objective::kLinear && c.scenario.f_ccd_bounds_active) out.emplace_back(o, true);
  }
  return out;
}

inline std::vector<MethodRun> execute(const config::RunConfig& c,
                                      const ocp::IterationCallback& on_iteration = {}) {
  auto free_scenario = c.scenario;
  free_scenario.f_ccd_bounds_active = false;
  const ocp::StripContext free_ctx(free_scenario);
  std::optional<ocp::StripContext> bounded_ctx;
  if (c.scenario.f_ccd_bounds_active) bounded_ctx.emplace(c.scenario);

  std::vector<MethodRun> runs;
  for (const auto& [objective, constrained] : plan(c)) {
    MethodRun m;
    m.label = label_of(objective, constrained);
    m.objective = objective;
    m.constrained = constrained;
    const auto& ctx = constrained ? *bounded_ctx : free_ctx;
    try {
      switch (objective) {
        case ocp::Objective::kLinear:
          m.result = ocp::run_linear(ctx);
          break;
        case ocp::Objective::kMinIntegral:
          m.result = ocp::run_min_integral(ctx, c.solver, on_iteration);
          break;
        case ocp::Objective::kMinMax:
          m.result = ocp::run_min_max(ctx, c.solver, c.softmax, on_iteration);
          break;
      }
      if (!m.result->converged()) m.error_code = kNonConvergence;
    } catch (const SingularityError& e) {
      m.error = e.what();
      m.error_code = kSingularity;
    } catch (const DegenerateGeometryError& e) {
      m.error = e.what();
      m.error_code = kSingularity;
    } catch (const SweepFailure& e) {
      m.error = e.what();
      m.error_code = kNonConvergence;
    } catch (const DivergenceError& e) {
      m.error = e.what();
      m.error_code = kNonConvergence;
    }
    runs.push_back(std::move(m));
  }
  return runs;
}

/// Singularities outrank non-convergence in the process exit status.
inline int exit_code(const std::vector<MethodRun>& runs) {
  int code = kOk;
  for (const auto& m : runs) {
    if (m.error_code == kSingularity) return kSingularity;
    if (m.error_code != kOk) code = m.error_code;
  }
  return code;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

inline json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace detail

/// Unit quaternion (w, x, y, z) with w >= 0 whose rotation matrix is `dcm`.
inline Eigen::Quaterniond quaternion(const Mat3& dcm) {
  Eigen::Quaterniond q(dcm);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

inline std::string profile_csv(const ocp::ProfileReport& r) {
  std::ostringstream o;
  o << "t,s,u,q_w,q_x,q_y,q_z,dcm_11,dcm_12,dcm_13,dcm_21,dcm_22,dcm_23,dcm_31,dcm_32,dcm_33,"
       "omega_x,omega_y,omega_z,omega_norm,omega_norm_deg,alpha_x,alpha_y,alpha_z,f_ccd,v_los,"
       "drift\n";
  using detail::fmt;
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    const auto& c = r.commands[k];
    const auto q = quaternion(c.dcm);
    o << fmt(r.t[k]) << ',' << fmt(r.s[k]) << ',' << fmt(r.u[k]) << ',' << fmt(q.w()) << ','
      << fmt(q.x()) << ',' << fmt(q.y()) << ',' << fmt(q.z());
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) o << ',' << fmt(c.dcm(i, j));
    }
    o << ',' << fmt(c.omega.x()) << ',' << fmt(c.omega.y()) << ',' << fmt(c.omega.z()) << ','
      << fmt(c.omega.norm()) << ',' << fmt(c.omega.norm() * kRadToDeg) << ','
      << fmt(c.alpha.x()) << ',' << fmt(c.alpha.y()) << ',' << fmt(c.alpha.z()) << ','
      << fmt(c.f_ccd) << ',' << fmt(c.v_los) << ',' << fmt(c.drift) << '\n';
  }
  return o.str();
}

inline std::string iterations_csv(const std::vector<ddp::IterationRecord>& history) {
  std::ostringstream o;
  o << "iteration,cost,augmented_before,augmented_after,psi_norm,max_g,max_h,delta_v,step,"
       "regularization,min_lambda,max_asymmetry\n";
  using detail::fmt;
  for (const auto& h : history) {
    o << h.iteration << ',' << fmt(h.cost) << ',' << fmt(h.augmented_before) << ','
      << fmt(h.augmented_after) << ',' << fmt(h.psi_norm) << ',' << fmt(h.max_g) << ','
      << fmt(h.max_h) << ',' << fmt(h.delta_v) << ',' << fmt(h.step) << ','
      << fmt(h.regularization) << ',' << fmt(h.min_lambda) << ',' << fmt(h.max_asymmetry)
      << '\n';
  }
  return o.str();
}

/// Geometry that two runs must share to be comparable.
inline json fingerprint(const config::RunConfig& c) {
  const auto& sc = c.scenario;
  return {{"orbit_position", detail::vec(sc.orbit.position)},
          {"orbit_velocity", detail::vec(sc.orbit.velocity)},
          {"start_ecef", detail::vec(sc.start_ecef)},
          {"end_ecef", detail::vec(sc.end_ecef)},
          {"t0", sc.t0},
          {"tf", sc.tf},
          {"earth",
           {{"radius", sc.earth.radius},
            {"mu", sc.earth.mu},
            {"rotation_rate", sc.earth.rotation_rate},
            {"initial_angle", sc.earth.initial_angle}}},
          {"camera",
           {{"focal_length", sc.camera.focal_length}, {"pixel_pitch", sc.camera.pixel_pitch}}}};
}

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"integral_omega_sq", "max_omega",
                                                 "terminal_error"};
  return names;
}

inline json metrics(const ocp::ProfileReport& r) {
  return {{"integral_omega_sq", r.integral_omega_sq},
          {"integral_omega_sq_trapezoid", r.integral_omega_sq_trapezoid},
          {"max_omega", r.max_omega},
          {"min_omega", r.min_omega},
          {"mean_omega", r.mean_omega},
          {"terminal_error", r.terminal_error},
          {"min_f_ccd", r.min_f_ccd},
          {"max_f_ccd", r.max_f_ccd},
          {"max_drift", r.max_drift},
          {"max_bound_violation", r.max_bound_violation}};
}

// Label of the smallest value of `key` among `rows` (objects with "label" and "metrics").
inline json winner(const json& rows, const std::string& key) {
  json best;
  double value = std::numeric_limits<double>::infinity();
  for (const auto& row : rows) {
    if (!row.contains("metrics")) continue;
    const double v = row["metrics"][key].get<double>();
    if (v < value) {
      value = v;
      best = row["label"];
    }
  }
  return best;
}

inline json summary(const config::RunConfig& c, const std::vector<MethodRun>& runs) {
  json methods = json::array();
  const bool bounded = c.has_bounds;
  const auto& cam = c.scenario.camera;
  for (const auto& m : runs) {
    json row = {{"label", m.label},
                {"objective", ocp::to_string(m.objective)},
                {"constrained", m.constrained}};
    if (m.result) {
      const auto& r = *m.result;
      row["converged"] = r.converged();
      row["iterations"] = r.solution ? r.solution->iterations : 0;
      row["metrics"] = metrics(r.report);
      if (bounded) {
        // Recompute against the configured bounds: unconstrained runs carry them too.
        double violation = -std::numeric_limits<double>::infinity();
        for (const auto& cmd : r.report.commands) {
          violation = std::max({violation, (cam.line_rate_min - cmd.f_ccd) / cam.line_rate_min,
                                (cmd.f_ccd - cam.line_rate_max) / cam.line_rate_max});
        }
        row["node_bound_violation"] = violation;
        row["bounds_satisfied"] = violation <= c.solver.eps_g;
      }
      if (r.solution && !r.solution->warnings.empty()) row["warnings"] = r.solution->warnings;
    } else {
      row["converged"] = false;
    }
    if (!m.error.empty()) row["error"] = m.error;
    methods.push_back(row);
  }
  json out = {{"scenario", c.name},
              {"fingerprint", fingerprint(c)},
              {"constrained", c.scenario.f_ccd_bounds_active},
              {"dt", c.scenario.dt},
              {"units", {{"omega", "deg/s"}, {"integral_omega_sq", "deg^2/s"},
                         {"terminal_error", "rad"}, {"f_ccd", "Hz"}}},
              {"solver",
               {{"k_u", c.solver.k_u},
                {"k_nu", c.solver.k_nu},
                {"gamma", c.solver.gamma},
                {"eps_V", c.solver.eps_V},
                {"eps_g", c.solver.eps_g},
                {"eps_h", c.solver.eps_h},
                {"eps_psi", c.solver.eps_psi},
                {"max_iterations", c.solver.max_iterations}}},
              {"methods", methods}};
  if (bounded) {
    out["line_rate_bounds"] = {cam.line_rate_min, cam.line_rate_max};
  }
  json winners = json::object();
  for (const auto& key : {"integral_omega_sq", "max_omega"}) winners[key] = winner(methods, key);
  out["winners"] = winners;
  out["exit_code"] = exit_code(runs);
  out["note"] = "deterministic: no randomness or wall-clock data in any artifact";
  return out;
}

inline void write_plots(const fs::path& dir, const config::RunConfig& c,
                        const std::vector<MethodRun>& runs) {
  struct Panel {
    const char* file;
    const char* title;
    const char* y_label;
    std::function<double(const ocp::ProfileReport&, std::size_t)> value;
  };
  const std::vector<Panel> panels = {
      {"s.svg", "Scan angle", "s [rad]", [](const auto& r, std::size_t k) { return r.s[k]; }},
      {"u.svg", "Scan rate", "u [rad/s]", [](const auto& r, std::size_t k) { return r.u[k]; }},
      {"f_ccd.svg", "Line rate", "f_CCD [Hz]",
       [](const auto& r, std::size_t k) { return r.commands[k].f_ccd; }},
      {"omega.svg", "Angular rate", "|omega| [deg/s]",
       [](const auto& r, std::size_t k) { return r.omega_deg[k]; }},
  };
  for (const auto& p : panels) {
    plot::Chart chart{c.name + ": " + p.title, "t [s]", p.y_label, {}};
    for (const auto& m : runs) {
      if (!m.result) continue;
      const auto& r = m.result->report;
      plot::Series s{m.label, r.t, {}, false};
      for (std::size_t k = 0; k < r.t.size(); ++k) s.y.push_back(p.value(r, k));
      chart.series.push_back(std::move(s));
    }
    if (std::string(p.file) == "f_ccd.svg" && c.has_bounds && !chart.series.empty()) {
      const auto& t = chart.series.front().x;
      const std::vector<double> ends = {t.front(), t.back()};
      const auto& cam = c.scenario.camera;
      chart.series.push_back({"bounds", ends, {cam.line_rate_min, cam.line_rate_min}, true});
      chart.series.push_back({"", ends, {cam.line_rate_max, cam.line_rate_max}, true});
    }
    detail::write_file(dir / p.file, plot::render(chart));
  }
}

/// Writes every artifact of a run into `dir` and returns the summary.
inline json write_run(const fs::path& dir, const config::RunConfig& c,
                      const std::vector<MethodRun>& runs) {
  fs::create_directories(dir / "plots");
  for (const auto& m : runs) {
    if (m.result) detail::write_file(dir / (m.label + "_profile.csv"), profile_csv(m.result->report));
    if (m.result && m.result->solution) {
      detail::write_file(dir / (m.label + "_iterations.csv"),
                         iterations_csv(m.result->solution->history));
    }
  }
  write_plots(dir / "plots", c, runs);
  json s = summary(c, runs);
  detail::write_file(dir / "summary.json", s.dump(2) + "\n");
  return s;
}

/// Human-readable metric table for stdout.
inline std::string table(const json& rows) {
  std::ostringstream o;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-34s %14s %12s %12s %6s\n", "method", "int w^2 dt", "max w",
                "|s(tf)-sf|", "conv");
  o << buf;
  for (const auto& row : rows) {
    if (!row.contains("metrics")) {
      std::snprintf(buf, sizeof buf, "%-34s %s\n", row["label"].get<std::string>().c_str(),
                    row.value("error", std::string("failed")).c_str());
      o << buf;
      continue;
    }
    const auto& m = row["metrics"];
    std::snprintf(buf, sizeof buf, "%-34s %14.6f %12.6f %12.3e %6s\n",
                  row["label"].get<std::string>().c_str(), m["integral_omega_sq"].get<double>(),
                  m["max_omega"].get<double>(), m["terminal_error"].get<double>(),
                  row["converged"].get<bool>() ? "yes" : "no");
    o << buf;
  }
  return o.str();
}

// ---------------------------------------------------------------------------
// Comparison

class CompareError : public Error {
 public:
  using Error::Error;
};

inline json load_summary(const fs::path& run_dir) {
  const fs::path file = run_dir / "summary.json";
  std::ifstream f(file);
  if (!f) throw CompareError("no summary.json in " + run_dir.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw CompareError(file.string() + ": " + e.what());
  }
}

namespace detail {

inline bool same_numbers(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    return std::abs(x - y) <= 1e-12 * std::max({1.0, std::abs(x), std::abs(y)});
  }
  if (a.type() != b.type() || a.size() != b.size()) return false;
  if (a.is_array()) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!same_numbers(a[i], b[i])) return false;
    }
    return true;
  }
  if (a.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key()) || !same_numbers(it.value(), b[it.key()])) return false;
    }
    return true;
  }
  return a == b;
}

}  // namespace detail

/// Metric matrix over several runs of one scenario, with winners and deltas
/// against the first run's method of the same label.
inline json compare(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.size() < 2) throw CompareError("compare needs at least two run directories");
  std::vector<json> runs;
  for (const auto& d : run_dirs) runs.push_back(load_summary(d));
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (!detail::same_numbers(runs[0]["fingerprint"], runs[i]["fingerprint"])) {
      throw CompareError("scenario mismatch: " + run_dirs[0].string() + " (" +
                         runs[0]["scenario"].get<std::string>() + ") vs " +
                         run_dirs[i].string() + " (" + runs[i]["scenario"].get<std::string>() +
                         ")");
    }
  }
  std::map<std::string, json> reference;
  for (const auto& row : runs[0]["methods"]) {
    if (row.contains("metrics")) reference[row["label"].get<std::string>()] = row["metrics"];
  }
  json rows = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (const auto& m : runs[i]["methods"]) {
      json row = {{"run", run_dirs[i].string()},
                  {"label", run_dirs[i].filename().string() + "/" + m["label"].get<std::string>()},
                  {"method", m["label"]},
                  {"converged", m.value("converged", false)}};
      if (m.contains("metrics")) {
        row["metrics"] = json::object();
        for (const auto& key : metric_names()) row["metrics"][key] = m["metrics"][key];
        const auto ref = reference.find(m["label"].get<std::string>());
        if (ref != reference.end()) {
          json delta = json::object();
          for (const auto& key : metric_names()) {
            delta[key] = m["metrics"][key].get<double>() - ref->second[key].get<double>();
          }
          row["delta_vs_first"] = delta;
        }
      }
      if (m.contains("error")) row["error"] = m["error"];
      rows.push_back(row);
    }
  }
  json winners = json::object();
  for (const auto& key : {"integral_omega_sq", "max_omega"}) winners[key] = winner(rows, key);
  return {{"scenario", runs[0]["scenario"]}, {"rows", rows}, {"winners", winners}};
}

inline std::string comparison_csv(const json& cmp) {
  std::ostringstream o;
  o << "label,integral_omega_sq,max_omega,terminal_error,delta_integral_omega_sq,"
       "delta_max_omega,winner_integral,winner_max\n";
  for (const auto& row : cmp["rows"]) {
    if (!row.contains("metrics")) continue;
    const auto& m = row["metrics"];
    const bool has_delta = row.contains("delta_vs_first");
    o << row["label"].get<std::string>() << ',' << detail::fmt(m["integral_omega_sq"].get<double>()) << ','
      << detail::fmt(m["max_omega"].get<double>()) << ',' << detail::fmt(m["terminal_error"].get<double>()) << ','
      << (has_delta ? detail::fmt(row["delta_vs_first"]["integral_omega_sq"].get<double>()) : "") << ','
      << (has_delta ? detail::fmt(row["delta_vs_first"]["max_omega"].get<double>()) : "") << ','
      << (cmp["winners"]["integral_omega_sq"] == row["label"] ? "*" : "") << ','
      << (cmp["winners"]["max_omega"] == row["label"] ? "*" : "") << '\n';
  }
  return o.str();
}

}  // namespace stripguide::runner
