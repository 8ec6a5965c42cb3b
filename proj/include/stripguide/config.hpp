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

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stripguide/astro.hpp"
#include "stripguide/attitude.hpp"
#include "stripguide/common.hpp"
#include "stripguide/ddp.hpp"
#include "stripguide/ocp.hpp"
#include "stripguide/target.hpp"

namespace stripguide::config {

/// Configuration problem, reported with the offending field path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& detail)
      : Error(path.empty() ? detail : path + ": " + detail), path_(path), detail_(detail) {}
  const std::string& path() const { return path_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string path_;
  std::string detail_;
};

struct LatLon {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
};

/// Everything one `run` needs. Angles are degrees in files, radians here.
struct RunConfig {
  std::string name;
  ocp::StripScenario scenario;
  LatLon start;
  LatLon end;
  std::vector<ocp::Objective> objectives = {ocp::Objective::kLinear,
                                            ocp::Objective::kMinIntegral,
                                            ocp::Objective::kMinMax};
  ddp::SolverParams solver = ocp::default_solver_params();
  ocp::SoftmaxSchedule softmax;
  bool has_bounds = false;  // camera bounds given in the file
};

inline ocp::Objective parse_objective(const std::string& text, const std::string& path) {
  if (text == "linear") return ocp::Objective::kLinear;
  if (text == "min_integral") return ocp::Objective::kMinIntegral;
  if (text == "min_max") return ocp::Objective::kMinMax;
  throw ConfigError(path, "unknown objective '" + text +
                              "' (expected linear, min_integral or min_max)");
}

namespace detail {

class Node {
 public:
  Node(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return node_[key].IsDefined() && !node_[key].IsNull(); }

  Node child(const std::string& key) const {
    const YAML::Node c = node_[key];
    const std::string p = join(key);
    if (!c.IsDefined() || c.IsNull()) throw ConfigError(p, "missing required field");
    return {c, p};
  }

  Node map(const std::string& key) const {
    Node c = child(key);
    if (!c.node_.IsMap()) throw ConfigError(c.path_, "expected a mapping");
    return c;
  }

  double number(const std::string& key) const { return child(key).as_number(); }

  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  double as_number() const {
    if (!node_.IsScalar()) throw ConfigError(path_, "expected a number");
    double v = 0.0;
    try {
      v = node_.as<double>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path_, "expected a number, got '" + node_.Scalar() + "'");
    }
    if (!std::isfinite(v)) throw ConfigError(path_, "must be finite");
    return v;
  }

  int integer_or(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const Node c = child(key);
    const double v = c.as_number();
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(c.path_, "expected an integer");
    return static_cast<int>(v);
  }

  bool boolean_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const Node c = child(key);
    try {
      return c.node_.as<bool>();
    } catch (const YAML::Exception&) {
      throw ConfigError(c.path_, "expected true or false");
    }
  }

  std::string text(const std::string& key) const {
    const Node c = child(key);
    if (!c.node_.IsScalar()) throw ConfigError(c.path_, "expected a string");
    return c.node_.Scalar();
  }

  std::vector<Node> sequence(const std::string& key) const {
    const Node c = child(key);
    if (!c.node_.IsSequence()) throw ConfigError(c.path_, "expected a list");
    std::vector<Node> out;
    for (std::size_t i = 0; i < c.node_.size(); ++i) {
      out.emplace_back(c.node_[i], c.path_ + "[" + std::to_string(i) + "]");
    }
    return out;
  }

  const YAML::Node& raw() const { return node_; }

  /// Rejects keys outside `allowed`, so typos surface as errors.
  void only(std::initializer_list<const char*> allowed) const {
    if (!node_.IsMap()) throw ConfigError(path_, "expected a mapping");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!ok.count(key)) throw ConfigError(join(key), "unknown field");
    }
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  YAML::Node node_;
  std::string path_;
};

// Re-raise library validation failures against the field that caused them.
template <typename Fn>
void at_path(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    throw ConfigError(path, e.what());
  }
}

inline void positive(const Node& parent, const std::string& key, double v) {
  if (!(v > 0.0)) throw ConfigError(parent.path() + "." + key, "must be positive");
}

inline astro::EarthModel parse_earth(const Node& n) {
  n.only({"radius", "mu", "rotation_rate", "initial_angle_deg"});
  astro::EarthModel e;
  e.radius = n.number_or("radius", e.radius);
  e.mu = n.number_or("mu", e.mu);
  e.rotation_rate = n.number_or("rotation_rate", e.rotation_rate);
  e.initial_angle = n.number_or("initial_angle_deg", 0.0) * kDegToRad;
  positive(n, "radius", e.radius);
  positive(n, "mu", e.mu);
  return e;
}

inline Vec3 vec3(const Node& parent, const std::string& key) {
  const auto items = parent.sequence(key);
  if (items.size() != 3) throw ConfigError(parent.path() + "." + key, "expected 3 numbers");
  return {items[0].as_number(), items[1].as_number(), items[2].as_number()};
}

inline astro::OrbitState parse_orbit(const Node& n, const astro::EarthModel& earth) {
  n.only({"altitude", "semi_major_axis", "eccentricity", "inclination_deg", "raan_deg",
          "arg_perigee_deg", "true_anomaly_deg", "position", "velocity"});
  if (n.has("position") || n.has("velocity")) {
    return {vec3(n, "position"), vec3(n, "velocity")};
  }
  astro::KeplerElements el;
  if (n.has("altitude") == n.has("semi_major_axis")) {
    throw ConfigError(n.path(), "give exactly one of altitude or semi_major_axis");
  }
  el.semi_major_axis =
      n.has("altitude") ? earth.radius + n.number("altitude") : n.number("semi_major_axis");
  el.eccentricity = n.number_or("eccentricity", 0.0);
  el.inclination = n.number_or("inclination_deg", 0.0) * kDegToRad;
  el.raan = n.number_or("raan_deg", 0.0) * kDegToRad;
  el.arg_perigee = n.number_or("arg_perigee_deg", 0.0) * kDegToRad;
  el.true_anomaly = n.number_or("true_anomaly_deg", 0.0) * kDegToRad;
  astro::OrbitState s;
  at_path(n.path(), [&] { s = astro::from_elements(el, earth.mu); });
  if (s.position.norm() <= earth.radius) throw ConfigError(n.path(), "orbit is below the surface");
  return s;
}

inline LatLon parse_point(const Node& n) {
  n.only({"lat_deg", "lon_deg"});
  LatLon p{n.number("lat_deg"), n.number("lon_deg")};
  if (std::abs(p.lat_deg) > 90.0) throw ConfigError(n.path() + ".lat_deg", "must lie in [-90, 90]");
  return p;
}

inline void parse_camera(const Node& n, attitude::CameraParams& cam, bool& has_bounds) {
  n.only({"focal_length", "pixel_pitch", "line_rate_min", "line_rate_max"});
  cam.focal_length = n.number_or("focal_length", cam.focal_length);
  cam.pixel_pitch = n.number_or("pixel_pitch", cam.pixel_pitch);
  positive(n, "focal_length", cam.focal_length);
  positive(n, "pixel_pitch", cam.pixel_pitch);
  if (n.has("line_rate_min") != n.has("line_rate_max")) {
    throw ConfigError(n.path(), "give both line_rate_min and line_rate_max or neither");
  }
  has_bounds = n.has("line_rate_min");
  if (has_bounds) {
    cam.line_rate_min = n.number("line_rate_min");
    cam.line_rate_max = n.number("line_rate_max");
    if (!(cam.line_rate_min > 0.0)) {
      throw ConfigError(n.path() + ".line_rate_min", "must be positive");
    }
    if (!(cam.line_rate_max > cam.line_rate_min)) {
      throw ConfigError(n.path() + ".line_rate_max", "must exceed line_rate_min");
    }
  }
}

inline void parse_solver(const Node& n, ddp::SolverParams& p) {
  n.only({"k_u", "k_nu", "gamma", "eps_V", "eps_g", "eps_h", "eps_psi", "max_iterations",
          "min_step", "mu0", "kappa0"});
  p.k_u = n.number_or("k_u", p.k_u);
  p.k_nu = n.number_or("k_nu", p.k_nu);
  p.gamma = n.number_or("gamma", p.gamma);
  p.eps_V = n.number_or("eps_V", p.eps_V);
  p.eps_g = n.number_or("eps_g", p.eps_g);
  p.eps_h = n.number_or("eps_h", p.eps_h);
  p.eps_psi = n.number_or("eps_psi", p.eps_psi);
  p.max_iterations = n.integer_or("max_iterations", p.max_iterations);
  p.min_step = n.number_or("min_step", p.min_step);
  p.mu0 = n.number_or("mu0", p.mu0);
  p.kappa0 = n.number_or("kappa0", p.kappa0);
  at_path(n.path(), [&] { p.validate(); });
}

inline void parse_softmax(const Node& n, ocp::SoftmaxSchedule& s) {
  n.only({"sharpness", "max_exponent", "warm_start", "max_recenter", "reference_tolerance"});
  s.sharpness = n.number_or("sharpness", s.sharpness);
  s.max_exponent = n.number_or("max_exponent", s.max_exponent);
  if (n.has("warm_start")) {
    s.warm_start.clear();
    for (const auto& item : n.sequence("warm_start")) s.warm_start.push_back(item.as_number());
  }
  s.max_recenter = n.integer_or("max_recenter", s.max_recenter);
  if (s.max_recenter < 0) throw ConfigError(n.path() + ".max_recenter", "must be >= 0");
  s.reference_tolerance = n.number_or("reference_tolerance", s.reference_tolerance);
  at_path(n.path(), [&] { s.validate(); });
}

}  // namespace detail

/// Parses a scenario file's root node.
inline RunConfig parse(const YAML::Node& root) {
  const detail::Node n(root, "");
  n.only({"name", "orbit", "earth", "strip", "horizon", "camera", "constrained", "objectives",
          "solver", "softmax"});
  RunConfig c;
  c.name = n.text("name");
  if (c.name.empty()) throw ConfigError("name", "must not be empty");
  auto& sc = c.scenario;
  sc.name = c.name;
  if (n.has("earth")) sc.earth = detail::parse_earth(n.map("earth"));
  sc.orbit = detail::parse_orbit(n.map("orbit"), sc.earth);

  const auto strip = n.map("strip");
  strip.only({"start", "end"});
  c.start = detail::parse_point(strip.map("start"));
  c.end = detail::parse_point(strip.map("end"));
  sc.start_ecef =
      target::ecef_from_latlon(c.start.lat_deg * kDegToRad, c.start.lon_deg * kDegToRad,
                               sc.earth.radius);
  sc.end_ecef = target::ecef_from_latlon(c.end.lat_deg * kDegToRad, c.end.lon_deg * kDegToRad,
                                         sc.earth.radius);

  const auto horizon = n.map("horizon");
  horizon.only({"t0", "tf", "dt"});
  sc.t0 = horizon.number_or("t0", 0.0);
  sc.tf = horizon.number("tf");
  sc.dt = horizon.number_or("dt", 1.0);
  detail::at_path("horizon", [&] { sc.validate(); });

  if (n.has("camera")) detail::parse_camera(n.map("camera"), sc.camera, c.has_bounds);
  sc.f_ccd_bounds_active = n.boolean_or("constrained", false);
  if (sc.f_ccd_bounds_active && !c.has_bounds) {
    throw ConfigError("constrained", "requires camera.line_rate_min and camera.line_rate_max");
  }

  if (n.has("objectives")) {
    c.objectives.clear();
    for (const auto& item : n.sequence("objectives")) {
      if (!item.raw().IsScalar()) throw ConfigError(item.path(), "expected an objective name");
      c.objectives.push_back(parse_objective(item.raw().Scalar(), item.path()));
    }
    if (c.objectives.empty()) throw ConfigError("objectives", "must list at least one objective");
  }
  if (n.has("solver")) detail::parse_solver(n.map("solver"), c.solver);
  if (n.has("softmax")) detail::parse_softmax(n.map("softmax"), c.softmax);
  return c;
}

inline RunConfig load(const std::string& file) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(file);
  } catch (const YAML::BadFile&) {
    throw ConfigError(file, "cannot read file");
  } catch (const YAML::ParserException& e) {
    throw ConfigError(file, std::string("YAML syntax error: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError(file, "top level must be a mapping");
  try {
    return parse(root);
  } catch (const ConfigError& e) {
    throw ConfigError(e.path().empty() ? file : file + ": " + e.path(), e.detail());
  }
}

}  // namespace stripguide::config
