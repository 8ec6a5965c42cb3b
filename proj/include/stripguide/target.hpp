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

#include "stripguide/astro.hpp"
#include "stripguide/common.hpp"

namespace stripguide::target {

/// Great-circle strip on a spherical Earth, in ECEF coordinates.
///
/// r(s) = R (cos s x_axis + sin s y_axis), 0 <= s <= arc_length.
struct TargetCurve {
  Vec3 x_axis = Vec3::UnitX();
  Vec3 y_axis = Vec3::UnitY();
  Vec3 z_axis = Vec3::UnitZ();
  double arc_length = 0.0;  // rad
  double radius = 0.0;      // m

  Vec3 position_ecef(double s) const {
    return radius * (std::cos(s) * x_axis + std::sin(s) * y_axis);
  }
};

/// Arc angle along the curve and its first three time derivatives.
struct ScanState {
  double s = 0.0;
  double rate = 0.0;
  double accel = 0.0;
  double jerk = 0.0;
};

/// Target kinematics at one instant, all vectors resolved in inertial axes.
///
/// The fixed_* members are derivatives taken in the Earth-fixed frame; the
/// remaining ones are inertial derivatives.
struct TargetState {
  Vec3 position = Vec3::Zero();
  Vec3 fixed_velocity = Vec3::Zero();
  Vec3 fixed_acceleration = Vec3::Zero();
  Vec3 fixed_jerk = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Vec3 jerk = Vec3::Zero();
};

/// Points on the sphere from spherical latitude/longitude (radians).
inline Vec3 ecef_from_latlon(double lat, double lon, double radius) {
  return radius * Vec3(std::cos(lat) * std::cos(lon),
                       std::cos(lat) * std::sin(lon), std::sin(lat));
}

inline constexpr double kEndpointRadiusTolerance = 1.0;  // m
inline constexpr double kAntipodalTolerance = 1e-8;

inline TargetCurve build_curve(const Vec3& start, const Vec3& end,
                               double radius) {
  require_finite(start, "strip start");
  require_finite(end, "strip end");
  if (!(radius > 0.0)) {
    throw ValidationError("sphere radius must be positive");
  }
  if (std::abs(start.norm() - radius) > kEndpointRadiusTolerance ||
      std::abs(end.norm() - radius) > kEndpointRadiusTolerance) {
    throw ValidationError("strip endpoints must lie on the sphere");
  }
  const Vec3 a = start.normalized();
  const Vec3 b = end.normalized();
  const Vec3 normal = a.cross(b);
  if (normal.norm() < kAntipodalTolerance) {
    throw DegenerateGeometryError(
        "strip endpoints are identical or antipodal; great circle undefined");
  }
  TargetCurve c;
  c.radius = radius;
  c.x_axis = a;
  c.z_axis = normal.normalized();
  c.y_axis = c.z_axis.cross(c.x_axis);
  c.arc_length = std::atan2(normal.norm(), a.dot(b));
  return c;
}

/// Target position and derivatives for a given scan state at time t.
inline TargetState evaluate(const TargetCurve& curve, const ScanState& scan,
                            double t, const astro::EarthModel& earth) {
  const double cs = std::cos(scan.s);
  const double sn = std::sin(scan.s);
  const double r = curve.radius;
  const Vec3 radial = cs * curve.x_axis + sn * curve.y_axis;
  const Vec3 tangent = -sn * curve.x_axis + cs * curve.y_axis;

  const double sd = scan.rate;
  const double sdd = scan.accel;
  const double sddd = scan.jerk;

  const Vec3 pos_f = r * radial;
  const Vec3 vel_f = r * sd * tangent;
  const Vec3 acc_f = r * sdd * tangent - r * sd * sd * radial;
  const Vec3 jerk_f = r * (sddd - sd * sd * sd) * tangent - 3.0 * r * sd * sdd * radial;

  const Mat3 c = astro::earth_rotation_dcm(t, earth);
  const Vec3 w = earth.rotation_vector();

  TargetState out;
  out.position = c * pos_f;
  out.fixed_velocity = c * vel_f;
  out.fixed_acceleration = c * acc_f;
  out.fixed_jerk = c * jerk_f;

  const Vec3& p = out.position;
  const Vec3& v1 = out.fixed_velocity;
  const Vec3& a1 = out.fixed_acceleration;
  const Vec3 wp = w.cross(p);
  const Vec3 wwp = w.cross(wp);
  const Vec3 wv1 = w.cross(v1);
  out.velocity = v1 + wp;
  out.acceleration = a1 + 2.0 * wv1 + wwp;
  out.jerk = out.fixed_jerk + 3.0 * w.cross(a1) + 3.0 * w.cross(wv1) + w.cross(wwp);
  return out;
}

}  // namespace stripguide::target
