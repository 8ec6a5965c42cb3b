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

#include <cmath>

#include "stripguide/astro.hpp"
#include "stripguide/common.hpp"
#include "stripguide/target.hpp"

namespace stripguide::attitude {

/// Line of sight from spacecraft to target and its inertial derivatives.
struct LosState {
  Vec3 rho = Vec3::Zero();
  Vec3 rho_dot = Vec3::Zero();
  Vec3 rho_ddot = Vec3::Zero();
  double range = 0.0;
  Vec3 direction = Vec3::Zero();
};

/// Vector fixing the rotation about the boresight, with inertial derivatives.
struct ReferenceVector {
  Vec3 k = Vec3::Zero();
  Vec3 k_dot = Vec3::Zero();
  Vec3 k_ddot = Vec3::Zero();
};

struct CameraParams {
  double focal_length = 0.6;    // m
  double pixel_pitch = 7.0e-6;  // m
  double line_rate_min = 0.0;   // Hz
  double line_rate_max = 1e9;   // Hz

  void validate() const {
    if (!(focal_length > 0.0) || !(pixel_pitch > 0.0)) {
      throw ValidationError("camera focal length and pixel pitch must be positive");
    }
    if (!(line_rate_min >= 0.0) || !(line_rate_min < line_rate_max)) {
      throw ValidationError("camera line-rate bounds need 0 <= min < max");
    }
  }
};

struct ScanMetrics {
  double v_los = 0.0;  // m/s, ground motion projected on the sensor plane
  double v_ccd = 0.0;  // m/s, image motion on the focal plane
  double f_ccd = 0.0;  // Hz, TDI line rate
  double psi = 0.0;    // rad, angle between ground velocity and boresight
};

/// Desired frame and its rates at one instant.
///
/// `dcm` maps inertial coordinates into D; its rows are x_D, y_D, z_D
/// resolved in inertial axes. omega and alpha are resolved in inertial axes.
struct AttitudeCommand {
  Mat3 dcm = Mat3::Identity();
  Vec3 omega = Vec3::Zero();
  Vec3 alpha = Vec3::Zero();
  double v_los = 0.0;
  double v_ccd = 0.0;
  double f_ccd = 0.0;
  double psi = 0.0;
  double drift = 0.0;
};

inline constexpr double kFrameDegeneracyTolerance = 1e-12;
inline constexpr double kSingularKyTolerance = 1e-9;

inline LosState los_state(const astro::SatelliteState& sat,
                          const target::TargetState& tgt) {
  LosState los;
  los.rho = tgt.position - sat.position;
  los.rho_dot = tgt.velocity - sat.velocity;
  los.rho_ddot = tgt.acceleration - sat.acceleration;
  los.range = los.rho.norm();
  if (!(los.range > 0.0)) {
    throw DegenerateGeometryError("line of sight has zero length");
  }
  los.direction = los.rho / los.range;
  return los;
}

/// Zero-drift reference vector k = -(Earth-fixed target velocity).
///
/// The derivatives follow from k = -v_T + w x r_T with constant w.
inline ReferenceVector reference_vector(const target::TargetState& tgt,
                                        const astro::EarthModel& earth) {
  const Vec3 w = earth.rotation_vector();
  ReferenceVector ref;
  ref.k = -(tgt.velocity - w.cross(tgt.position));
  ref.k_dot = -(tgt.acceleration - w.cross(tgt.velocity));
  ref.k_ddot = -(tgt.jerk - w.cross(tgt.acceleration));
  if (!(ref.k.norm() > 0.0)) {
    throw DegenerateGeometryError(
        "target has zero ground velocity; drift direction is undefined");
  }
  return ref;
}

inline Mat3 desired_frame(const LosState& los, const ReferenceVector& ref) {
  const Vec3 z = los.direction;
  const Vec3 zk = z.cross(ref.k);
  if (!(zk.norm() > kFrameDegeneracyTolerance * ref.k.norm())) {
    throw DegenerateGeometryError("reference vector is parallel to the boresight");
  }
  const Vec3 x = zk.normalized();
  const Vec3 y = z.cross(x);
  Mat3 dcm;
  dcm.row(0) = x.transpose();
  dcm.row(1) = y.transpose();
  dcm.row(2) = z.transpose();
  return dcm;
}

namespace detail {

inline double checked_ky(const ReferenceVector& ref, const Vec3& y) {
  const double ky = y.dot(ref.k);
  if (std::abs(ky) < kSingularKyTolerance * ref.k.norm()) {
    throw SingularityError("k has no y_D component; boresight rate is singular");
  }
  return ky;
}

}  // namespace detail

/// Angular velocity of D with respect to inertial space.
///
/// The perpendicular part follows the boresight; the boresight part keeps
/// x_D orthogonal to k. Components subscripted with D are projections on the
/// current frame axes, and k_dot is the inertial derivative.
inline Vec3 angular_velocity(const LosState& los, const ReferenceVector& ref,
                             const Mat3& frame) {
  const Vec3 x = frame.row(0).transpose();
  const Vec3 y = frame.row(1).transpose();
  const Vec3 z = frame.row(2).transpose();
  const double ky = detail::checked_ky(ref, y);
  const double kz = z.dot(ref.k);

  const Vec3 w_perp = los.rho.cross(los.rho_dot) / (los.range * los.range);
  const double wy = y.dot(w_perp);
  const double wz = (wy * kz - x.dot(ref.k_dot)) / ky;
  return w_perp + wz * z;
}

inline Vec3 angular_acceleration(const LosState& los, const ReferenceVector& ref,
                                 const Mat3& frame, const Vec3& omega) {
  const Vec3 x = frame.row(0).transpose();
  const Vec3 y = frame.row(1).transpose();
  const Vec3 z = frame.row(2).transpose();
  const double ky = detail::checked_ky(ref, y);
  const double kz = z.dot(ref.k);

  const double r2 = los.range * los.range;
  const double wx = x.dot(omega);
  const double wy = y.dot(omega);
  const double wz = z.dot(omega);
  const Vec3 w_perp = wx * x + wy * y;

  const Vec3 a_perp = los.rho.cross(los.rho_ddot) / r2 -
                      2.0 * los.rho.dot(los.rho_dot) / r2 * w_perp +
                      w_perp.cross(wz * z);
  const double ay = y.dot(a_perp);
  const double kdy = y.dot(ref.k_dot);
  const double kdz = z.dot(ref.k_dot);
  const double kddx = x.dot(ref.k_ddot);

  const double az = (ay * kz - wx * wz * kz - wx * wy * ky + 2.0 * wy * kdz -
                     2.0 * wz * kdy - kddx) /
                    ky;
  return a_perp + az * z;
}

inline ScanMetrics scan_metrics(const LosState& los, const target::TargetState& tgt,
                                const Mat3& frame, const CameraParams& cam) {
  const Vec3 z = frame.row(2).transpose();
  const Vec3& ground = tgt.fixed_velocity;
  ScanMetrics m;
  m.psi = std::atan2(ground.cross(z).norm(), ground.dot(z));
  m.v_los = ground.norm() * std::sin(m.psi);
  m.v_ccd = cam.focal_length / los.range * m.v_los;
  m.f_ccd = m.v_ccd / cam.pixel_pitch;
  return m;
}

/// Velocity of the instantaneous ground point relative to D, resolved in D.
inline Vec3 frame_relative_velocity(const LosState& los,
                                    const target::TargetState& tgt,
                                    const Mat3& frame) {
  const Vec3 z = frame.row(2).transpose();
  const Vec3 v = -tgt.fixed_velocity + z.dot(los.rho_dot) * z;
  return frame * v;
}

/// Angle between the sensor-plane image motion and the -y_D scan direction.
inline double drift_angle(const Vec3& relative_velocity_in_d) {
  const double px = relative_velocity_in_d.x();
  const double py = relative_velocity_in_d.y();
  if (!(std::hypot(px, py) > 0.0)) {
    throw DegenerateGeometryError("no in-plane image motion; drift angle undefined");
  }
  return std::atan2(std::abs(px), -py);
}

/// Full command chain for one satellite/target pair.
inline AttitudeCommand command(const astro::SatelliteState& sat,
                               const target::TargetState& tgt,
                               const astro::EarthModel& earth,
                               const CameraParams& cam) {
  const LosState los = los_state(sat, tgt);
  const ReferenceVector ref = reference_vector(tgt, earth);
  AttitudeCommand cmd;
  cmd.dcm = desired_frame(los, ref);
  cmd.omega = angular_velocity(los, ref, cmd.dcm);
  cmd.alpha = angular_acceleration(los, ref, cmd.dcm, cmd.omega);
  const ScanMetrics m = scan_metrics(los, tgt, cmd.dcm, cam);
  cmd.v_los = m.v_los;
  cmd.v_ccd = m.v_ccd;
  cmd.f_ccd = m.f_ccd;
  cmd.psi = m.psi;
  cmd.drift = drift_angle(frame_relative_velocity(los, tgt, cmd.dcm));
  return cmd;
}

}  // namespace stripguide::attitude
