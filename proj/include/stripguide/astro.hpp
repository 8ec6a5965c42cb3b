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
#include <vector>

#include "stripguide/common.hpp"

namespace stripguide::astro {

/// Spherical Earth with a constant rotation about the inertial z-axis.
///
/// Gravity is point-mass only. A J2 term would slot into
/// two_body_acceleration/two_body_jerk if ever needed.
struct EarthModel {
  double radius = 6378137.0;          // m
  double mu = 3.986004418e14;         // m^3/s^2
  double rotation_rate = 7.2921159e-5;  // rad/s
  double initial_angle = 0.0;         // rad, Earth rotation angle at t = 0

  Vec3 rotation_vector() const { return {0.0, 0.0, rotation_rate}; }

  void validate() const {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
      throw ValidationError("earth radius must be positive");
    }
    if (!(mu > 0.0) || !std::isfinite(mu)) {
      throw ValidationError("earth mu must be positive");
    }
    require_finite(rotation_rate, "earth rotation rate");
    require_finite(initial_angle, "earth initial angle");
  }

  static EarthModel non_rotating() {
    EarthModel e;
    e.rotation_rate = 0.0;
    return e;
  }
};

/// Position and velocity only; the input to propagation.
struct OrbitState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

/// Inertial kinematics of the spacecraft up to jerk.
struct SatelliteState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Vec3 jerk = Vec3::Zero();
};

struct KeplerElements {
  double semi_major_axis = 0.0;  // m
  double eccentricity = 0.0;
  double inclination = 0.0;      // rad
  double raan = 0.0;             // rad
  double arg_perigee = 0.0;      // rad
  double true_anomaly = 0.0;     // rad
};

inline Vec3 two_body_acceleration(double mu, const Vec3& r) {
  const double rn = r.norm();
  return -mu * r / (rn * rn * rn);
}

/// Exact time derivative of two_body_acceleration along the flow.
inline Vec3 two_body_jerk(double mu, const Vec3& r, const Vec3& v) {
  const double rn = r.norm();
  const double r3 = rn * rn * rn;
  const double r5 = r3 * rn * rn;
  return -mu * (v / r3 - 3.0 * r.dot(v) * r / r5);
}

inline SatelliteState complete(const OrbitState& s, const EarthModel& earth) {
  return {s.position, s.velocity, two_body_acceleration(earth.mu, s.position),
          two_body_jerk(earth.mu, s.position, s.velocity)};
}

inline double specific_energy(const OrbitState& s, double mu) {
  return 0.5 * s.velocity.squaredNorm() - mu / s.position.norm();
}

inline OrbitState from_elements(const KeplerElements& el, double mu) {
  if (!(el.semi_major_axis > 0.0) || !(el.eccentricity >= 0.0) ||
      !(el.eccentricity < 1.0)) {
    throw ValidationError("elements must describe an elliptic orbit");
  }
  const double p = el.semi_major_axis * (1.0 - el.eccentricity * el.eccentricity);
  const double nu = el.true_anomaly;
  const double r = p / (1.0 + el.eccentricity * std::cos(nu));
  const Vec3 r_pf(r * std::cos(nu), r * std::sin(nu), 0.0);
  const double h = std::sqrt(mu / p);
  const Vec3 v_pf(-h * std::sin(nu), h * (el.eccentricity + std::cos(nu)), 0.0);
  const Mat3 rot = (Eigen::AngleAxisd(el.raan, Vec3::UnitZ()) *
                    Eigen::AngleAxisd(el.inclination, Vec3::UnitX()) *
                    Eigen::AngleAxisd(el.arg_perigee, Vec3::UnitZ()))
                       .toRotationMatrix();
  return {rot * r_pf, rot * v_pf};
}

namespace detail {

struct Derivative {
  Vec3 dr;
  Vec3 dv;
};

inline Derivative rhs(double mu, const Vec3& r, const Vec3& v) {
  return {v, two_body_acceleration(mu, r)};
}

inline void check_state(const OrbitState& s, const EarthModel& earth) {
  if (!s.position.allFinite() || !s.velocity.allFinite()) {
    throw DivergenceError("orbit propagation produced a non-finite state");
  }
  if (s.position.norm() <= earth.radius) {
    throw ImpactError("orbit radius fell to or below the Earth radius");
  }
}

inline OrbitState rk4_step(const OrbitState& s, double h, double mu) {
  const auto k1 = rhs(mu, s.position, s.velocity);
  const auto k2 = rhs(mu, s.position + 0.5 * h * k1.dr, s.velocity + 0.5 * h * k1.dv);
  const auto k3 = rhs(mu, s.position + 0.5 * h * k2.dr, s.velocity + 0.5 * h * k2.dv);
  const auto k4 = rhs(mu, s.position + h * k3.dr, s.velocity + h * k3.dv);
  return {s.position + h / 6.0 * (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr),
          s.velocity + h / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv)};
}

}  // namespace detail

/// Fixed-step RK4 over `elapsed` seconds (may be negative). The step is the
/// largest value not exceeding `max_step` that divides the horizon evenly.
inline OrbitState propagate_orbit(const OrbitState& initial, double elapsed,
                                  const EarthModel& earth,
                                  double max_step = 0.1) {
  require_finite(initial.position, "initial position");
  require_finite(initial.velocity, "initial velocity");
  require_finite(elapsed, "propagation time");
  if (initial.position.norm() <= earth.radius) {
    throw ImpactError("initial radius is at or below the Earth radius");
  }
  if (elapsed == 0.0) {
    return initial;
  }
  const auto steps =
      static_cast<std::size_t>(std::ceil(std::abs(elapsed) / max_step - 1e-9));
  const double h = elapsed / static_cast<double>(std::max<std::size_t>(steps, 1));
  OrbitState s = initial;
  for (std::size_t i = 0; i < std::max<std::size_t>(steps, 1); ++i) {
    s = detail::rk4_step(s, h, earth.mu);
    detail::check_state(s, earth);
  }
  return s;
}

inline SatelliteState propagate(const OrbitState& initial, double elapsed,
                                const EarthModel& earth,
                                double max_step = 0.1) {
  return complete(propagate_orbit(initial, elapsed, earth, max_step), earth);
}

/// ECEF -> ECI rotation at time t.
inline Mat3 earth_rotation_dcm(double t, const EarthModel& earth) {
  const double angle = earth.initial_angle + earth.rotation_rate * t;
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

/// Earth-fixed-frame derivative of `vec`, given its inertial derivative.
/// Both input and output are resolved in inertial axes.
inline Vec3 fixed_frame_derivative(const Vec3& inertial_derivative,
                                   const Vec3& vec, const EarthModel& earth) {
  return inertial_derivative - earth.rotation_vector().cross(vec);
}

/// Satellite states sampled on a uniform time grid, propagated once.
///
/// Lookups on a sample time return the stored state; other times propagate
/// from the nearest sample.
class Ephemeris {
 public:
  Ephemeris() = default;

  Ephemeris(const OrbitState& initial, const EarthModel& earth, double t0,
            double t_end, double spacing, double max_step = 0.1)
      : earth_(earth), t0_(t0), spacing_(spacing), max_step_(max_step) {
    if (!(spacing > 0.0) || !(t_end >= t0)) {
      throw ValidationError("ephemeris needs t_end >= t0 and spacing > 0");
    }
    const auto count =
        static_cast<std::size_t>(std::llround((t_end - t0) / spacing)) + 1;
    samples_.reserve(count);
    OrbitState s = initial;
    samples_.push_back(s);
    for (std::size_t i = 1; i < count; ++i) {
      s = propagate_orbit(s, spacing, earth, max_step);
      samples_.push_back(s);
    }
  }

  SatelliteState at(double t) const {
    const double idx = (t - t0_) / spacing_;
    const auto nearest = std::clamp<long long>(
        std::llround(idx), 0, static_cast<long long>(samples_.size()) - 1);
    const double ts = t0_ + static_cast<double>(nearest) * spacing_;
    const auto& base = samples_[static_cast<std::size_t>(nearest)];
    if (std::abs(t - ts) < 1e-9) {
      return complete(base, earth_);
    }
    return propagate(base, t - ts, earth_, max_step_);
  }

  double start() const { return t0_; }
  double spacing() const { return spacing_; }
  std::size_t size() const { return samples_.size(); }
  const EarthModel& earth() const { return earth_; }

 private:
  EarthModel earth_;
  double t0_ = 0.0;
  double spacing_ = 1.0;
  double max_step_ = 0.1;
  std::vector<OrbitState> samples_;
};

}  // namespace stripguide::astro
