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

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace stripguide {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs violate a documented precondition (non-finite, out of range).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Propagated orbit reached the Earth's surface.
class ImpactError : public Error {
 public:
  using Error::Error;
};

/// Geometry admits no unique answer (parallel vectors, zero-length LOS,
/// zero ground velocity).
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

/// The attitude rate formulas divide by a vanishing k_y component.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Forward integration produced non-finite values.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Q_uu could not be made positive definite within the regularization limit.
class SweepFailure : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

inline void require_finite(const Vec3& v, const char* what) {
  if (!v.allFinite()) {
    throw ValidationError(std::string(what) + " is not finite");
  }
}

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw ValidationError(std::string(what) + " is not finite");
  }
}

/// Skew-symmetric cross-product matrix, skew(a) * b == a.cross(b).
inline Mat3 skew(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(),  //
      a.z(), 0.0, -a.x(),   //
      -a.y(), a.x(), 0.0;
  return m;
}

}  // namespace stripguide
