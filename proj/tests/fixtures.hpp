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

#include <array>
#include <string>

#include "stripguide/astro.hpp"
#include "stripguide/common.hpp"
#include "stripguide/ocp.hpp"
#include "stripguide/target.hpp"

namespace stripguide::fixtures {

// 500 km circular sun-synchronous-like orbit used by every canonical strip.
inline astro::OrbitState canonical_orbit() {
  astro::KeplerElements el;
  el.semi_major_axis = astro::EarthModel{}.radius + 500e3;
  el.inclination = 97.4 * kDegToRad;
  el.true_anomaly = 30.0 * kDegToRad;
  return astro::from_elements(el, astro::EarthModel{}.mu);
}

struct StripEnds {
  const char* name;
  double lat0, lon0, lat1, lon1;  // deg
};

inline constexpr std::array<StripEnds, 4> kStrips = {{
    {"parallel", 29.724865, -4.252697, 31.603989, -4.719592},
    {"offset", 29.651134, -4.657516, 30.094758, -6.466690},
    {"perpendicular", 30.889057, -3.465356, 30.521770, -5.510843},
    {"reverse", 31.319932, -6.253044, 29.442060, -5.767666},
}};

inline ocp::StripScenario canonical_scenario(std::size_t i) {
  const auto& e = kStrips.at(i);
  ocp::StripScenario sc;
  sc.name = e.name;
  sc.orbit = canonical_orbit();
  const double r = sc.earth.radius;
  sc.start_ecef = target::ecef_from_latlon(e.lat0 * kDegToRad, e.lon0 * kDegToRad, r);
  sc.end_ecef = target::ecef_from_latlon(e.lat1 * kDegToRad, e.lon1 * kDegToRad, r);
  return sc;
}

}  // namespace stripguide::fixtures
