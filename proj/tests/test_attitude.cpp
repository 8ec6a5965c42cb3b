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


#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "fixtures.hpp"
#include "stripguide/attitude.hpp"
#include "stripguide/ocp.hpp"

namespace {

using namespace stripguide;
using attitude::LosState;
using attitude::ReferenceVector;

LosState make_los(const Vec3& rho, const Vec3& rho_dot, const Vec3& rho_ddot) {
  LosState l;
  l.rho = rho;
  l.rho_dot = rho_dot;
  l.rho_ddot = rho_ddot;
  l.range = rho.norm();
  l.direction = rho / l.range;
  return l;
}

// Body rate from differenced DCMs: [w_D]x = -C' C^T, returned in inertial axes.
Vec3 dcm_rate(const Mat3& before, const Mat3& mid, const Mat3& after, double h) {
  const Mat3 c_dot = (after - before) / (2 * h);
  const Mat3 w = -c_dot * mid.transpose();
  const Vec3 w_d(0.5 * (w(2, 1) - w(1, 2)), 0.5 * (w(0, 2) - w(2, 0)),
                 0.5 * (w(1, 0) - w(0, 1)));
  return mid.transpose() * w_d;
}

// Scan profile s(t) with its first three derivatives.
using Profile = std::function<target::ScanState(double)>;

Profile linear_profile(const ocp::StripContext& ctx) {
  const double rate = ctx.s_final() / (ctx.scenario().tf - ctx.scenario().t0);
  return [rate](double t) { return target::ScanState{rate * t, rate, 0.0, 0.0}; };
}

Profile curved_profile(const ocp::StripContext& ctx) {
  const double rate = ctx.s_final() / 30.0;
  // Same endpoints, with a slow middle and a nonzero jerk.
  const double a = 0.3 * rate;
  return [rate, a](double t) {
    const double w = 2 * kPi / 30.0;
    return target::ScanState{rate * t - a / w * std::sin(w * t), rate - a * std::cos(w * t),
                             a * w * std::sin(w * t), a * w * w * std::cos(w * t)};
  };
}

void check_rates(const ocp::StripContext& ctx, const Profile& prof, const std::string& label) {
  const double h = 1e-3;
  double worst_w = 0.0, worst_a = 0.0;
  for (int k = 0; k <= 30; ++k) {
    const double t = k * 1.0;
    const auto mid = ctx.command(t, prof(t));
    const auto lo = ctx.command(t - h, prof(t - h));
    const auto hi = ctx.command(t + h, prof(t + h));
    worst_w = std::max(worst_w, (dcm_rate(lo.dcm, mid.dcm, hi.dcm, h) - mid.omega).norm());
    worst_a = std::max(worst_a, ((hi.omega - lo.omega) / (2 * h) - mid.alpha).norm());
  }
  EXPECT_LT(worst_w, 1e-6) << label;
  EXPECT_LT(worst_a, 1e-5) << label;
}

TEST(Attitude, LosBasics) {
  astro::SatelliteState sat;
  sat.position = Vec3(7e6, 0, 0);
  target::TargetState tgt;
  tgt.position = sat.position + Vec3(1000, 0, 0);
  const auto los = attitude::los_state(sat, tgt);
  EXPECT_DOUBLE_EQ(los.range, 1000.0);
  EXPECT_EQ(los.direction, Vec3::UnitX());
  EXPECT_EQ(los.rho_dot, Vec3::Zero());
  tgt.position = sat.position;
  EXPECT_THROW(attitude::los_state(sat, tgt), DegenerateGeometryError);
}

TEST(Attitude, RangeRateMatchesDifference) {
  const Vec3 r0(3e5, -2e5, 4e5), v(-700, 1200, -300), a(2, -1, 0.5);
  auto rho = [&](double t) { return Vec3(r0 + v * t + 0.5 * a * t * t); };
  const double h = 1e-3;
  const auto los = make_los(rho(0), v, a);
  const double fd = (rho(h).norm() - rho(-h).norm()) / (2 * h);
  EXPECT_NEAR(los.direction.dot(los.rho_dot), fd, 1e-8 * std::abs(fd));
}

TEST(Attitude, ReferenceVectorCases) {
  target::TargetState tgt;
  tgt.position = Vec3(6378137.0, 0, 0);
  tgt.velocity = Vec3(0, 300, 10);
  const auto still = attitude::reference_vector(tgt, astro::EarthModel::non_rotating());
  EXPECT_EQ(still.k, -tgt.velocity);

  astro::EarthModel earth;
  tgt.velocity = earth.rotation_vector().cross(tgt.position);
  EXPECT_THROW(attitude::reference_vector(tgt, earth), DegenerateGeometryError);
}

TEST(Attitude, ReferenceVectorDerivativesMatchDifferences) {
  const ocp::StripContext ctx(fixtures::canonical_scenario(2));
  const auto prof = curved_profile(ctx);
  const auto& earth = ctx.scenario().earth;
  auto ref = [&](double t) {
    return attitude::reference_vector(target::evaluate(ctx.curve(), prof(t), t, earth), earth);
  };
  const double h = 1e-3;
  for (double t : {1.0, 14.0, 28.0}) {
    const auto mid = ref(t);
    const Vec3 kd_fd = (ref(t + h).k - ref(t - h).k) / (2 * h);
    const Vec3 kdd_fd = (ref(t + h).k_dot - ref(t - h).k_dot) / (2 * h);
    EXPECT_LT((kd_fd - mid.k_dot).norm() / mid.k_dot.norm(), 1e-6) << t;
    EXPECT_LT((kdd_fd - mid.k_ddot).norm() / mid.k_ddot.norm(), 1e-6) << t;
  }
}

TEST(Attitude, DesiredFrameHandExample) {
  const auto los = make_los(Vec3(0, 0, 5), Vec3::Zero(), Vec3::Zero());
  const Mat3 d = attitude::desired_frame(los, {Vec3::UnitX(), Vec3::Zero(), Vec3::Zero()});
  EXPECT_EQ(Vec3(d.row(0)), Vec3::UnitY());
  EXPECT_EQ(Vec3(d.row(1)), -Vec3::UnitX());
  EXPECT_EQ(Vec3(d.row(2)), Vec3::UnitZ());
  EXPECT_THROW(attitude::desired_frame(los, {Vec3::UnitZ(), Vec3::Zero(), Vec3::Zero()}),
               DegenerateGeometryError);
}

TEST(Attitude, StaticGeometryHasZeroRates) {
  const auto los = make_los(Vec3(0, 0, 1000), Vec3::Zero(), Vec3::Zero());
  const ReferenceVector ref{Vec3::UnitX(), Vec3::Zero(), Vec3::Zero()};
  const Mat3 d = attitude::desired_frame(los, ref);
  const Vec3 w = attitude::angular_velocity(los, ref, d);
  EXPECT_EQ(w, Vec3::Zero());
  EXPECT_EQ(attitude::angular_acceleration(los, ref, d, w), Vec3::Zero());
}

TEST(Attitude, PlanarLosRotation) {
  const double r = 2000, th = 0.4, w = 0.01;
  const Vec3 rho = r * Vec3(std::cos(th), std::sin(th), 0);
  const Vec3 rho_dot = r * w * Vec3(-std::sin(th), std::cos(th), 0);
  const auto los = make_los(rho, rho_dot, -w * w * rho);
  const ReferenceVector ref{Vec3::UnitZ(), Vec3::Zero(), Vec3::Zero()};
  const Mat3 d = attitude::desired_frame(los, ref);
  const Vec3 omega = attitude::angular_velocity(los, ref, d);
  EXPECT_LT((omega - w * Vec3::UnitZ()).norm(), 1e-15);
  EXPECT_LT(attitude::angular_acceleration(los, ref, d, omega).norm(), 1e-15);
}

TEST(Attitude, SingularWhenKNearBoresight) {
  const auto los = make_los(Vec3(0, 0, 1000), Vec3(1, 0, 0), Vec3::Zero());
  const ReferenceVector ref{Vec3(1e-10, 0, 1), Vec3::Zero(), Vec3::Zero()};
  const Mat3 d = attitude::desired_frame(los, ref);
  EXPECT_THROW(attitude::angular_velocity(los, ref, d), SingularityError);
  EXPECT_THROW(attitude::angular_acceleration(los, ref, d, Vec3::Zero()), SingularityError);
}

TEST(Attitude, ScanMetricsCases) {
  attitude::CameraParams cam;
  target::TargetState tgt;
  tgt.fixed_velocity = Vec3(0, 7000, 0);
  auto los = make_los(Vec3(0, 0, 6e5), Vec3::Zero(), Vec3::Zero());
  Mat3 frame = Mat3::Identity();
  auto m = attitude::scan_metrics(los, tgt, frame, cam);
  EXPECT_NEAR(m.v_los, 7000.0, 1e-9);
  EXPECT_NEAR(m.f_ccd, cam.focal_length / 6e5 * 7000.0 / cam.pixel_pitch, 1e-6);

  tgt.fixed_velocity = Vec3(0, 0, 50);
  m = attitude::scan_metrics(los, tgt, frame, cam);
  EXPECT_NEAR(m.v_los, 0.0, 1e-12);
  EXPECT_NEAR(m.f_ccd, 0.0, 1e-6);

  tgt.fixed_velocity = Vec3(1200, -6400, 900);
  frame = Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  m = attitude::scan_metrics(los, tgt, frame, cam);
  const Vec3 z = frame.row(2).transpose();
  const Vec3 projected = tgt.fixed_velocity - tgt.fixed_velocity.dot(z) * z;
  EXPECT_NEAR(m.v_los, projected.norm(), 1e-10 * projected.norm());
}

TEST(Attitude, DriftAngleCases) {
  const ocp::StripContext ctx(fixtures::canonical_scenario(1));
  const double t = 12.0;
  const auto scan = linear_profile(ctx)(t);
  const auto sat = ctx.ephemeris().at(t);
  const auto tgt = target::evaluate(ctx.curve(), scan, t, ctx.scenario().earth);
  const auto los = attitude::los_state(sat, tgt);
  const auto ref = attitude::reference_vector(tgt, ctx.scenario().earth);
  const Mat3 d = attitude::desired_frame(los, ref);
  EXPECT_LT(attitude::drift_angle(attitude::frame_relative_velocity(los, tgt, d)), 1e-9);

  // k and ground velocity have opposite y_D components.
  EXPECT_LE(d.row(1).dot(ref.k), 0.0);
  EXPECT_GE(d.row(1).dot(tgt.fixed_velocity), 0.0);
  EXPECT_NEAR(d.row(0).dot(ref.k), 0.0, 1e-12 * ref.k.norm());

  ReferenceVector turned = ref;
  turned.k = Eigen::AngleAxisd(kPi / 2, los.direction) * ref.k;
  const Mat3 d90 = attitude::desired_frame(los, turned);
  EXPECT_NEAR(attitude::drift_angle(attitude::frame_relative_velocity(los, tgt, d90)), kPi / 2,
              1e-9);
  EXPECT_THROW(attitude::drift_angle(Vec3(0, 0, 3)), DegenerateGeometryError);
}

// Brute-force oracle: carry the ground point fixed at t_i with the Earth and
// difference its line of sight in frame coordinates.
TEST(Attitude, DriftAngleMatchesKinematicSimulation) {
  const ocp::StripContext ctx(fixtures::canonical_scenario(3));
  const auto& earth = ctx.scenario().earth;
  const auto prof = linear_profile(ctx);
  const Vec3 k_arbitrary(1.0, -2.0, 0.5);
  const double ti = 9.0, h = 1e-3;
  const Vec3 r_fixed = astro::earth_rotation_dcm(ti, earth).transpose() *
                       target::evaluate(ctx.curve(), prof(ti), ti, earth).position;
  auto frame_at = [&](double t) {
    const auto tgt = target::evaluate(ctx.curve(), prof(t), t, earth);
    const auto los = attitude::los_state(ctx.ephemeris().at(t), tgt);
    return attitude::desired_frame(los, {k_arbitrary, Vec3::Zero(), Vec3::Zero()});
  };
  auto rho_i_in_d = [&](double t) {
    const Vec3 rho = astro::earth_rotation_dcm(t, earth) * r_fixed - ctx.ephemeris().at(t).position;
    return Vec3(frame_at(t) * rho);
  };
  const Vec3 sim = (rho_i_in_d(ti + h) - rho_i_in_d(ti - h)) / (2 * h);
  const double expected = std::atan2(std::abs(sim.x()), -sim.y());

  const auto tgt = target::evaluate(ctx.curve(), prof(ti), ti, earth);
  const auto los = attitude::los_state(ctx.ephemeris().at(ti), tgt);
  const double analytic =
      attitude::drift_angle(attitude::frame_relative_velocity(los, tgt, frame_at(ti)));
  EXPECT_GT(analytic, 1e-3);
  EXPECT_NEAR(analytic, expected, 1e-6);
}

TEST(Attitude, KScaleInvariance) {
  const ocp::StripContext ctx(fixtures::canonical_scenario(2));
  const auto& earth = ctx.scenario().earth;
  const double t = 20.0;
  const auto tgt = target::evaluate(ctx.curve(), curved_profile(ctx)(t), t, earth);
  const auto los = attitude::los_state(ctx.ephemeris().at(t), tgt);
  const auto ref = attitude::reference_vector(tgt, earth);
  ReferenceVector scaled{3.7 * ref.k, 3.7 * ref.k_dot, 3.7 * ref.k_ddot};
  const Mat3 d1 = attitude::desired_frame(los, ref);
  const Mat3 d2 = attitude::desired_frame(los, scaled);
  const Vec3 w1 = attitude::angular_velocity(los, ref, d1);
  const Vec3 w2 = attitude::angular_velocity(los, scaled, d2);
  EXPECT_LT((d1 - d2).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((w1 - w2).norm(), 1e-12 * w1.norm());
  EXPECT_LT((attitude::angular_acceleration(los, ref, d1, w1) -
             attitude::angular_acceleration(los, scaled, d2, w2))
                .norm(),
            1e-12 * attitude::angular_acceleration(los, ref, d1, w1).norm());
}

class ScenarioGrid : public ::testing::TestWithParam<std::size_t> {};

TEST_P(ScenarioGrid, RatesMatchDcmDifferencing) {
  const ocp::StripContext ctx(fixtures::canonical_scenario(GetParam()));
  check_rates(ctx, linear_profile(ctx), "linear");
  check_rates(ctx, curved_profile(ctx), "curved");
}

TEST_P(ScenarioGrid, FrameInvariantsAndZeroDrift) {
  const ocp::StripContext ctx(fixtures::canonical_scenario(GetParam()));
  const auto prof = curved_profile(ctx);
  for (int k = 0; k <= 30; ++k) {
    const double t = k;
    const auto tgt = target::evaluate(ctx.curve(), prof(t), t, ctx.scenario().earth);
    const auto los = attitude::los_state(ctx.ephemeris().at(t), tgt);
    const auto cmd = ctx.command(t, prof(t));
    EXPECT_LT((cmd.dcm * cmd.dcm.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(cmd.dcm.determinant(), 1.0, 1e-12);
    EXPECT_LT((Vec3(cmd.dcm.row(2)) - los.direction).norm(), 1e-12);
    EXPECT_LT(cmd.drift, 1e-9);
    EXPECT_GE(cmd.f_ccd, 0.0);
    const Vec3 w_perp = los.rho.cross(los.rho_dot) / (los.range * los.range);
    EXPECT_LT(std::abs(w_perp.dot(los.direction)), 1e-15);
  }
}

INSTANTIATE_TEST_SUITE_P(Canonical, ScenarioGrid, ::testing::Values(0u, 1u, 2u, 3u),
                         [](const auto& info) {
                           return std::string(fixtures::kStrips[info.param].name);
                         });

}  // namespace
