/*
Copyright 2026 The warpfill Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/


#include <gtest/gtest.h>

#include <cmath>

#include "warpfill/core/rng.hpp"
#include "warpfill/geometry.hpp"

namespace warpfill {
namespace {

Pose random_pose(Rng& rng) {
  return orbit_pose(rng.uniform(-1.0, 1.0), rng.uniform(-0.6, 0.6), rng.uniform(1.5, 4.0),
                    Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)));
}

TEST(Geometry, OrbitPoseFrontalMatchesHandBuiltMatrix) {
  const Pose p = orbit_pose(0.0, 0.0, 2.7);
  Mat4 expected = Mat4::Identity();
  expected(2, 3) = 2.7;
  EXPECT_LT((p.matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
  // Optical axis (-z camera) points at the origin.
  EXPECT_LT((p.R * Vec3(0, 0, -1) - Vec3(0, 0, -1)).norm(), 1e-12);
}

TEST(Geometry, OrbitPoseLiesOnSphereAndLooksAtTarget) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double r = rng.uniform(0.5, 5.0);
    const Vec3 look(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Pose p = orbit_pose(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), r, look);
    EXPECT_NEAR((p.center() - look).norm(), r, 1e-9);
    const Vec3 axis = p.R * Vec3(0, 0, -1);
    EXPECT_LT((axis - (look - p.center()).normalized()).norm(), 1e-9);
    EXPECT_GT((p.R * Vec3::UnitY()).y(), 0.0);
    EXPECT_NO_THROW(p.validate());
  }
}

TEST(Geometry, OrbitPoseRejectsBadArguments) {
  EXPECT_THROW(orbit_pose(0, 0, 0.0), std::invalid_argument);
  EXPECT_THROW(orbit_pose(0, 0, -1.0), std::invalid_argument);
  EXPECT_THROW(orbit_pose(0, 1.6, 1.0), std::invalid_argument);
}

TEST(Geometry, RelativePoseOfSelfIsIdentity) {
  Rng rng(4);
  const Pose c = random_pose(rng);
  const RelativePose r = relative_pose(c, c);
  EXPECT_LT((r.R - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(r.t.norm(), 1e-12);
}

TEST(Geometry, RelativePoseComposesAndMatchesMatrixOracle) {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    const RelativePose ac = relative_pose(a, c);
    const RelativePose chain = relative_pose(b, c).compose(relative_pose(a, b));
    EXPECT_LT((ac.R - chain.R).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((ac.t - chain.t).cwiseAbs().maxCoeff(), 1e-9);
    const Mat4 oracle = c.matrix().inverse() * a.matrix();
    EXPECT_LT((oracle.topLeftCorner<3, 3>() - ac.R).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((oracle.topRightCorner<3, 1>() - ac.t).cwiseAbs().maxCoeff(), 1e-9);
    const RelativePose back = relative_pose(c, a).compose(ac);
    EXPECT_LT((back.R - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(back.t.norm(), 1e-9);
    EXPECT_LT((ac.R.transpose() * ac.R - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Geometry, RaysCenterPixelFollowsOpticalAxis) {
  Rng rng(6);
  const Pose p = random_pose(rng);
  const RayBundle rays = rays_for_camera(Intrinsics{}, p, 5, 5);
  EXPECT_LT((rays.directions[12] - p.R * Vec3(0, 0, -1)).norm(), 1e-12);
  for (const Vec3& d : rays.directions) EXPECT_NEAR(d.norm(), 1.0, 1e-12);
  for (const Vec3& o : rays.origins) EXPECT_LT((o - p.center()).norm(), 1e-12);
}

TEST(Geometry, RaysCornerPixelMatchesPinholeFormula) {
  const Intrinsics k{1.0, 1.0, 0.5, 0.5};
  const RayBundle rays = rays_for_camera(k, Pose{}, 4, 4);
  // Pixel (0, 0): normalized centre (0.125, 0.125).
  const Vec3 expected = Vec3(0.125 - 0.5, -(0.125 - 0.5), -1.0).normalized();
  EXPECT_LT((rays.directions[0] - expected).norm(), 1e-12);
  EXPECT_THROW(rays_for_camera(k, Pose{}, 0, 4), std::invalid_argument);
}

TEST(Geometry, ProjectUnprojectRoundTrip) {
  Rng rng(7);
  const Intrinsics k{};
  for (int i = 0; i < 200; ++i) {
    const Pose p = random_pose(rng);
    const double u = rng.uniform(), v = rng.uniform(), z = rng.uniform(0.1, 10.0);
    const Projection pr = project(unproject(u, v, z, k, p), k, p);
    EXPECT_FALSE(pr.behind);
    EXPECT_NEAR(pr.u, u, 1e-9);
    EXPECT_NEAR(pr.v, v, 1e-9);
    EXPECT_NEAR(pr.depth, z, 1e-9);
  }
  EXPECT_THROW(unproject(0.5, 0.5, 0.0, k, Pose{}), std::invalid_argument);
}

TEST(Geometry, UnprojectHandCase) {
  const Intrinsics k{1.0, 1.0, 0.5, 0.5};
  const Vec3 p = unproject(0.75, 0.5, 2.0, k, Pose{});
  // +x right; the camera looks down -z, so the point sits at z = -2.
  EXPECT_LT((p - Vec3(0.5, 0.0, -2.0)).norm(), 1e-12);
  const Vec3 axis = unproject(0.5, 0.5, 3.0, k, Pose{});
  EXPECT_LT((axis - Vec3(0.0, 0.0, -3.0)).norm(), 1e-12);
}

TEST(Geometry, ProjectFlagsPointsBehindCamera) {
  EXPECT_TRUE(project(Vec3(0, 0, 1), Intrinsics{}, Pose{}).behind);
}

TEST(Geometry, MirrorPoseIsInvolutionAndNegatesYaw) {
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const Pose p = random_pose(rng);
    const Pose mm = mirror_pose(mirror_pose(p));
    EXPECT_EQ(mm.R, p.R);
    EXPECT_EQ(mm.t, p.t);
    EXPECT_NO_THROW(mirror_pose(p).validate());
  }
  const Pose front = orbit_pose(0.0, 0.2, 2.7);
  EXPECT_LT((mirror_pose(front).matrix() - front.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  const Pose m = mirror_pose(orbit_pose(0.3, 0.1, 2.7));
  EXPECT_LT((m.matrix() - orbit_pose(-0.3, 0.1, 2.7).matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Geometry, PoseRecordRoundTripAndValidation) {
  Rng rng(9);
  const Pose p = random_pose(rng);
  const Intrinsics k{2.1, 1.9, 0.45, 0.55};
  const auto rec = pose_to_record(p, k);
  const auto [p2, k2] = pose_from_record(rec);
  EXPECT_LT((p2.matrix() - p.matrix()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(k2.fx, k.fx);
  EXPECT_EQ(k2.cy, k.cy);
  auto bad = rec;
  bad[0] *= 2.0;
  EXPECT_THROW(pose_from_record(bad), std::invalid_argument);
  bad = rec;
  bad[16] = -1.0;
  EXPECT_THROW(pose_from_record(bad), std::invalid_argument);
}

TEST(Geometry, IntrinsicsValidation) {
  EXPECT_THROW((Intrinsics{0.0, 1.0, 0.5, 0.5}.validate()), std::invalid_argument);
  EXPECT_THROW((Intrinsics{1.0, 1.0, 1.0, 0.5}.validate()), std::invalid_argument);
  EXPECT_NO_THROW(Intrinsics{}.validate());
}

}  // namespace
}  // namespace warpfill
