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

// Pinhole camera model and rigid poses.
//
// Conventions:
//  * camera coordinates: +x right, +y up, the camera looks down -z;
//  * world up is +y; mirroring reflects across the world x = 0 plane;
//  * pixel (i, j) (column, row) has normalized centre ((i+0.5)/W, (j+0.5)/H),
//    with v growing downwards;
//  * intrinsics are normalized by image size, so one K serves every
//    resolution (the 25-float pose record: 16 extrinsic + 9 intrinsic);
//  * unproject/project use z-depth (distance along the optical axis).

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace warpfill {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

struct Intrinsics {
  double fx = 2.0;
  double fy = 2.0;
  double cx = 0.5;
  double cy = 0.5;

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw std::invalid_argument("Intrinsics: focal lengths must be positive");
    if (!(cx > 0.0 && cx < 1.0 && cy > 0.0 && cy < 1.0)) {
      throw std::invalid_argument("Intrinsics: principal point must lie in (0, 1)");
    }
  }
  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }
};

// Camera-to-world rigid transform: x_world = R x_cam + t.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 center() const { return t; }
  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = R;
    m.topRightCorner<3, 1>() = t;
    return m;
  }
  static Pose from_matrix(const Mat4& m) {
    Pose p;
    p.R = m.topLeftCorner<3, 3>();
    p.t = m.topRightCorner<3, 1>();
    return p;
  }
  void validate(double tol = 1e-6) const {
    if ((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > tol || std::fabs(R.determinant() - 1.0) > tol) {
      throw std::invalid_argument("Pose: rotation is not orthonormal with det +1");
    }
  }
};

// Maps source-camera coordinates to target-camera coordinates.
struct RelativePose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return R * p + t; }
  // (this ∘ first): apply `first`, then this.
  RelativePose compose(const RelativePose& first) const { return {R * first.R, R * first.t + t}; }
  RelativePose inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
  bool is_identity() const { return R == Mat3::Identity() && t == Vec3::Zero(); }
};

// H x W x 3 origins and unit directions, row-major over pixels.
struct RayBundle {
  int height = 0;
  int width = 0;
  std::vector<Vec3> origins;
  std::vector<Vec3> directions;
};

inline Pose orbit_pose(double yaw, double pitch, double radius, const Vec3& look_at = Vec3::Zero()) {
  if (!(radius > 0.0)) throw std::invalid_argument("orbit_pose: radius must be positive");
  if (!(std::fabs(pitch) < M_PI / 2)) throw std::invalid_argument("orbit_pose: |pitch| must be below pi/2");
  const Vec3 offset(std::sin(yaw) * std::cos(pitch), std::sin(pitch), std::cos(yaw) * std::cos(pitch));
  Pose p;
  p.t = look_at + radius * offset;
  const Vec3 z = offset.normalized();  // camera +z points away from the target
  const Vec3 x = Vec3::UnitY().cross(z).normalized();
  const Vec3 y = z.cross(x);
  p.R.col(0) = x;
  p.R.col(1) = y;
  p.R.col(2) = z;
  return p;
}

inline RelativePose relative_pose(const Pose& src, const Pose& dst) {
  RelativePose r;
  r.R = dst.R.transpose() * src.R;
  r.t = dst.R.transpose() * (src.t - dst.t);
  return r;
}

// Unnormalized camera-space direction through normalized pixel (u, v); z = -1.
inline Vec3 camera_direction(double u, double v, const Intrinsics& k) {
  return {(u - k.cx) / k.fx, -(v - k.cy) / k.fy, -1.0};
}

inline RayBundle rays_for_camera(const Intrinsics& k, const Pose& pose, int height, int width) {
  if (height < 1 || width < 1) throw std::invalid_argument("rays_for_camera: image size must be positive");
  RayBundle rays;
  rays.height = height;
  rays.width = width;
  rays.origins.assign(static_cast<std::size_t>(height) * width, pose.t);
  rays.directions.resize(rays.origins.size());
  for (int j = 0; j < height; ++j) {
    for (int i = 0; i < width; ++i) {
      const Vec3 d = camera_direction((i + 0.5) / width, (j + 0.5) / height, k);
      rays.directions[static_cast<std::size_t>(j) * width + i] = (pose.R * d).normalized();
    }
  }
  return rays;
}

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // z-depth, positive in front of the camera
  bool behind = false;
};

inline Vec3 unproject(double u, double v, double depth, const Intrinsics& k, const Pose& pose) {
  if (!(depth > 0.0)) throw std::invalid_argument("unproject: depth must be positive");
  return pose.R * (depth * camera_direction(u, v, k)) + pose.t;
}

inline Projection project(const Vec3& world, const Intrinsics& k, const Pose& pose) {
  const Vec3 p = pose.R.transpose() * (world - pose.t);
  Projection out;
  out.depth = -p.z();
  out.behind = !(out.depth > 0.0);
  if (!out.behind) {
    out.u = k.cx + k.fx * p.x() / out.depth;
    out.v = k.cy - k.fy * p.y() / out.depth;
  }
  return out;
}

// Reflection across the world x = 0 plane, applied to both the world and the
// camera x axis so the result remains a proper rotation.
inline Pose mirror_pose(const Pose& pose) {
  const Mat3 s = Eigen::Vector3d(-1.0, 1.0, 1.0).asDiagonal();
  Pose out;
  out.R = s * pose.R * s;
  out.t = s * pose.t;
  return out;
}

// 25-float record: row-major 4x4 camera-to-world, then row-major 3x3 K.
inline std::array<double, 25> pose_to_record(const Pose& pose, const Intrinsics& k) {
  std::array<double, 25> r{};
  const Mat4 m = pose.matrix();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) r[i * 4 + j] = m(i, j);
  }
  const Mat3 km = k.matrix();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[16 + i * 3 + j] = km(i, j);
  }
  return r;
}

inline std::pair<Pose, Intrinsics> pose_from_record(const std::array<double, 25>& r) {
  Mat4 m;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) m(i, j) = r[i * 4 + j];
  }
  if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) {
    throw std::invalid_argument("pose record: last extrinsic row must be 0 0 0 1");
  }
  Pose pose = Pose::from_matrix(m);
  pose.validate(1e-5);
  Intrinsics k{r[16], r[20], r[18], r[21]};
  if (r[17] != 0.0 || r[19] != 0.0 || r[22] != 0.0 || r[23] != 0.0 || r[24] != 1.0) {
    throw std::invalid_argument("pose record: intrinsics must be [fx 0 cx; 0 fy cy; 0 0 1]");
  }
  k.validate();
  return {pose, k};
}

}  // namespace warpfill
