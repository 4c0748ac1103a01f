// Copyright 2026 The viol Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

#include "viol/tensor.hpp"

namespace viol {

/// Six-parameter rigid motion: rotations about x, y, z (radians) applied as
/// R = Rz(gamma) * Ry(beta) * Rx(alpha), then translation in meters.
struct EulerPose {
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  double tx = 0.0, ty = 0.0, tz = 0.0;

  std::array<double, 6> to_array() const { return {alpha, beta, gamma, tx, ty, tz}; }
  static EulerPose from_array(const std::array<double, 6>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
  static EulerPose from_ptr(const double* p) { return {p[0], p[1], p[2], p[3], p[4], p[5]}; }
  bool finite() const;

  EulerPose operator+(const EulerPose& o) const {
    return {alpha + o.alpha, beta + o.beta, gamma + o.gamma, tx + o.tx, ty + o.ty, tz + o.tz};
  }
};

/// 4x4 homogeneous rigid transform [[R,T],[0,1]].
struct PoseTransform {
  Eigen::Matrix4d mat = Eigen::Matrix4d::Identity();

  Eigen::Matrix3d rotation() const { return mat.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return mat.topRightCorner<3, 1>(); }

  PoseTransform inverse() const;
  PoseTransform operator*(const PoseTransform& o) const;

  /// Bottom row [0,0,0,1], R'R == I and det(R) == 1 within tol.
  bool valid(double tol = 1e-9) const;
};

struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  Eigen::Vector2d project(const Eigen::Vector3d& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
  Eigen::Vector3d backproject(double u, double v, double depth) const {
    return {depth * (u - cx) / fx, depth * (v - cy) / fy, depth};
  }
};

/// Sampling-coordinate grid. coords is [H,W,2] holding (x,y) pixel
/// coordinates (x rightward, y downward, pixel centers at integers);
/// the identity grid has coords[r][c] == (c, r).
struct CoordGrid {
  Tensor coords;              // [H,W,2]
  int scale_factor = 1;       // power-of-two divisor relative to full res
  std::vector<std::uint8_t> valid;  // H*W

  int height() const { return coords.dim(0); }
  int width() const { return coords.dim(1); }
};

CoordGrid identity_grid(int h, int w, int scale_factor = 1);

/// R = Rz(gamma) * Ry(beta) * Rx(alpha). Throws on non-finite input.
Eigen::Matrix3d euler_to_rotation(const EulerPose& pose);

/// dR/dalpha, dR/dbeta, dR/dgamma.
std::array<Eigen::Matrix3d, 3> euler_rotation_derivatives(const EulerPose& pose);

/// ZYX decomposition of a rotation; inverse of euler_to_rotation away from
/// the beta = +-pi/2 gimbal singularity.
EulerPose euler_from_rotation(const Eigen::Matrix3d& r);

PoseTransform make_transform(const EulerPose& pose);

/// Divides fx, fy, cx, cy, width, height by factor (one of 1,2,4,8).
/// Rejects dimensions not divisible by the factor.
CameraIntrinsics scale_intrinsics(const CameraIntrinsics& k, int factor);

struct ReprojectResult {
  CoordGrid grid;
  /// d(x,y)/d(alpha,beta,gamma,tx,ty,tz), [H,W,2,6]; zero on invalid pixels.
  Tensor pose_jacobian;
};

/// Back-projects each valid-depth pixel, applies the rigid transform, and
/// projects into the (scaled) camera. Pixels with depth <= 0 or transformed
/// z <= eps_z are masked out with zero coords and zero Jacobian.
ReprojectResult reproject_grid(const Tensor& depth, const CameraIntrinsics& k,
                               const EulerPose& pose, double eps_z = 1e-3);

/// Overload taking the assembled transform; decomposes to Euler angles to
/// parameterize the Jacobian.
ReprojectResult reproject_grid(const Tensor& depth, const CameraIntrinsics& k,
                               const PoseTransform& theta, double eps_z = 1e-3);

/// Mean over f x f blocks, ignoring invalid (<= 0) entries; a fully invalid
/// block stays invalid (0).
Tensor downsample_depth(const Tensor& depth, int factor);

/// Box mean over f x f blocks per channel, [C,H,W].
Tensor downsample_image(const Tensor& image, int factor);

}  // namespace viol
