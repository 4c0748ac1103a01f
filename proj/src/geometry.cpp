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

#include "viol/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace viol {

bool EulerPose::finite() const {
  for (double v : to_array())
    if (!std::isfinite(v)) return false;
  return true;
}

PoseTransform PoseTransform::inverse() const {
  PoseTransform out;
  const Eigen::Matrix3d rt = rotation().transpose();
  out.mat.topLeftCorner<3, 3>() = rt;
  out.mat.topRightCorner<3, 1>() = -rt * translation();
  return out;
}

PoseTransform PoseTransform::operator*(const PoseTransform& o) const {
  PoseTransform out;
  out.mat = mat * o.mat;
  out.mat.row(3) << 0, 0, 0, 1;
  return out;
}

bool PoseTransform::valid(double tol) const {
  if (!(mat.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).isZero(0.0)) return false;
  if (!mat.allFinite()) return false;
  const Eigen::Matrix3d r = rotation();
  const Eigen::Matrix3d e = r.transpose() * r - Eigen::Matrix3d::Identity();
  if (e.cwiseAbs().maxCoeff() >= tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

CoordGrid identity_grid(int h, int w, int scale_factor) {
  CoordGrid g;
  g.coords = Tensor({h, w, 2});
  g.scale_factor = scale_factor;
  g.valid.assign(static_cast<std::size_t>(h) * w, 1);
  double* p = g.coords.data.data();
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      *p++ = static_cast<double>(c);
      *p++ = static_cast<double>(r);
    }
  return g;
}

Eigen::Matrix3d euler_to_rotation(const EulerPose& pose) {
  if (!pose.finite()) throw std::invalid_argument("euler_to_rotation: non-finite pose");
  const double ca = std::cos(pose.alpha), sa = std::sin(pose.alpha);
  const double cb = std::cos(pose.beta), sb = std::sin(pose.beta);
  const double cg = std::cos(pose.gamma), sg = std::sin(pose.gamma);
  Eigen::Matrix3d rx, ry, rz;
  rx << 1, 0, 0, 0, ca, -sa, 0, sa, ca;
  ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
  rz << cg, -sg, 0, sg, cg, 0, 0, 0, 1;
  return rz * ry * rx;
}

std::array<Eigen::Matrix3d, 3> euler_rotation_derivatives(const EulerPose& pose) {
  const double ca = std::cos(pose.alpha), sa = std::sin(pose.alpha);
  const double cb = std::cos(pose.beta), sb = std::sin(pose.beta);
  const double cg = std::cos(pose.gamma), sg = std::sin(pose.gamma);
  Eigen::Matrix3d rx, ry, rz, dx, dy, dz;
  rx << 1, 0, 0, 0, ca, -sa, 0, sa, ca;
  ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
  rz << cg, -sg, 0, sg, cg, 0, 0, 0, 1;
  dx << 0, 0, 0, 0, -sa, -ca, 0, ca, -sa;
  dy << -sb, 0, cb, 0, 0, 0, -cb, 0, -sb;
  dz << -sg, -cg, 0, cg, -sg, 0, 0, 0, 0;
  return {rz * ry * dx, rz * dy * rx, dz * ry * rx};
}

EulerPose euler_from_rotation(const Eigen::Matrix3d& r) {
  EulerPose p;
  // R = Rz*Ry*Rx: R(2,0) = -sin(beta).
  const double sb = -r(2, 0);
  p.beta = std::asin(std::clamp(sb, -1.0, 1.0));
  if (std::abs(sb) < 1.0 - 1e-12) {
    p.alpha = std::atan2(r(2, 1), r(2, 2));
    p.gamma = std::atan2(r(1, 0), r(0, 0));
  } else {
    // Gimbal: fold gamma into alpha.
    p.alpha = std::atan2(-r(1, 2), r(1, 1));
    p.gamma = 0.0;
  }
  return p;
}

PoseTransform make_transform(const EulerPose& pose) {
  PoseTransform t;
  t.mat.topLeftCorner<3, 3>() = euler_to_rotation(pose);
  t.mat.topRightCorner<3, 1>() = Eigen::Vector3d(pose.tx, pose.ty, pose.tz);
  return t;
}

CameraIntrinsics scale_intrinsics(const CameraIntrinsics& k, int factor) {
  if (factor != 1 && factor != 2 && factor != 4 && factor != 8)
    throw std::invalid_argument("scale_intrinsics: factor must be one of 1,2,4,8");
  if (k.width % factor != 0 || k.height % factor != 0)
    throw std::invalid_argument("scale_intrinsics: dimensions " + std::to_string(k.width) + "x" +
                                std::to_string(k.height) + " not divisible by " +
                                std::to_string(factor));
  const double f = static_cast<double>(factor);
  return {k.fx / f, k.fy / f, k.cx / f, k.cy / f, k.width / factor, k.height / factor};
}

ReprojectResult reproject_grid(const Tensor& depth, const CameraIntrinsics& k,
                               const EulerPose& pose, double eps_z) {
  if (depth.rank() != 2)
    throw std::invalid_argument("reproject_grid: depth must be [H,W], got " +
                                shape_str(depth.shape));
  if (depth.dim(0) != k.height || depth.dim(1) != k.width)
    throw std::invalid_argument("reproject_grid: depth " + shape_str(depth.shape) +
                                " does not match intrinsics " + std::to_string(k.width) + "x" +
                                std::to_string(k.height));

  const int h = depth.dim(0), w = depth.dim(1);
  ReprojectResult out;
  out.grid.coords = Tensor({h, w, 2});
  out.grid.scale_factor = 1;
  out.grid.valid.assign(static_cast<std::size_t>(h) * w, 0);
  out.pose_jacobian = Tensor({h, w, 2, 6});

  const Eigen::Matrix3d r = euler_to_rotation(pose);
  const auto dr = euler_rotation_derivatives(pose);
  const Eigen::Vector3d t(pose.tx, pose.ty, pose.tz);

  double* cp = out.grid.coords.data.data();
  double* jp = out.pose_jacobian.data.data();
  const double* dp = depth.data.data();

  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const std::size_t idx = static_cast<std::size_t>(row) * w + col;
      const double d = dp[idx];
      double* cc = cp + idx * 2;
      double* jj = jp + idx * 12;
      if (d <= 0.0) continue;  // invalid depth: coords/jacobian stay zero

      const Eigen::Vector3d pn((col - k.cx) / k.fx, (row - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d pc = d * pn;
      const Eigen::Vector3d q = r * pc + t;
      if (q.z() <= eps_z) continue;  // behind/too close to the camera

      const double iz = 1.0 / q.z();
      cc[0] = k.fx * q.x() * iz + k.cx;
      cc[1] = k.fy * q.y() * iz + k.cy;
      out.grid.valid[idx] = 1;

      // d(x,y)/dq composed with dq/d(pose).
      const double jx_x = k.fx * iz, jx_z = -k.fx * q.x() * iz * iz;
      const double jy_y = k.fy * iz, jy_z = -k.fy * q.y() * iz * iz;
      for (int a = 0; a < 3; ++a) {
        const Eigen::Vector3d dq = dr[static_cast<std::size_t>(a)] * pc;
        jj[a] = jx_x * dq.x() + jx_z * dq.z();
        jj[6 + a] = jy_y * dq.y() + jy_z * dq.z();
      }
      // Translation: dq/dt is the identity.
      jj[3] = jx_x;
      jj[4] = 0.0;
      jj[5] = jx_z;
      jj[6 + 3] = 0.0;
      jj[6 + 4] = jy_y;
      jj[6 + 5] = jy_z;
    }
  }
  return out;
}

ReprojectResult reproject_grid(const Tensor& depth, const CameraIntrinsics& k,
                               const PoseTransform& theta, double eps_z) {
  EulerPose p = euler_from_rotation(theta.rotation());
  const Eigen::Vector3d t = theta.translation();
  p.tx = t.x();
  p.ty = t.y();
  p.tz = t.z();
  return reproject_grid(depth, k, p, eps_z);
}

Tensor downsample_depth(const Tensor& depth, int factor) {
  if (factor == 1) return depth;
  const int h = depth.dim(0), w = depth.dim(1);
  if (h % factor != 0 || w % factor != 0)
    throw std::invalid_argument("downsample_depth: dims not divisible by factor");
  const int oh = h / factor, ow = w / factor;
  Tensor out({oh, ow});
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      int cnt = 0;
      for (int dr = 0; dr < factor; ++dr)
        for (int dc = 0; dc < factor; ++dc) {
          const double v = depth.data[static_cast<std::size_t>(r * factor + dr) * w +
                                      (c * factor + dc)];
          if (v > 0.0) {
            acc += v;
            ++cnt;
          }
        }
      out.data[static_cast<std::size_t>(r) * ow + c] = cnt ? acc / cnt : 0.0;
    }
  return out;
}

Tensor downsample_image(const Tensor& image, int factor) {
  if (factor == 1) return image;
  const int ch = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h % factor != 0 || w % factor != 0)
    throw std::invalid_argument("downsample_image: dims not divisible by factor");
  const int oh = h / factor, ow = w / factor;
  const double inv = 1.0 / (factor * factor);
  Tensor out({ch, oh, ow});
  for (int c = 0; c < ch; ++c) {
    const double* plane = image.data.data() + static_cast<std::size_t>(c) * h * w;
    double* oplane = out.data.data() + static_cast<std::size_t>(c) * oh * ow;
    for (int r = 0; r < oh; ++r)
      for (int cc = 0; cc < ow; ++cc) {
        double acc = 0.0;
        for (int dr = 0; dr < factor; ++dr)
          for (int dc = 0; dc < factor; ++dc)
            acc += plane[static_cast<std::size_t>(r * factor + dr) * w + (cc * factor + dc)];
        oplane[static_cast<std::size_t>(r) * ow + cc] = acc * inv;
      }
  }
  return out;
}

}  // namespace viol
