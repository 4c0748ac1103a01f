#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "viol/geometry.hpp"
#include "viol/rng.hpp"

using namespace viol;

namespace {
EulerPose random_pose(Rng& rng, double rot = 3.0, double trans = 5.0) {
  return {rng.uniform(-rot, rot),   rng.uniform(-rot, rot),   rng.uniform(-rot, rot),
          rng.uniform(-trans, trans), rng.uniform(-trans, trans), rng.uniform(-trans, trans)};
}
}  // namespace

TEST_CASE("euler_to_rotation: zero angles give the identity") {
  CHECK(euler_to_rotation({}).isApprox(Eigen::Matrix3d::Identity(), 0.0));
}

TEST_CASE("euler_to_rotation: quarter turn about x maps +y to +z") {
  const Eigen::Matrix3d r = euler_to_rotation({M_PI / 2.0, 0, 0, 0, 0, 0});
  const Eigen::Vector3d v = r * Eigen::Vector3d(0, 1, 0);
  CHECK(std::abs(v.x()) < 1e-12);
  CHECK(std::abs(v.y()) < 1e-12);
  CHECK(std::abs(v.z() - 1.0) < 1e-12);
}

TEST_CASE("euler_to_rotation: rejects non-finite angles") {
  CHECK_THROWS_AS(euler_to_rotation({std::nan(""), 0, 0, 0, 0, 0}), std::invalid_argument);
}

TEST_CASE("euler_to_rotation: orthonormal with unit determinant") {
  Rng rng(99);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Matrix3d r = euler_to_rotation(random_pose(rng));
    const Eigen::Matrix3d e = r.transpose() * r - Eigen::Matrix3d::Identity();
    CHECK(e.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-9);
  }
}

TEST_CASE("euler_from_rotation: inverts euler_to_rotation away from gimbal lock") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    EulerPose p = random_pose(rng, 1.2, 0.0);
    const Eigen::Matrix3d r = euler_to_rotation(p);
    const EulerPose q = euler_from_rotation(r);
    CHECK(euler_to_rotation(q).isApprox(r, 1e-10));
  }
}

TEST_CASE("make_transform: zero pose gives the 4x4 identity") {
  CHECK(make_transform({}).mat.isApprox(Eigen::Matrix4d::Identity(), 0.0));
}

TEST_CASE("make_transform: pure translation fills the fourth column") {
  const PoseTransform t = make_transform({0, 0, 0, 1, 2, 3});
  CHECK(t.rotation().isApprox(Eigen::Matrix3d::Identity(), 0.0));
  CHECK(t.mat(0, 3) == 1.0);
  CHECK(t.mat(1, 3) == 2.0);
  CHECK(t.mat(2, 3) == 3.0);
  CHECK(t.mat(3, 3) == 1.0);
}

TEST_CASE("make_transform: inverse round-trip stays within 1e-9") {
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    const PoseTransform t = make_transform(random_pose(rng));
    Eigen::Matrix4d inv = t.mat.inverse();  // independent route
    const Eigen::Matrix4d prod = t.mat * inv;
    CHECK((prod - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    const Eigen::Matrix4d prod2 = (t * t.inverse()).mat;
    CHECK((prod2 - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("scale_intrinsics: factor 1 is the identity") {
  const CameraIntrinsics k{240, 250, 240, 60, 480, 128};
  const CameraIntrinsics s = scale_intrinsics(k, 1);
  CHECK(s.fx == k.fx);
  CHECK(s.cy == k.cy);
  CHECK(s.width == k.width);
}

TEST_CASE("scale_intrinsics: divides all quantities by the factor") {
  const CameraIntrinsics k{240, 200, 240, 64, 480, 128};
  const CameraIntrinsics s = scale_intrinsics(k, 8);
  CHECK(s.fx == 30.0);
  CHECK(s.fy == 25.0);
  CHECK(s.cx == 30.0);
  CHECK(s.cy == 8.0);
  CHECK(s.width == 60);
  CHECK(s.height == 16);
}

TEST_CASE("scale_intrinsics: rejects non-divisible dimensions and bad factors") {
  const CameraIntrinsics k{100, 100, 50, 25, 100, 50};
  CHECK_THROWS_AS(scale_intrinsics(k, 8), std::invalid_argument);  // 50 % 8 != 0
  CHECK_THROWS_AS(scale_intrinsics(k, 3), std::invalid_argument);
}

TEST_CASE("scale_intrinsics: projection lands at (u/f, v/f)") {
  const CameraIntrinsics k{200, 210, 120, 60, 240, 120};
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d p(rng.uniform(-2, 2), rng.uniform(-1, 1), rng.uniform(2, 8));
    const Eigen::Vector2d full = k.project(p);
    for (int f : {2, 4, 8}) {
      const Eigen::Vector2d scaled = scale_intrinsics(k, f).project(p);
      CHECK(std::abs(scaled.x() - full.x() / f) < 1e-12);
      CHECK(std::abs(scaled.y() - full.y() / f) < 1e-12);
    }
  }
}

TEST_CASE("reproject_grid: identity transform reproduces the pixel grid") {
  const CameraIntrinsics k{50, 55, 16, 12, 32, 24};
  Tensor depth = Tensor::full({24, 32}, 4.0);
  depth.at({3, 5}) = -1.0;  // one invalid pixel
  const ReprojectResult rr = reproject_grid(depth, k, EulerPose{});
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 32; ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * 32 + c;
      if (r == 3 && c == 5) {
        CHECK(rr.grid.valid[p] == 0);
        continue;
      }
      CHECK(rr.grid.valid[p] == 1);
      CHECK(std::abs(rr.grid.coords.data[p * 2] - c) < 1e-9);
      CHECK(std::abs(rr.grid.coords.data[p * 2 + 1] - r) < 1e-9);
    }
}

TEST_CASE("reproject_grid: forward translation matches the per-pixel pinhole oracle") {
  const CameraIntrinsics k{60, 60, 24, 16, 48, 32};
  const double d = 6.0;
  Tensor depth = Tensor::full({32, 48}, d);
  const EulerPose pose{0, 0, 0, 0, 0, -d / 2.0};
  const ReprojectResult rr = reproject_grid(depth, k, pose);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 48; ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * 48 + c;
      const Eigen::Vector3d q = k.backproject(c, r, d) + Eigen::Vector3d(0, 0, -d / 2.0);
      CHECK(rr.grid.valid[p] == 1);
      CHECK(std::abs(rr.grid.coords.data[p * 2] - (k.fx * q.x() / q.z() + k.cx)) < 1e-12);
      CHECK(std::abs(rr.grid.coords.data[p * 2 + 1] - (k.fy * q.y() / q.z() + k.cy)) < 1e-12);
    }
}

TEST_CASE("reproject_grid: pose Jacobian matches central finite differences") {
  const CameraIntrinsics k{40, 42, 12, 8, 24, 16};
  Rng rng(31);
  Tensor depth({16, 24});
  for (double& v : depth.data) v = rng.uniform(2.0, 7.0);
  EulerPose pose{0.05, -0.03, 0.08, 0.2, -0.1, 0.3};

  const ReprojectResult rr = reproject_grid(depth, k, pose);
  double* slots[6] = {&pose.alpha, &pose.beta, &pose.gamma, &pose.tx, &pose.ty, &pose.tz};
  for (int a = 0; a < 6; ++a) {
    for (int probe = 0; probe < 40; ++probe) {
      const int r = rng.uniform_int(16), c = rng.uniform_int(24);
      const std::size_t p = static_cast<std::size_t>(r) * 24 + c;
      for (int dim = 0; dim < 2; ++dim) {
        auto f = [&]() {
          return reproject_grid(depth, k, pose)
              .grid.coords.data[p * 2 + static_cast<std::size_t>(dim)];
        };
        const double fd = oracles::central_diff(f, slots[a]);
        const double an = rr.pose_jacobian.data[(p * 2 + static_cast<std::size_t>(dim)) * 6 +
                                                static_cast<std::size_t>(a)];
        CHECK(oracles::rel_err(an, fd) < 1e-5);
      }
    }
  }
}

TEST_CASE("reproject_grid: rejects mismatched depth dimensions") {
  const CameraIntrinsics k{50, 50, 16, 12, 32, 24};
  CHECK_THROWS_AS(reproject_grid(Tensor({10, 10}), k, EulerPose{}), std::invalid_argument);
}

TEST_CASE("reproject_grid: PoseTransform overload agrees with the Euler form") {
  const CameraIntrinsics k{50, 50, 16, 12, 32, 24};
  Rng rng(8);
  Tensor depth({24, 32});
  for (double& v : depth.data) v = rng.uniform(3.0, 6.0);
  const EulerPose pose{0.03, 0.02, -0.04, 0.1, 0.05, 0.2};
  const ReprojectResult a = reproject_grid(depth, k, pose);
  const ReprojectResult b = reproject_grid(depth, k, make_transform(pose));
  for (std::size_t i = 0; i < a.grid.coords.size(); ++i)
    CHECK(a.grid.coords.data[i] == doctest::Approx(b.grid.coords.data[i]).epsilon(1e-10));
}

TEST_CASE("reproject_grid: scale equivariance within the downsampling bound") {
  const CameraIntrinsics k{120, 120, 48, 32, 96, 64};
  Tensor depth({64, 96});
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 96; ++c) depth.at({r, c}) = 5.0 + std::sin(r * 0.08) + std::cos(c * 0.05);
  const EulerPose pose{0.02, -0.015, 0.01, 0.05, -0.04, 0.2};

  const ReprojectResult full = reproject_grid(depth, k, pose);
  for (int f : {2, 4, 8}) {
    const ReprojectResult scaled =
        reproject_grid(downsample_depth(depth, f), scale_intrinsics(k, f), pose);
    for (int r = 0; r < 64 / f; ++r)
      for (int c = 0; c < 96 / f; ++c) {
        const std::size_t ps = static_cast<std::size_t>(r) * (96 / f) + c;
        const std::size_t pf = static_cast<std::size_t>(r * f) * 96 + c * f;
        if (!scaled.grid.valid[ps] || !full.grid.valid[pf]) continue;
        CHECK(std::abs(scaled.grid.coords.data[ps * 2] - full.grid.coords.data[pf * 2] / f) <
              0.51);
        CHECK(std::abs(scaled.grid.coords.data[ps * 2 + 1] -
                       full.grid.coords.data[pf * 2 + 1] / f) < 0.51);
      }
  }
}

TEST_CASE("reproject_grid: composing transforms equals two-stage reprojection") {
  const CameraIntrinsics k{80, 80, 32, 24, 64, 48};
  Tensor depth({48, 64});
  for (int r = 0; r < 48; ++r)
    for (int c = 0; c < 64; ++c) depth.at({r, c}) = 6.0 + 0.4 * std::sin(0.11 * r + 0.07 * c);

  const EulerPose p1{0.01, -0.008, 0.012, 0.03, -0.02, 0.08};
  const EulerPose p2{-0.006, 0.011, -0.009, -0.02, 0.015, 0.06};
  const PoseTransform t1 = make_transform(p1);
  const PoseTransform t2 = make_transform(p2);
  const PoseTransform t12 = t2 * t1;  // t1 applies first

  const ReprojectResult direct = reproject_grid(depth, k, t12);
  const ReprojectResult stage1 = reproject_grid(depth, k, t1);
  for (int r = 2; r < 46; ++r)
    for (int c = 2; c < 62; ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * 64 + c;
      if (!direct.grid.valid[p] || !stage1.grid.valid[p]) continue;
      // Second stage evaluated on the exact intermediate 3-D point.
      const Eigen::Vector3d q1 =
          t1.rotation() * k.backproject(c, r, depth.at({r, c})) + t1.translation();
      const Eigen::Vector3d q2 = t2.rotation() * q1 + t2.translation();
      const double x2 = k.fx * q2.x() / q2.z() + k.cx;
      const double y2 = k.fy * q2.y() / q2.z() + k.cy;
      CHECK(std::abs(direct.grid.coords.data[p * 2] - x2) < 1e-6);
      CHECK(std::abs(direct.grid.coords.data[p * 2 + 1] - y2) < 1e-6);
    }
}

TEST_CASE("downsample_depth: invalid entries are excluded from block means") {
  Tensor depth({2, 4}, {4.0, 0.0, 2.0, 6.0, 0.0, 0.0, 4.0, 8.0});
  const Tensor d2 = downsample_depth(depth, 2);
  CHECK(d2.shape == std::vector<int>{1, 2});
  CHECK(d2.data[0] == 4.0);  // single valid entry in the block
  CHECK(d2.data[1] == 5.0);  // mean of 2,6,4,8
  Tensor all_invalid({2, 2}, {0.0, -1.0, 0.0, 0.0});
  CHECK(downsample_depth(all_invalid, 2).data[0] == 0.0);
}

TEST_CASE("identity_grid: coordinates equal (column, row)") {
  const CoordGrid g = identity_grid(3, 4);
  CHECK(g.coords.at({2, 3, 0}) == 3.0);
  CHECK(g.coords.at({2, 3, 1}) == 2.0);
  CHECK(g.valid.size() == 12);
}
