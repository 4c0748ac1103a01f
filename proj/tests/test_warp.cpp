#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "viol/errors.hpp"
#include "viol/warp.hpp"

using namespace viol;

namespace {

Tensor random_image(int ch, int h, int w, Rng& rng) {
  Tensor t({ch, h, w});
  for (double& v : t.data) v = rng.uniform(0.0, 1.0);
  return t;
}

CoordGrid offset_grid(int h, int w, Rng& rng, int sh, int sw) {
  CoordGrid g = identity_grid(h, w);
  for (int i = 0; i < h * w; ++i) {
    g.coords.data[2 * i] = rng.uniform_int(sw - 1) + rng.uniform(0.1, 0.9);
    g.coords.data[2 * i + 1] = rng.uniform_int(sh - 1) + rng.uniform(0.1, 0.9);
  }
  return g;
}

}  // namespace

TEST_CASE("bilinear_sample: identity grid reconstructs the source exactly") {
  Rng rng(3);
  const Tensor src = random_image(3, 6, 9, rng);
  std::vector<std::uint8_t> mask;
  const Tensor rec = bilinear_sample(src, identity_grid(6, 9), &mask);
  CHECK(rec.data == src.data);
  for (auto m : mask) CHECK(m == 1);
}

TEST_CASE("bilinear_sample: constant image stays constant at any in-bounds coordinate") {
  Rng rng(5);
  const Tensor src = Tensor::full({1, 5, 7}, 0.375);
  CoordGrid g = offset_grid(4, 4, rng, 5, 7);
  std::vector<std::uint8_t> mask;
  const Tensor rec = bilinear_sample(src, g, &mask);
  for (std::size_t i = 0; i < rec.size(); ++i) CHECK(rec.data[i] == doctest::Approx(0.375));
}

TEST_CASE("bilinear_sample: 2x2 hand case at (0.5, 0.5) interpolates to 1.5") {
  Tensor src({1, 2, 2}, {0.0, 1.0, 2.0, 3.0});
  CoordGrid g = identity_grid(1, 1);
  g.coords.data = {0.5, 0.5};
  std::vector<std::uint8_t> mask;
  const Tensor rec = bilinear_sample(src, g, &mask);
  CHECK(rec.data[0] == 1.5);
}

TEST_CASE("bilinear_sample: out-of-bounds coordinates are masked and zero") {
  Tensor src = Tensor::full({1, 4, 4}, 1.0);
  CoordGrid g = identity_grid(1, 3);
  g.coords.data = {-0.5, 1.0, 3.5, 1.0, 2.0, 1.0};
  std::vector<std::uint8_t> mask;
  const Tensor rec = bilinear_sample(src, g, &mask);
  CHECK(mask[0] == 0);
  CHECK(mask[1] == 0);
  CHECK(mask[2] == 1);
  CHECK(rec.data[0] == 0.0);
  CHECK(rec.data[1] == 0.0);
  CHECK(rec.data[2] == 1.0);
}

TEST_CASE("sample_coord_gradients: constant image has zero coordinate gradients") {
  Rng rng(7);
  const Tensor src = Tensor::full({2, 5, 5}, 0.8);
  CoordGrid g = offset_grid(3, 3, rng, 5, 5);
  Tensor upstream = Tensor::full({2, 3, 3}, 1.0);
  const Tensor grads = sample_coord_gradients(src, g, upstream, g.valid);
  for (double v : grads.data) CHECK(std::abs(v) < 1e-14);
}

TEST_CASE("sample_coord_gradients: unit slope on a column ramp") {
  // Image value equals the column index: the x-derivative is exactly 1.
  Tensor src({1, 4, 6});
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 6; ++c) src.at({0, r, c}) = static_cast<double>(c);
  Rng rng(9);
  CoordGrid g = offset_grid(3, 3, rng, 4, 6);
  Tensor upstream = Tensor::full({1, 3, 3}, 1.0);
  const Tensor grads = sample_coord_gradients(src, g, upstream, g.valid);
  for (int i = 0; i < 9; ++i) {
    CHECK(grads.data[2 * i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(grads.data[2 * i + 1] == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("sample_coord_gradients: matches finite differences of the sampler") {
  Rng rng(11);
  const Tensor src = random_image(3, 7, 8, rng);
  CoordGrid g = offset_grid(4, 5, rng, 7, 8);
  Tensor upstream({3, 4, 5});
  for (double& v : upstream.data) v = rng.uniform(-1.0, 1.0);

  const Tensor grads = sample_coord_gradients(src, g, upstream, g.valid);
  for (std::size_t i = 0; i < g.coords.size(); ++i) {
    auto f = [&]() {
      std::vector<std::uint8_t> mask;
      const Tensor rec = bilinear_sample(src, g, &mask);
      double acc = 0.0;
      for (std::size_t j = 0; j < rec.size(); ++j) acc += upstream.data[j] * rec.data[j];
      return acc;
    };
    const double fd = oracles::central_diff(f, &g.coords.data[i]);
    CHECK(oracles::rel_err(grads.data[i], fd) < 1e-6);
  }
}

TEST_CASE("reconstruction_error: zero for identical images") {
  Rng rng(13);
  const Tensor a = random_image(3, 4, 4, rng);
  std::vector<std::uint8_t> mask(16, 1);
  const auto [map, total] = reconstruction_error(a, a, mask);
  CHECK(total == 0.0);
  for (double v : map.data) CHECK(v == 0.0);
}

TEST_CASE("reconstruction_error: all-zero vs all-one 2x2 single channel") {
  const Tensor rec = Tensor::zeros({1, 2, 2});
  const Tensor tgt = Tensor::full({1, 2, 2}, 1.0);
  std::vector<std::uint8_t> mask(4, 1);
  const auto [map, total] = reconstruction_error(rec, tgt, mask);
  for (double v : map.data) CHECK(v == 1.0);
  CHECK(total == 1.0);  // mean-normalized over valid pixels
}

TEST_CASE("reconstruction_error: matches a flat-loop oracle") {
  Rng rng(17);
  const Tensor a = random_image(3, 5, 6, rng);
  const Tensor b = random_image(3, 5, 6, rng);
  std::vector<std::uint8_t> mask(30);
  for (auto& m : mask) m = rng.uniform() < 0.7 ? 1 : 0;
  mask[0] = 1;

  double want = 0.0;
  int n = 0;
  for (int p = 0; p < 30; ++p) {
    if (!mask[static_cast<std::size_t>(p)]) continue;
    double e = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = a.data[static_cast<std::size_t>(c) * 30 + p] -
                       b.data[static_cast<std::size_t>(c) * 30 + p];
      e += d * d;
    }
    want += e;
    ++n;
  }
  want /= n;
  const auto [map, total] = reconstruction_error(a, b, mask);
  CHECK(total == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("reconstruction_error: empty valid mask is a degenerate frame") {
  const Tensor a = Tensor::zeros({1, 2, 2});
  std::vector<std::uint8_t> mask(4, 0);
  CHECK_THROWS_AS(reconstruction_error(a, a, mask), DegenerateFrameError);
}

TEST_CASE("error_jacobian: zero Jacobian when reconstruction equals target") {
  Rng rng(19);
  const Tensor src = random_image(3, 6, 8, rng);
  const WarpResult res = error_jacobian(src, identity_grid(6, 8), src);
  CHECK(res.total_error == 0.0);
  for (double v : res.jacobian.data) CHECK(v == 0.0);
}

TEST_CASE("error_jacobian: shifted ramp produces a uniform-sign x component") {
  // Source is a column ramp; target is the same ramp shifted by one column.
  // The error derivative w.r.t. x must push all coordinates the same way.
  const int h = 4, w = 8;
  Tensor src({1, h, w}), tgt({1, h, w});
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      src.at({0, r, c}) = 0.1 * c;
      tgt.at({0, r, c}) = 0.1 * (c + 1);
    }
  CoordGrid g = identity_grid(h, w);
  for (int i = 0; i < h * w; ++i) g.coords.data[2 * i] += 0.25;  // interior, non-integer
  const WarpResult res = error_jacobian(src, g, tgt);
  int checked = 0;
  for (int i = 0; i < h * w; ++i) {
    if (!res.valid_mask[static_cast<std::size_t>(i)]) continue;
    CHECK(res.jacobian.data[2 * i] < 0.0);  // moving +x reduces error
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("error_jacobian: matches finite differences of the total error") {
  Rng rng(23);
  const Tensor src = random_image(3, 7, 9, rng);
  const Tensor tgt = random_image(3, 5, 6, rng);
  CoordGrid g = offset_grid(5, 6, rng, 7, 9);

  const WarpResult res = error_jacobian(src, g, tgt);
  for (std::size_t i = 0; i < g.coords.size(); ++i) {
    auto f = [&]() { return error_jacobian(src, g, tgt).total_error; };
    const double fd = oracles::central_diff(f, &g.coords.data[i]);
    CHECK(oracles::rel_err(res.jacobian.data[i], fd, 1e-7) < 1e-5);
  }
}

TEST_CASE("error_jacobian: fills every WarpResult field consistently") {
  Rng rng(29);
  const Tensor src = random_image(3, 6, 6, rng);
  const Tensor tgt = random_image(3, 6, 6, rng);
  CoordGrid g = offset_grid(6, 6, rng, 6, 6);
  const WarpResult res = error_jacobian(src, g, tgt);

  CHECK(res.valid_count > 0);
  double sum = 0.0;
  int n = 0;
  for (std::size_t p = 0; p < res.valid_mask.size(); ++p) {
    if (!res.valid_mask[p]) {
      CHECK(res.jacobian.data[p * 2] == 0.0);
      CHECK(res.jacobian.data[p * 2 + 1] == 0.0);
      continue;
    }
    sum += res.error_map.data[p];
    ++n;
  }
  CHECK(n == res.valid_count);
  CHECK(res.total_error == doctest::Approx(sum / n).epsilon(1e-12));
  CHECK(res.total_error >= 0.0);
}

TEST_CASE("mask monotonicity: shrinking the mask never increases the raw error sum") {
  Rng rng(31);
  const Tensor a = random_image(3, 6, 8, rng);
  const Tensor b = random_image(3, 6, 8, rng);
  std::vector<std::uint8_t> mask(48, 1);

  auto raw_sum = [&](const std::vector<std::uint8_t>& m) {
    const auto [map, total] = reconstruction_error(a, b, m);
    double s = 0.0;
    for (std::size_t p = 0; p < m.size(); ++p)
      if (m[p]) s += map.data[p];
    return s;
  };

  double prev = raw_sum(mask);
  for (int step = 0; step < 40; ++step) {
    // knock out one random still-valid pixel
    int tries = 0;
    int idx = rng.uniform_int(48);
    while (!mask[static_cast<std::size_t>(idx)] && ++tries < 200) idx = rng.uniform_int(48);
    if (!mask[static_cast<std::size_t>(idx)]) break;
    mask[static_cast<std::size_t>(idx)] = 0;
    const double cur = raw_sum(mask);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
}

TEST_CASE("warp chain rule: pose gradient through Jacobian x pose-Jacobian matches FD") {
  // d(total)/d(pose) assembled from the warp Jacobian and the reprojection
  // Jacobian must equal finite differences through the whole pipeline.
  Rng rng(37);
  const CameraIntrinsics k{30, 30, 12, 8, 24, 16};
  Tensor depth({16, 24});
  for (double& v : depth.data) v = rng.uniform(3.0, 6.0);
  // Invalid border ring pins the valid mask, keeping the loss smooth for FD.
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 24; ++c)
      if (r < 2 || r >= 14 || c < 2 || c >= 22) depth.at({r, c}) = 0.0;
  const Tensor src = random_image(3, 16, 24, rng);
  const Tensor tgt = random_image(3, 16, 24, rng);
  EulerPose pose{0.01, -0.02, 0.015, 0.03, -0.02, 0.1};

  auto warp_total = [&]() {
    const ReprojectResult rr = reproject_grid(depth, k, pose);
    CoordGrid g = rr.grid;
    return error_jacobian(src, g, tgt).total_error;
  };

  const ReprojectResult rr = reproject_grid(depth, k, pose);
  const WarpResult res = error_jacobian(src, rr.grid, tgt);
  double grad[6] = {0, 0, 0, 0, 0, 0};
  for (std::size_t p = 0; p < res.valid_mask.size(); ++p)
    for (int d = 0; d < 2; ++d)
      for (int a = 0; a < 6; ++a)
        grad[a] += res.jacobian.data[p * 2 + static_cast<std::size_t>(d)] *
                   rr.pose_jacobian.data[(p * 2 + static_cast<std::size_t>(d)) * 6 +
                                         static_cast<std::size_t>(a)];

  double* slots[6] = {&pose.alpha, &pose.beta, &pose.gamma, &pose.tx, &pose.ty, &pose.tz};
  for (int a = 0; a < 6; ++a) {
    const double fd = oracles::central_diff(warp_total, slots[a]);
    CHECK(oracles::rel_err(grad[a], fd, 1e-7) < 1e-4);
  }
}
