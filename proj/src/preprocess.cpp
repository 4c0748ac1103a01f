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

// Built with -ffp-contract=off so results are reproducible bit-for-bit
// against the stored preprocessing fixtures.

#include <algorithm>
#include <cmath>

#include "viol/data.hpp"

namespace viol {

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
  if (img.rank() != 3) throw std::invalid_argument("resize_bilinear: expected [C,H,W]");
  const int ch = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: bad output size");
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;

  Tensor out({ch, out_h, out_w});
  for (int c = 0; c < ch; ++c) {
    const double* plane = img.data.data() + static_cast<std::size_t>(c) * h * w;
    double* oplane = out.data.data() + static_cast<std::size_t>(c) * out_h * out_w;
    for (int r = 0; r < out_h; ++r) {
      double fy = (r + 0.5) * sy - 0.5;
      fy = std::max(0.0, std::min(fy, static_cast<double>(h - 1)));
      const int y0 = static_cast<int>(std::floor(fy));
      const int y1 = std::min(y0 + 1, h - 1);
      const double wy = fy - y0;
      for (int cc = 0; cc < out_w; ++cc) {
        double fx = (cc + 0.5) * sx - 0.5;
        fx = std::max(0.0, std::min(fx, static_cast<double>(w - 1)));
        const int x0 = static_cast<int>(std::floor(fx));
        const int x1 = std::min(x0 + 1, w - 1);
        const double wx = fx - x0;
        const double p00 = plane[y0 * w + x0];
        const double p10 = plane[y0 * w + x1];
        const double p01 = plane[y1 * w + x0];
        const double p11 = plane[y1 * w + x1];
        const double v0 = p00 * (1.0 - wx) + p10 * wx;
        const double v1 = p01 * (1.0 - wx) + p11 * wx;
        oplane[static_cast<std::size_t>(r) * out_w + cc] = v0 * (1.0 - wy) + v1 * wy;
      }
    }
  }
  return out;
}

Tensor preprocess_image(const Tensor& raw) {
  if (raw.rank() != 3 || raw.dim(0) != 3)
    throw std::invalid_argument("preprocess_image: expected [3,H,W], got " +
                                shape_str(raw.shape));
  Tensor img = raw;
  if (img.dim(1) != kRawHeight || img.dim(2) != kRawWidth)
    img = resize_bilinear(img, kRawHeight, kRawWidth);

  // Keep the bottom rows; the sky band carries no depth returns.
  const int top = kRawHeight - kCropHeight;
  Tensor crop({3, kCropHeight, kRawWidth});
  const std::size_t row_bytes = static_cast<std::size_t>(kRawWidth);
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < kCropHeight; ++r)
      std::copy_n(img.data.data() +
                      (static_cast<std::size_t>(c) * kRawHeight + (top + r)) * row_bytes,
                  row_bytes,
                  crop.data.data() + (static_cast<std::size_t>(c) * kCropHeight + r) * row_bytes);

  Tensor out = resize_bilinear(crop, kNetHeight, kNetWidth);
  for (double& v : out.data) v /= 255.0;
  return out;
}

CameraIntrinsics preprocess_intrinsics(const CameraIntrinsics& raw) {
  // Resize to the reference raw size, crop the top rows, resize to the net
  // input. With pixel centers at integers, a resize by s maps u to
  // (u+0.5)*s-0.5.
  CameraIntrinsics k = raw;
  const double s0x = static_cast<double>(kRawWidth) / raw.width;
  const double s0y = static_cast<double>(kRawHeight) / raw.height;
  k.fx *= s0x;
  k.fy *= s0y;
  k.cx = (k.cx + 0.5) * s0x - 0.5;
  k.cy = (k.cy + 0.5) * s0y - 0.5;

  k.cy -= kRawHeight - kCropHeight;

  const double s1x = static_cast<double>(kNetWidth) / kRawWidth;
  const double s1y = static_cast<double>(kNetHeight) / kCropHeight;
  k.fx *= s1x;
  k.fy *= s1y;
  k.cx = (k.cx + 0.5) * s1x - 0.5;
  k.cy = (k.cy + 0.5) * s1y - 0.5;
  k.width = kNetWidth;
  k.height = kNetHeight;
  return k;
}

}  // namespace viol
