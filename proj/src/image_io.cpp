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

#include "viol/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

#include "viol/errors.hpp"

namespace viol {

Tensor read_image_rgb8(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);  // BGR
  if (m.empty()) throw DataError("cannot decode image: " + path);
  Tensor out({3, m.rows, m.cols});
  const std::size_t hw = static_cast<std::size_t>(m.rows) * m.cols;
  for (int r = 0; r < m.rows; ++r) {
    const cv::Vec3b* row = m.ptr<cv::Vec3b>(r);
    for (int c = 0; c < m.cols; ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * m.cols + c;
      out.data[p] = row[c][2];           // R
      out.data[hw + p] = row[c][1];      // G
      out.data[2 * hw + p] = row[c][0];  // B
    }
  }
  return out;
}

void write_image_rgb8(const std::string& path, const Tensor& img) {
  const int h = img.dim(1), w = img.dim(2);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  cv::Mat m(h, w, CV_8UC3);
  auto to_u8 = [](double v) {
    return static_cast<unsigned char>(std::clamp(std::lround(v), 0l, 255l));
  };
  for (int r = 0; r < h; ++r) {
    cv::Vec3b* row = m.ptr<cv::Vec3b>(r);
    for (int c = 0; c < w; ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * w + c;
      row[c][2] = to_u8(img.data[p]);
      row[c][1] = to_u8(img.data[hw + p]);
      row[c][0] = to_u8(img.data[2 * hw + p]);
    }
  }
  if (!cv::imwrite(path, m)) throw DataError("cannot write image: " + path);
}

Tensor read_image_gray16(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw DataError("cannot decode image: " + path);
  if (m.type() != CV_16UC1) throw DataError("expected 16-bit grayscale: " + path);
  Tensor out({m.rows, m.cols});
  for (int r = 0; r < m.rows; ++r) {
    const std::uint16_t* row = m.ptr<std::uint16_t>(r);
    for (int c = 0; c < m.cols; ++c)
      out.data[static_cast<std::size_t>(r) * m.cols + c] = row[c];
  }
  return out;
}

void write_image_gray16(const std::string& path, const Tensor& img) {
  const int h = img.dim(0), w = img.dim(1);
  cv::Mat m(h, w, CV_16UC1);
  for (int r = 0; r < h; ++r) {
    std::uint16_t* row = m.ptr<std::uint16_t>(r);
    for (int c = 0; c < w; ++c)
      row[c] = static_cast<std::uint16_t>(
          std::clamp(std::lround(img.data[static_cast<std::size_t>(r) * w + c]), 0l, 65535l));
  }
  if (!cv::imwrite(path, m)) throw DataError("cannot write image: " + path);
}

}  // namespace viol
