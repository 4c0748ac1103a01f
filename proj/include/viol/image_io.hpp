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

#include <string>

#include "viol/tensor.hpp"

namespace viol {

/// 8-bit RGB PNG -> [3,H,W] tensor with values 0..255. Throws DataError
/// naming the path on failure.
Tensor read_image_rgb8(const std::string& path);

/// [3,H,W] with values 0..255 (rounded, clamped) -> 8-bit RGB PNG.
void write_image_rgb8(const std::string& path, const Tensor& img);

/// 16-bit grayscale PNG -> [H,W] tensor of raw u16 values.
Tensor read_image_gray16(const std::string& path);

/// [H,W] u16-valued tensor -> 16-bit grayscale PNG.
void write_image_gray16(const std::string& path, const Tensor& img);

}  // namespace viol
