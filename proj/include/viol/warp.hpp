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

#include <cstdint>
#include <utility>
#include <vector>

#include "viol/geometry.hpp"
#include "viol/graph.hpp"
#include "viol/tensor.hpp"

namespace viol {

/// Reconstruction of a target view from a source image, with the per-pixel
/// error map and the Jacobian of the (mean-normalized) error w.r.t. the
/// sampling coordinates. The Jacobian is zero wherever valid_mask is false.
struct WarpResult {
  Tensor reconstruction;           // [C,H,W]
  Tensor error_map;                // [H,W], per-pixel squared error over channels
  double total_error = 0.0;        // mean of error_map over valid pixels
  Tensor jacobian;                 // [H,W,2] = d(total_error)/d(x,y) per pixel
  std::vector<std::uint8_t> valid_mask;  // H*W
  int valid_count = 0;
};

/// Bilinear reconstruction: out(p) = sum over the <= 4 neighbors (h,w) of
/// source(h,w) * max(0,1-|x-h|) * max(0,1-|y-w|). Coordinates outside
/// [0,W-1]x[0,H-1] (and pixels already masked in the grid) come out invalid
/// in *out_mask with value 0.
Tensor bilinear_sample(const Tensor& source, const CoordGrid& grid,
                       std::vector<std::uint8_t>* out_mask);

/// Sub-gradients of the sampling kernel w.r.t. the coordinates, contracted
/// against per-channel upstream gradients; returns [H,W,2]. The sign at
/// h == x (resp. w == y) follows the >= convention. Zero on invalid pixels.
Tensor sample_coord_gradients(const Tensor& source, const CoordGrid& grid, const Tensor& upstream,
                              const std::vector<std::uint8_t>& mask);

/// Per-pixel squared L2 over channels on valid pixels plus the total
/// normalized by the valid-pixel count. Throws on an empty valid mask
/// (degenerate frame).
std::pair<Tensor, double> reconstruction_error(const Tensor& reconstruction, const Tensor& target,
                                               const std::vector<std::uint8_t>& mask);

/// Full warp unit: reconstruction, error map, total error and the coordinate
/// Jacobian that feeds the next refinement level. Runs identically at
/// training and inference time.
WarpResult error_jacobian(const Tensor& source, const CoordGrid& grid, const Tensor& target);

// --- differentiable graph wrappers ---------------------------------------

/// reproject_grid as a graph op over a [6] pose node. Gradients flow to the
/// pose through the analytic coordinate/pose Jacobian.
struct ReprojectVar {
  VarId coords = -1;              // [H,W,2]
  std::vector<std::uint8_t> valid;  // reprojection mask (depth/z checks only)
  int scale_factor = 1;
  const Tensor* pose_jacobian = nullptr;  // [H,W,2,6], owned by the graph closure
};
ReprojectVar reproject_op(Graph& g, VarId pose6, const Tensor& depth, const CameraIntrinsics& k,
                          int scale_factor, double eps_z = 1e-3);

/// Warp + error + Jacobian as graph ops downstream of a coords node.
/// `source`/`target` are [C,H,W] constants at this level's scale. Gradients
/// flow into coords both through the reconstruction error and through the
/// emitted Jacobian map (which the next level consumes).
struct WarpErrorVar {
  VarId reconstruction = -1;  // [C,H,W]
  VarId error = -1;           // scalar
  VarId jacobian = -1;        // [H,W,2]
  std::vector<std::uint8_t> mask;
  int valid_count = 0;
};
WarpErrorVar warp_error_op(Graph& g, VarId coords, const Tensor& source, const Tensor& target,
                           const std::vector<std::uint8_t>& reproj_valid, int scale_factor);

/// [H,W,2] -> [1,2,H,W] layout change so the Jacobian can enter convolutions.
VarId jacobian_to_channels(Graph& g, VarId jac_hw2);

/// Snapshot of the warp nodes into the plain WarpResult record.
WarpResult snapshot_warp(const Graph& g, const WarpErrorVar& wv, const Tensor& target);

}  // namespace viol
