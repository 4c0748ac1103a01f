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
#include <vector>

#include "viol/graph.hpp"
#include "viol/rng.hpp"
#include "viol/tensor.hpp"

namespace viol {

/// 20 samples of gyroscope and accelerometer data at a nominal 100 Hz,
/// spanning ~100 ms before the source frame through ~100 ms after it.
struct ImuWindow {
  Tensor angular_velocity;     // [20,3] rad/s
  Tensor linear_acceleration;  // [20,3] m/s^2
  bool gap_filled = false;     // true when a missing sample was repeated

  static constexpr int kRows = 20;
  void validate() const;
};

/// One convolutional pathway over a [B,1,20,3] stream: two 64-filter and two
/// stride-2 128-filter 5x3 layers, three 256-filter layers (strides 2,1,1,
/// kernels 5x3, 3x3, 3x1), then a kernel-1 conv to 3 channels whose global
/// mean yields the output triplet. Channel counts scale with width_mult.
class ImuPathway {
 public:
  ImuPathway() = default;
  ImuPathway(ParamStore& store, const std::string& prefix, double width_mult);

  void init_weights(Rng& rng, double head_gain) const;
  VarId forward(Graph& g, VarId input) const;  // [B,1,20,3] -> [B,3]

 private:
  std::vector<ConvLayer> convs_;
  ConvLayer head_;
};

/// Two parallel pathways: angular velocity drives the rotation triplet,
/// linear acceleration the translation triplet; the results concatenate into
/// the six-vector initial pose estimate.
class ImuFrontend {
 public:
  ImuFrontend() = default;
  ImuFrontend(ParamStore& store, double width_mult);

  void init_weights(std::uint64_t seed, double head_gain) const;

  /// Window -> [6] pose vector node (alpha,beta,gamma,tx,ty,tz).
  VarId forward(Graph& g, const ImuWindow& window) const;

  /// As above but from existing [1,1,20,3] nodes, so tests can read input
  /// gradients per pathway.
  VarId forward_from_nodes(Graph& g, VarId gyro, VarId accel) const;

 private:
  ImuPathway gyro_, accel_;
};

/// Shapes a [20,3] stream tensor into the [1,1,20,3] layout pathways expect.
Tensor imu_stream_input(const Tensor& rows20x3);

}  // namespace viol
