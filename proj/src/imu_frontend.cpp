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

#include "viol/imu_frontend.hpp"

#include <cmath>
#include <stdexcept>

namespace viol {

void ImuWindow::validate() const {
  if (angular_velocity.shape != std::vector<int>{kRows, 3})
    throw std::invalid_argument("ImuWindow: angular_velocity must be [20,3], got " +
                                shape_str(angular_velocity.shape));
  if (linear_acceleration.shape != std::vector<int>{kRows, 3})
    throw std::invalid_argument("ImuWindow: linear_acceleration must be [20,3], got " +
                                shape_str(linear_acceleration.shape));
  if (!angular_velocity.all_finite() || !linear_acceleration.all_finite())
    throw std::invalid_argument("ImuWindow: non-finite values");
}

Tensor imu_stream_input(const Tensor& rows20x3) {
  Tensor out({1, 1, rows20x3.dim(0), rows20x3.dim(1)}, rows20x3.data);
  return out;
}

namespace {
int scaled(int ch, double width_mult) {
  const int v = static_cast<int>(std::lround(ch * width_mult));
  return v < 1 ? 1 : v;
}
}  // namespace

ImuPathway::ImuPathway(ParamStore& store, const std::string& prefix, double width_mult) {
  const int c64 = scaled(64, width_mult);
  const int c128 = scaled(128, width_mult);
  const int c256 = scaled(256, width_mult);
  // Time axis is H (extent 20, kernel 5), sensor axis is W (extent 3,
  // kernel 3); the stated 3x5 kernels only fit this orientation.
  convs_.push_back(make_conv_layer(store, prefix + ".conv1", 1, c64, 5, 3, 1, 1));
  convs_.push_back(make_conv_layer(store, prefix + ".conv2", c64, c64, 5, 3, 1, 1));
  convs_.push_back(make_conv_layer(store, prefix + ".conv3", c64, c128, 5, 3, 2, 2));
  convs_.push_back(make_conv_layer(store, prefix + ".conv4", c128, c128, 5, 3, 2, 2));
  convs_.push_back(make_conv_layer(store, prefix + ".conv5", c128, c256, 5, 3, 2, 2));
  convs_.push_back(make_conv_layer(store, prefix + ".conv6", c256, c256, 3, 3, 1, 1));
  convs_.push_back(make_conv_layer(store, prefix + ".conv7", c256, c256, 3, 1, 1, 1));
  head_ = make_conv_layer(store, prefix + ".head", c256, 3, 1, 1, 1, 1);
}

void ImuPathway::init_weights(Rng& rng, double head_gain) const {
  for (const ConvLayer& c : convs_) init_xavier_uniform(c, rng);
  init_xavier_uniform(head_, rng, head_gain);
}

VarId ImuPathway::forward(Graph& g, VarId input) const {
  VarId x = input;
  for (const ConvLayer& c : convs_) x = g.relu(g.conv2d(x, c));
  // The head emits the pose triplet: linear output, flattened by a global
  // mean over the remaining spatial extent.
  x = g.conv2d(x, head_);
  return g.global_mean(x);  // [B,3]
}

ImuFrontend::ImuFrontend(ParamStore& store, double width_mult)
    : gyro_(store, "imu.gyro", width_mult), accel_(store, "imu.accel", width_mult) {}

void ImuFrontend::init_weights(std::uint64_t seed, double head_gain) const {
  Rng rg = substream(seed, "init/imu.gyro");
  Rng ra = substream(seed, "init/imu.accel");
  gyro_.init_weights(rg, head_gain);
  accel_.init_weights(ra, head_gain);
}

VarId ImuFrontend::forward(Graph& g, const ImuWindow& window) const {
  window.validate();
  VarId gin = g.constant(imu_stream_input(window.angular_velocity));
  VarId ain = g.constant(imu_stream_input(window.linear_acceleration));
  return forward_from_nodes(g, gin, ain);
}

VarId ImuFrontend::forward_from_nodes(Graph& g, VarId gyro, VarId accel) const {
  VarId rot = gyro_.forward(g, gyro);     // [B,3] rotations
  VarId trans = accel_.forward(g, accel); // [B,3] translation
  VarId both = g.concat2(rot, trans, 1);  // [B,6]
  const int b = g.value(both).dim(0);
  if (b == 1) return g.reshape(both, {6});
  return both;
}

}  // namespace viol
