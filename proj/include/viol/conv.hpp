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

#include "viol/params.hpp"
#include "viol/rng.hpp"
#include "viol/tensor.hpp"

namespace viol {

struct Conv2dSpec {
  int in_ch = 1;
  int out_ch = 1;
  int kh = 1, kw = 1;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;  // symmetric zero padding

  int out_h(int in_h) const { return (in_h + 2 * ph - kh) / sh + 1; }
  int out_w(int in_w) const { return (in_w + 2 * pw - kw) / sw + 1; }
};

/// 2-D convolution layer (cross-correlation). Kernel is [out_ch,in_ch,kh,kw],
/// bias is [out_ch]; both live in a ParamStore under "<name>.kernel" and
/// "<name>.bias".
struct ConvLayer {
  std::string name;
  Conv2dSpec spec;
  Parameter* kernel = nullptr;
  Parameter* bias = nullptr;
};

/// Creates a layer with "same"-style padding (k-1)/2 for odd kernels.
/// Weights start at zero; call init_xavier_uniform to randomize.
ConvLayer make_conv_layer(ParamStore& store, const std::string& name, int in_ch, int out_ch,
                          int kh, int kw, int sh = 1, int sw = 1);
ConvLayer make_conv_layer_pad(ParamStore& store, const std::string& name, int in_ch, int out_ch,
                              int kh, int kw, int sh, int sw, int ph, int pw);

/// Uniform init in +-sqrt(6/(fan_in+fan_out)) scaled by `gain`; bias stays 0.
/// Mutates only the referenced parameters.
void init_xavier_uniform(const ConvLayer& layer, Rng& rng, double gain = 1.0);

/// Forward state recorded for the backward pass. Holds a non-owning pointer
/// to the forward input; the caller keeps that tensor alive until backward.
struct Conv2dContext {
  const Tensor* input = nullptr;
  bool recorded = false;
};

/// Cross-correlation with zero padding over [B,C,H,W]. Output dims follow
/// Conv2dSpec and must be >= 1. Rejects channel/shape mismatches naming the
/// offending dimension.
Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer, Conv2dContext* ctx = nullptr);

/// Accumulates (+=) kernel/bias gradients into the layer parameters and,
/// when input_grad is non-null, the input gradient into *input_grad (which
/// must be zero-initialized to the input shape by the caller or empty, in
/// which case it is allocated). Throws if no forward was recorded.
void conv2d_backward(const Conv2dContext& ctx, const ConvLayer& layer, const Tensor& upstream,
                     Tensor* input_grad);

}  // namespace viol
