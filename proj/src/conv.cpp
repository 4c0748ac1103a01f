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

#include "viol/conv.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace viol {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRowMat = Eigen::Map<RowMat>;
using ConstMapRowMat = Eigen::Map<const RowMat>;

// Strip width for im2col tiles, in output pixels. Bounds scratch memory to
// ckk * kTile doubles per conv call.
constexpr int kTile = 4096;

void check_input(const Tensor& input, const Conv2dSpec& s, const char* who) {
  if (input.rank() != 4)
    throw std::invalid_argument(std::string(who) + ": expected rank-4 input [B,C,H,W], got " +
                                shape_str(input.shape));
  if (input.dim(1) != s.in_ch)
    throw std::invalid_argument(std::string(who) + ": input channel count " +
                                std::to_string(input.dim(1)) + " != layer in_ch " +
                                std::to_string(s.in_ch));
  if (s.out_h(input.dim(2)) < 1 || s.out_w(input.dim(3)) < 1)
    throw std::invalid_argument(std::string(who) + ": output spatial dims would be < 1 for input " +
                                shape_str(input.shape));
}

// Fills cols[ckk x n] with input patches for output pixels [p0, p0+n).
void im2col_strip(const double* in, int C, int H, int W, const Conv2dSpec& s, int OW, int p0,
                  int n, double* cols) {
  const int kk = s.kh * s.kw;
  const int ckk = C * kk;
  for (int c = 0; c < C; ++c) {
    const double* plane = in + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < s.kh; ++ky) {
      for (int kx = 0; kx < s.kw; ++kx) {
        double* row = cols + static_cast<std::size_t>(c * kk + ky * s.kw + kx) * n;
        for (int i = 0; i < n; ++i) {
          const int p = p0 + i;
          const int oy = p / OW;
          const int ox = p - oy * OW;
          const int y = oy * s.sh - s.ph + ky;
          const int x = ox * s.sw - s.pw + kx;
          row[i] = (y >= 0 && y < H && x >= 0 && x < W) ? plane[y * W + x] : 0.0;
        }
      }
    }
    (void)ckk;
  }
}

// Scatters cols gradients [ckk x n] back into the input gradient.
void col2im_strip(const double* cols, int C, int H, int W, const Conv2dSpec& s, int OW, int p0,
                  int n, double* gin) {
  const int kk = s.kh * s.kw;
  for (int c = 0; c < C; ++c) {
    double* plane = gin + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < s.kh; ++ky) {
      for (int kx = 0; kx < s.kw; ++kx) {
        const double* row = cols + static_cast<std::size_t>(c * kk + ky * s.kw + kx) * n;
        for (int i = 0; i < n; ++i) {
          const int p = p0 + i;
          const int oy = p / OW;
          const int ox = p - oy * OW;
          const int y = oy * s.sh - s.ph + ky;
          const int x = ox * s.sw - s.pw + kx;
          if (y >= 0 && y < H && x >= 0 && x < W) plane[y * W + x] += row[i];
        }
      }
    }
  }
}

}  // namespace

ConvLayer make_conv_layer(ParamStore& store, const std::string& name, int in_ch, int out_ch,
                          int kh, int kw, int sh, int sw) {
  return make_conv_layer_pad(store, name, in_ch, out_ch, kh, kw, sh, sw, (kh - 1) / 2,
                             (kw - 1) / 2);
}

ConvLayer make_conv_layer_pad(ParamStore& store, const std::string& name, int in_ch, int out_ch,
                              int kh, int kw, int sh, int sw, int ph, int pw) {
  if (kh < 1 || kw < 1 || sh < 1 || sw < 1)
    throw std::invalid_argument("conv layer " + name + ": kernel and stride must be >= 1");
  ConvLayer layer;
  layer.name = name;
  layer.spec = {in_ch, out_ch, kh, kw, sh, sw, ph, pw};
  layer.kernel = &store.create(name + ".kernel", {out_ch, in_ch, kh, kw});
  layer.bias = &store.create(name + ".bias", {out_ch});
  return layer;
}

void init_xavier_uniform(const ConvLayer& layer, Rng& rng, double gain) {
  const Conv2dSpec& s = layer.spec;
  const double fan_in = static_cast<double>(s.in_ch) * s.kh * s.kw;
  const double fan_out = static_cast<double>(s.out_ch) * s.kh * s.kw;
  const double bound = gain * std::sqrt(6.0 / (fan_in + fan_out));
  for (double& w : layer.kernel->value.data) w = rng.uniform(-bound, bound);
  std::fill(layer.bias->value.data.begin(), layer.bias->value.data.end(), 0.0);
}

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer, Conv2dContext* ctx) {
  const Conv2dSpec& s = layer.spec;
  check_input(input, s, "conv2d_forward");
  const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int OH = s.out_h(H), OW = s.out_w(W);
  const int N = OH * OW;
  const int ckk = C * s.kh * s.kw;

  Tensor out({B, s.out_ch, OH, OW});
  std::vector<double> cols(static_cast<std::size_t>(ckk) * std::min(N, kTile));
  ConstMapRowMat K(layer.kernel->value.data.data(), s.out_ch, ckk);

  for (int b = 0; b < B; ++b) {
    const double* in = input.data.data() + static_cast<std::size_t>(b) * C * H * W;
    double* ob = out.data.data() + static_cast<std::size_t>(b) * s.out_ch * N;
    for (int p0 = 0; p0 < N; p0 += kTile) {
      const int n = std::min(kTile, N - p0);
      im2col_strip(in, C, H, W, s, OW, p0, n, cols.data());
      ConstMapRowMat Cm(cols.data(), ckk, n);
      // Output rows are strided by N, the strip occupies columns [p0,p0+n).
      Eigen::Map<RowMat, 0, Eigen::OuterStride<>> Om(ob + p0, s.out_ch, n,
                                                     Eigen::OuterStride<>(N));
      Om.noalias() = K * Cm;
    }
    for (int oc = 0; oc < s.out_ch; ++oc) {
      const double bv = layer.bias->value.data[oc];
      double* row = ob + static_cast<std::size_t>(oc) * N;
      for (int i = 0; i < N; ++i) row[i] += bv;
    }
  }

  if (ctx) {
    ctx->input = &input;
    ctx->recorded = true;
  }
  return out;
}

void conv2d_backward(const Conv2dContext& ctx, const ConvLayer& layer, const Tensor& upstream,
                     Tensor* input_grad) {
  if (!ctx.recorded || !ctx.input)
    throw std::logic_error("conv2d_backward called without a recorded forward pass");
  const Tensor& input = *ctx.input;
  const Conv2dSpec& s = layer.spec;
  const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int OH = s.out_h(H), OW = s.out_w(W);
  const int N = OH * OW;
  const int ckk = C * s.kh * s.kw;
  if (upstream.shape != std::vector<int>{B, s.out_ch, OH, OW})
    throw std::invalid_argument("conv2d_backward: upstream shape " + shape_str(upstream.shape) +
                                " does not match forward output [" + std::to_string(B) + "," +
                                std::to_string(s.out_ch) + "," + std::to_string(OH) + "," +
                                std::to_string(OW) + "]");

  if (input_grad && input_grad->data.empty()) *input_grad = Tensor(input.shape);
  if (input_grad && input_grad->shape != input.shape)
    throw std::invalid_argument("conv2d_backward: input_grad shape mismatch");

  std::vector<double> cols(static_cast<std::size_t>(ckk) * std::min(N, kTile));
  MapRowMat Kg(layer.kernel->value.grad.data(), s.out_ch, ckk);
  ConstMapRowMat K(layer.kernel->value.data.data(), s.out_ch, ckk);

  for (int b = 0; b < B; ++b) {
    const double* in = input.data.data() + static_cast<std::size_t>(b) * C * H * W;
    const double* up = upstream.data.data() + static_cast<std::size_t>(b) * s.out_ch * N;
    for (int p0 = 0; p0 < N; p0 += kTile) {
      const int n = std::min(kTile, N - p0);
      Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> Um(up + p0, s.out_ch, n,
                                                           Eigen::OuterStride<>(N));
      im2col_strip(in, C, H, W, s, OW, p0, n, cols.data());
      {
        ConstMapRowMat Cm(cols.data(), ckk, n);
        Kg.noalias() += Um * Cm.transpose();
      }
      if (input_grad) {
        MapRowMat Cg(cols.data(), ckk, n);  // reuse scratch for dCols
        Cg.noalias() = K.transpose() * Um;
        col2im_strip(cols.data(), C, H, W, s, OW, p0, n,
                     input_grad->data.data() + static_cast<std::size_t>(b) * C * H * W);
      }
    }
    for (int oc = 0; oc < s.out_ch; ++oc) {
      const double* row = up + static_cast<std::size_t>(oc) * N;
      double acc = 0.0;
      for (int i = 0; i < N; ++i) acc += row[i];
      layer.bias->value.grad[oc] += acc;
    }
  }
}

}  // namespace viol
