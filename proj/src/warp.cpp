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

#include "viol/warp.hpp"

#include <cmath>
#include <memory>

#include "viol/errors.hpp"

namespace viol {

namespace {

// Neighbor support along one axis at coordinate v: base index, fraction, and
// whether the +1 neighbor participates. For sampling the +1 weight is frac;
// for derivatives the +1 column participates iff frac > 0 (strict |v-h| < 1).
struct AxisSupport {
  int i0;
  double frac;
};

inline AxisSupport axis_support(double v) {
  const double f = std::floor(v);
  return {static_cast<int>(f), v - f};
}

inline double read(const double* plane, int w, int h_limit, int w_limit, int x, int y) {
  return (x >= 0 && x < w_limit && y >= 0 && y < h_limit) ? plane[y * w + x] : 0.0;
}

}  // namespace

Tensor bilinear_sample(const Tensor& source, const CoordGrid& grid,
                       std::vector<std::uint8_t>* out_mask) {
  if (source.rank() != 3)
    throw std::invalid_argument("bilinear_sample: source must be [C,H,W], got " +
                                shape_str(source.shape));
  const int ch = source.dim(0), sh = source.dim(1), sw = source.dim(2);
  const int h = grid.height(), w = grid.width();
  if (grid.valid.size() != static_cast<std::size_t>(h) * w)
    throw std::invalid_argument("bilinear_sample: grid mask size mismatch");

  Tensor out({ch, h, w});
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);
  const std::size_t plane_sz = static_cast<std::size_t>(sh) * sw;

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * w + c;
      if (!grid.valid[p]) continue;
      const double x = grid.coords.data[p * 2];
      const double y = grid.coords.data[p * 2 + 1];
      if (!(x >= 0.0 && x <= sw - 1 && y >= 0.0 && y <= sh - 1)) continue;
      mask[p] = 1;

      const AxisSupport ax = axis_support(x), ay = axis_support(y);
      const double w00 = (1.0 - ax.frac) * (1.0 - ay.frac);
      const double w10 = ax.frac * (1.0 - ay.frac);
      const double w01 = (1.0 - ax.frac) * ay.frac;
      const double w11 = ax.frac * ay.frac;

      for (int k = 0; k < ch; ++k) {
        const double* plane = source.data.data() + static_cast<std::size_t>(k) * plane_sz;
        double acc = w00 * read(plane, sw, sh, sw, ax.i0, ay.i0);
        if (w10 != 0.0) acc += w10 * read(plane, sw, sh, sw, ax.i0 + 1, ay.i0);
        if (w01 != 0.0) acc += w01 * read(plane, sw, sh, sw, ax.i0, ay.i0 + 1);
        if (w11 != 0.0) acc += w11 * read(plane, sw, sh, sw, ax.i0 + 1, ay.i0 + 1);
        out.data[static_cast<std::size_t>(k) * h * w + p] = acc;
      }
    }
  }
  if (out_mask) *out_mask = std::move(mask);
  return out;
}

Tensor sample_coord_gradients(const Tensor& source, const CoordGrid& grid, const Tensor& upstream,
                              const std::vector<std::uint8_t>& mask) {
  const int ch = source.dim(0), sh = source.dim(1), sw = source.dim(2);
  const int h = grid.height(), w = grid.width();
  check_same_shape(upstream, Tensor({ch, h, w}), "sample_coord_gradients upstream");

  Tensor out({h, w, 2});
  const std::size_t plane_sz = static_cast<std::size_t>(sh) * sw;

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * w + c;
      if (!mask[p]) continue;
      const double x = grid.coords.data[p * 2];
      const double y = grid.coords.data[p * 2 + 1];
      const AxisSupport ax = axis_support(x), ay = axis_support(y);

      // Columns within |x-h| < 1 with their h >= x signs, and sampling
      // weights along each axis. At integral coordinates only the base
      // column participates and its sign is +1 (the >= convention).
      const bool two_x = ax.frac > 0.0;
      const bool two_y = ay.frac > 0.0;

      double gx = 0.0, gy = 0.0;
      for (int k = 0; k < ch; ++k) {
        const double* plane = source.data.data() + static_cast<std::size_t>(k) * plane_sz;
        const double up = upstream.data[static_cast<std::size_t>(k) * h * w + p];
        if (up == 0.0) continue;
        const double u00 = read(plane, sw, sh, sw, ax.i0, ay.i0);
        const double u10 = two_x ? read(plane, sw, sh, sw, ax.i0 + 1, ay.i0) : 0.0;
        const double u01 = two_y ? read(plane, sw, sh, sw, ax.i0, ay.i0 + 1) : 0.0;
        const double u11 = (two_x && two_y) ? read(plane, sw, sh, sw, ax.i0 + 1, ay.i0 + 1) : 0.0;

        double dx, dy;
        if (two_x)
          dx = (u10 - u00) * (1.0 - ay.frac) + (two_y ? (u11 - u01) * ay.frac : 0.0);
        else
          dx = u00 * (1.0 - ay.frac) + (two_y ? u01 * ay.frac : 0.0);
        if (two_y)
          dy = (u01 - u00) * (1.0 - ax.frac) + (two_x ? (u11 - u10) * ax.frac : 0.0);
        else
          dy = u00 * (1.0 - ax.frac) + (two_x ? u10 * ax.frac : 0.0);

        gx += up * dx;
        gy += up * dy;
      }
      out.data[p * 2] = gx;
      out.data[p * 2 + 1] = gy;
    }
  }
  return out;
}

std::pair<Tensor, double> reconstruction_error(const Tensor& reconstruction, const Tensor& target,
                                               const std::vector<std::uint8_t>& mask) {
  check_same_shape(reconstruction, target, "reconstruction_error");
  const int ch = reconstruction.dim(0), h = reconstruction.dim(1), w = reconstruction.dim(2);
  const std::size_t hw = static_cast<std::size_t>(h) * w;

  Tensor map({h, w});
  double total = 0.0;
  int valid = 0;
  for (std::size_t p = 0; p < hw; ++p) {
    if (!mask[p]) continue;
    double e = 0.0;
    for (int k = 0; k < ch; ++k) {
      const double d = reconstruction.data[static_cast<std::size_t>(k) * hw + p] -
                       target.data[static_cast<std::size_t>(k) * hw + p];
      e += d * d;
    }
    map.data[p] = e;
    total += e;
    ++valid;
  }
  if (valid == 0)
    throw DegenerateFrameError("reconstruction_error: empty valid mask (degenerate frame)");
  return {std::move(map), total / valid};
}

WarpResult error_jacobian(const Tensor& source, const CoordGrid& grid, const Tensor& target) {
  WarpResult res;
  res.reconstruction = bilinear_sample(source, grid, &res.valid_mask);
  auto [map, total] = reconstruction_error(res.reconstruction, target, res.valid_mask);
  res.error_map = std::move(map);
  res.total_error = total;
  res.valid_count = 0;
  for (auto m : res.valid_mask) res.valid_count += m;

  // d(total)/d(coords) = sub-gradients contracted with 2*(Ir - target)/N.
  const double inv_n2 = 2.0 / res.valid_count;
  Tensor upstream(res.reconstruction.shape);
  const std::size_t hw = res.error_map.size();
  const int ch = source.dim(0);
  for (int k = 0; k < ch; ++k)
    for (std::size_t p = 0; p < hw; ++p) {
      const std::size_t i = static_cast<std::size_t>(k) * hw + p;
      if (res.valid_mask[p])
        upstream.data[i] = inv_n2 * (res.reconstruction.data[i] - target.data[i]);
    }
  res.jacobian = sample_coord_gradients(source, grid, upstream, res.valid_mask);
  return res;
}

// --- graph wrappers -------------------------------------------------------

ReprojectVar reproject_op(Graph& g, VarId pose6, const Tensor& depth, const CameraIntrinsics& k,
                          int scale_factor, double eps_z) {
  const Tensor& pv = g.value(pose6);
  if (pv.size() != 6) throw std::invalid_argument("reproject_op: pose node must have 6 values");
  EulerPose pose = EulerPose::from_ptr(pv.data.data());

  ReprojectResult rr = reproject_grid(depth, k, pose, eps_z);
  auto jac = std::make_shared<Tensor>(std::move(rr.pose_jacobian));

  ReprojectVar out;
  out.valid = rr.grid.valid;
  out.scale_factor = scale_factor;
  out.pose_jacobian = jac.get();

  Graph::Node n;
  n.value = std::move(rr.grid.coords);
  VarId coords = g.append(std::move(n));
  out.coords = coords;

  g.node(coords).backprop = [pose6, coords, jac](Graph& gb) {
    const auto& self = gb.node(coords);
    const std::size_t hw2 = self.value.size();
    double gp[6] = {0, 0, 0, 0, 0, 0};
    const double* jd = jac->data.data();
    for (std::size_t i = 0; i < hw2; ++i) {
      const double u = self.grad[i];
      if (u == 0.0) continue;
      const double* row = jd + i * 6;
      for (int a = 0; a < 6; ++a) gp[a] += u * row[a];
    }
    testing::sabotage("reproject", gp);
    gb.accumulate(pose6, gp, 6);
  };
  return out;
}

namespace {

// Backward of the Jacobian-map op. Given upstream (ux,uy) per pixel and the
// forward inputs, accumulates into d(diff) and d(coords). The only nonzero
// second derivative of the bilinear kernel is the mixed term, whose
// per-channel coefficient uses the same >= sign convention.
void jacobian_backward(const Tensor& source, const CoordGrid& grid,
                       const std::vector<std::uint8_t>& mask, const Tensor& diff, double inv_n2,
                       const std::vector<double>& up, std::vector<double>& d_diff,
                       std::vector<double>& d_coords) {
  const int ch = source.dim(0), sh = source.dim(1), sw = source.dim(2);
  const int h = grid.height(), w = grid.width();
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const std::size_t plane_sz = static_cast<std::size_t>(sh) * sw;

  for (std::size_t p = 0; p < hw; ++p) {
    if (!mask[p]) continue;
    const double ux = up[p * 2];
    const double uy = up[p * 2 + 1];
    if (ux == 0.0 && uy == 0.0) continue;
    const double x = grid.coords.data[p * 2];
    const double y = grid.coords.data[p * 2 + 1];
    const AxisSupport ax = axis_support(x), ay = axis_support(y);
    const bool two_x = ax.frac > 0.0;
    const bool two_y = ay.frac > 0.0;

    double mixed_sum = 0.0;
    for (int k = 0; k < ch; ++k) {
      const double* plane = source.data.data() + static_cast<std::size_t>(k) * plane_sz;
      const double u00 = read(plane, sw, sh, sw, ax.i0, ay.i0);
      const double u10 = two_x ? read(plane, sw, sh, sw, ax.i0 + 1, ay.i0) : 0.0;
      const double u01 = two_y ? read(plane, sw, sh, sw, ax.i0, ay.i0 + 1) : 0.0;
      const double u11 = (two_x && two_y) ? read(plane, sw, sh, sw, ax.i0 + 1, ay.i0 + 1) : 0.0;

      double dx, dy, mixed;
      if (two_x)
        dx = (u10 - u00) * (1.0 - ay.frac) + (two_y ? (u11 - u01) * ay.frac : 0.0);
      else
        dx = u00 * (1.0 - ay.frac) + (two_y ? u01 * ay.frac : 0.0);
      if (two_y)
        dy = (u01 - u00) * (1.0 - ax.frac) + (two_x ? (u11 - u10) * ax.frac : 0.0);
      else
        dy = u00 * (1.0 - ax.frac) + (two_x ? u10 * ax.frac : 0.0);
      if (two_x && two_y)
        mixed = u11 - u10 - u01 + u00;
      else if (two_x)
        mixed = u10 - u00;  // sign(w>=y)=+1 on the single row
      else if (two_y)
        mixed = u01 - u00;
      else
        mixed = u00;

      // J = inv_n2 * diff_c * (dx, dy): linear in diff, mixed in coords.
      d_diff[static_cast<std::size_t>(k) * hw + p] += inv_n2 * (ux * dx + uy * dy);
      mixed_sum += diff.data[static_cast<std::size_t>(k) * hw + p] * mixed;
    }
    d_coords[p * 2] += inv_n2 * uy * mixed_sum;      // d(gy)/dx
    d_coords[p * 2 + 1] += inv_n2 * ux * mixed_sum;  // d(gx)/dy
  }
}

}  // namespace

WarpErrorVar warp_error_op(Graph& g, VarId coords, const Tensor& source, const Tensor& target,
                           const std::vector<std::uint8_t>& reproj_valid, int scale_factor) {
  auto grid = std::make_shared<CoordGrid>();
  grid->coords = g.value(coords);
  grid->scale_factor = scale_factor;
  grid->valid = reproj_valid;

  auto mask = std::make_shared<std::vector<std::uint8_t>>();
  Tensor recon_v = bilinear_sample(source, *grid, mask.get());

  WarpErrorVar out;
  out.mask = *mask;
  for (auto m : out.mask) out.valid_count += m;
  if (out.valid_count == 0)
    throw DegenerateFrameError("warp_error_op: no valid pixels after warping");

  auto src = std::make_shared<Tensor>(source);

  // Reconstruction node: gradients reach the coordinates through the
  // sampling sub-gradients.
  Graph::Node rn;
  rn.value = std::move(recon_v);
  VarId recon = g.append(std::move(rn));
  g.node(recon).backprop = [recon, coords, src, grid, mask](Graph& gb) {
    const auto& self = gb.node(recon);
    Tensor upstream(self.value.shape, self.grad);
    testing::sabotage("bilinear_sample", upstream.data.data());
    Tensor dc = sample_coord_gradients(*src, *grid, upstream, *mask);
    gb.accumulate(coords, dc.data.data(), dc.size());
  };
  out.reconstruction = recon;

  // diff = recon - target.
  const std::size_t n_el = g.value(recon).size();
  Tensor diff_v = g.value(recon);
  for (std::size_t i = 0; i < n_el; ++i) diff_v.data[i] -= target.data[i];
  Graph::Node dn;
  dn.value = std::move(diff_v);
  VarId diff = g.append(std::move(dn));
  g.node(diff).backprop = [diff, recon](Graph& gb) {
    const auto& self = gb.node(diff);
    gb.accumulate(recon, self.grad.data(), self.grad.size());
  };

  // Scalar error: mean over valid pixels of the channel-summed squares.
  const int ch = source.dim(0);
  const std::size_t hw = out.mask.size();
  const double inv_n = 1.0 / out.valid_count;
  double total = 0.0;
  {
    const Tensor& dv = g.value(diff);
    for (std::size_t p = 0; p < hw; ++p) {
      if (!out.mask[p]) continue;
      for (int k = 0; k < ch; ++k) {
        const double d = dv.data[static_cast<std::size_t>(k) * hw + p];
        total += d * d;
      }
    }
    total *= inv_n;
  }
  Graph::Node en;
  en.value = Tensor::scalar(total);
  VarId err = g.append(std::move(en));
  const double inv_n2 = 2.0 * inv_n;
  g.node(err).backprop = [err, diff, mask, inv_n2, ch, hw](Graph& gb) {
    const double gv = gb.node(err).grad[0];
    const Tensor& dv = gb.value(diff);
    std::vector<double> gd(dv.size(), 0.0);
    for (std::size_t p = 0; p < hw; ++p) {
      if (!(*mask)[p]) continue;
      for (int k = 0; k < ch; ++k) {
        const std::size_t i = static_cast<std::size_t>(k) * hw + p;
        gd[i] = gv * inv_n2 * dv.data[i];
      }
    }
    gb.accumulate(diff, gd.data(), gd.size());
  };
  out.error = err;

  // Jacobian map fed to the next level. Gradients flow back into both the
  // residual and the coordinates (mixed kernel term), so refinement levels
  // are differentiable end to end.
  {
    const Tensor& dv = g.value(diff);
    Tensor upstream(dv.shape);
    for (std::size_t p = 0; p < hw; ++p) {
      if (!out.mask[p]) continue;
      for (int k = 0; k < ch; ++k) {
        const std::size_t i = static_cast<std::size_t>(k) * hw + p;
        upstream.data[i] = inv_n2 * dv.data[i];
      }
    }
    Tensor jac_v = sample_coord_gradients(*src, *grid, upstream, out.mask);
    Graph::Node jn;
    jn.value = std::move(jac_v);
    VarId jac = g.append(std::move(jn));
    g.node(jac).backprop = [jac, diff, coords, src, grid, mask, inv_n2](Graph& gb) {
      const auto& self = gb.node(jac);
      std::vector<double> up = self.grad;
      testing::sabotage("error_jacobian", up.data());
      const Tensor& dv = gb.value(diff);
      std::vector<double> d_diff(dv.size(), 0.0);
      std::vector<double> d_coords(self.value.size(), 0.0);
      jacobian_backward(*src, *grid, *mask, dv, inv_n2, up, d_diff, d_coords);
      gb.accumulate(diff, d_diff.data(), d_diff.size());
      gb.accumulate(coords, d_coords.data(), d_coords.size());
    };
    out.jacobian = jac;
  }
  return out;
}

VarId jacobian_to_channels(Graph& g, VarId jac_hw2) {
  const Tensor& in = g.value(jac_hw2);
  if (in.rank() != 3 || in.dim(2) != 2)
    throw std::invalid_argument("jacobian_to_channels: expected [H,W,2]");
  const int h = in.dim(0), w = in.dim(1);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor out({1, 2, h, w});
  for (std::size_t p = 0; p < hw; ++p) {
    out.data[p] = in.data[p * 2];
    out.data[hw + p] = in.data[p * 2 + 1];
  }
  Graph::Node n;
  n.value = std::move(out);
  VarId id = g.append(std::move(n));
  g.node(id).backprop = [id, jac_hw2, hw](Graph& gb) {
    const auto& self = gb.node(id);
    std::vector<double> gi(hw * 2);
    for (std::size_t p = 0; p < hw; ++p) {
      gi[p * 2] = self.grad[p];
      gi[p * 2 + 1] = self.grad[hw + p];
    }
    gb.accumulate(jac_hw2, gi.data(), gi.size());
  };
  return id;
}

WarpResult snapshot_warp(const Graph& g, const WarpErrorVar& wv, const Tensor& target) {
  WarpResult res;
  res.reconstruction = g.value(wv.reconstruction);
  auto [map, total] = reconstruction_error(res.reconstruction, target, wv.mask);
  res.error_map = std::move(map);
  res.total_error = total;
  res.jacobian = g.value(wv.jacobian);
  res.valid_mask = wv.mask;
  res.valid_count = wv.valid_count;
  return res;
}

}  // namespace viol
