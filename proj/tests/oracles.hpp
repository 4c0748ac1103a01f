// Test-only reference implementations, kept independent of the library's
// computation paths: direct nested-loop convolution, flat-loop reductions,
// and central finite differences.
#pragma once

#include <cmath>
#include <functional>

#include "viol/conv.hpp"
#include "viol/tensor.hpp"

namespace oracles {

// Plain six-nested-loop cross-correlation with zero padding.
inline viol::Tensor naive_conv2d(const viol::Tensor& input, const viol::Tensor& kernel,
                                 const viol::Tensor& bias, int sh, int sw, int ph, int pw) {
  const int b = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const int oh = (h + 2 * ph - kh) / sh + 1;
  const int ow = (w + 2 * pw - kw) / sw + 1;
  viol::Tensor out({b, co, oh, ow});
  for (int bi = 0; bi < b; ++bi)
    for (int oc = 0; oc < co; ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias.data[static_cast<std::size_t>(oc)];
          for (int ic = 0; ic < ci; ++ic)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int y = oy * sh - ph + ky;
                const int x = ox * sw - pw + kx;
                if (y < 0 || y >= h || x < 0 || x >= w) continue;
                acc += input.at({bi, ic, y, x}) * kernel.at({oc, ic, ky, kx});
              }
          out.at({bi, oc, oy, ox}) = acc;
        }
  return out;
}

inline double central_diff(const std::function<double()>& f, double* slot, double h = 1e-6) {
  const double x0 = *slot;
  *slot = x0 + h;
  const double fp = f();
  *slot = x0 - h;
  const double fm = f();
  *slot = x0;
  return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracles
