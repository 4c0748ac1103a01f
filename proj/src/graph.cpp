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

#include "viol/graph.hpp"

#include <cmath>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace viol {

namespace testing {
thread_local const char* sabotage_op = "";

bool sabotage(const char* op, double* slot) {
  if (sabotage_op && *sabotage_op && std::strcmp(sabotage_op, op) == 0) {
    *slot += 1e-2 * (*slot == 0.0 ? 1.0 : *slot);
    return true;
  }
  return false;
}
}  // namespace testing

VarId Graph::append(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Graph::constant(Tensor v) {
  Node n;
  n.value = std::move(v);
  return append(std::move(n));
}

VarId Graph::leaf(Tensor v) {
  // Same as constant; leaves simply have their grads read back by callers.
  return constant(std::move(v));
}

std::vector<double> Graph::grad(VarId id) const {
  const Node& n = node(id);
  if (n.grad_live) return n.grad;
  return std::vector<double>(n.value.size(), 0.0);
}

void Graph::accumulate(VarId id, const double* g, std::size_t n) {
  Node& nd = node(id);
  if (!nd.grad_live) {
    nd.grad.assign(nd.value.size(), 0.0);
    nd.grad_live = true;
  }
  for (std::size_t i = 0; i < n; ++i) nd.grad[i] += g[i];
}

void Graph::accumulate_at(VarId id, std::size_t offset, double g) {
  Node& nd = node(id);
  if (!nd.grad_live) {
    nd.grad.assign(nd.value.size(), 0.0);
    nd.grad_live = true;
  }
  nd.grad[offset] += g;
}

void Graph::backward(VarId root) {
  Node& r = node(root);
  if (r.value.size() != 1) throw std::invalid_argument("backward root must be scalar");
  if (!r.grad_live) {
    r.grad.assign(1, 0.0);
    r.grad_live = true;
  }
  r.grad[0] = 1.0;
  for (VarId id = root; id >= 0; --id) {
    Node& n = node(id);
    if (n.grad_live && n.backprop) n.backprop(*this);
  }
}

VarId Graph::conv2d(VarId x, const ConvLayer& layer) {
  auto ctx = std::make_shared<Conv2dContext>();
  Tensor out = conv2d_forward(value(x), layer, ctx.get());
  Node n;
  n.value = std::move(out);
  VarId out_id = append(std::move(n));
  // The context points at the parent node's value; deque storage keeps that
  // address stable for the life of the graph.
  node(out_id).backprop = [x, out_id, ctx, &layer](Graph& g) {
    Node& self = g.node(out_id);
    Tensor upstream(self.value.shape, self.grad);
    testing::sabotage("conv2d", upstream.data.data());
    Tensor input_grad;
    conv2d_backward(*ctx, layer, upstream, &input_grad);
    g.accumulate(x, input_grad.data.data(), input_grad.size());
  };
  // Rebind the recorded input pointer to the graph-owned tensor.
  ctx->input = &node(x).value;
  return out_id;
}

VarId Graph::relu(VarId x) {
  const Tensor& in = value(x);
  Tensor out(in.shape);
  for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = in.data[i] > 0.0 ? in.data[i] : 0.0;
  Node n;
  n.value = std::move(out);
  VarId out_id = append(std::move(n));
  node(out_id).backprop = [x, out_id](Graph& g) {
    const Node& self = g.node(out_id);
    const Tensor& in = g.value(x);
    std::vector<double> gi(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) gi[i] = in.data[i] > 0.0 ? self.grad[i] : 0.0;
    testing::sabotage("relu", gi.data());
    g.accumulate(x, gi.data(), gi.size());
  };
  return out_id;
}

VarId Graph::add(VarId a, VarId b) { return add_n({a, b}); }

VarId Graph::add_n(const std::vector<VarId>& xs) {
  if (xs.empty()) throw std::invalid_argument("add_n: empty input list");
  Tensor out = value(xs[0]);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Tensor& t = value(xs[k]);
    check_same_shape(out, t, "add_n");
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += t.data[i];
  }
  Node n;
  n.value = std::move(out);
  VarId out_id = append(std::move(n));
  std::vector<VarId> parents = xs;
  node(out_id).backprop = [parents, out_id](Graph& g) {
    const Node& self = g.node(out_id);
    for (VarId p : parents) g.accumulate(p, self.grad.data(), self.grad.size());
  };
  return out_id;
}

VarId Graph::scale(VarId x, double c) {
  Tensor out = value(x);
  for (double& v : out.data) v *= c;
  Node n;
  n.value = std::move(out);
  VarId out_id = append(std::move(n));
  node(out_id).backprop = [x, c, out_id](Graph& g) {
    const Node& self = g.node(out_id);
    std::vector<double> gi(self.grad.size());
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] = c * self.grad[i];
    g.accumulate(x, gi.data(), gi.size());
  };
  return out_id;
}

VarId Graph::reshape(VarId x, std::vector<int> shape) {
  const Tensor& in = value(x);
  if (shape_numel(shape) != in.size())
    throw std::invalid_argument("reshape: element count mismatch " + shape_str(in.shape) +
                                " -> " + shape_str(shape));
  Tensor out(std::move(shape), in.data);
  Node n;
  n.value = std::move(out);
  VarId out_id = append(std::move(n));
  node(out_id).backprop = [x, out_id](Graph& g) {
    const Node& self = g.node(out_id);
    g.accumulate(x, self.grad.data(), self.grad.size());
  };
  return out_id;
}

VarId Graph::concat2(VarId a, VarId b, int axis) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != tb.rank()) throw std::invalid_argument("concat2: rank mismatch");
  for (int i = 0; i < ta.rank(); ++i)
    if (i != axis && ta.dim(i) != tb.dim(i))
      throw std::invalid_argument("concat2: non-concat dims differ at axis " + std::to_string(i));

  std::vector<int> oshape = ta.shape;
  oshape[static_cast<std::size_t>(axis)] += tb.dim(axis);

  // outer: product of dims before axis; inner: product after.
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(ta.dim(i));
  for (int i = axis + 1; i < ta.rank(); ++i) inner *= static_cast<std::size_t>(ta.dim(i));
  const std::size_t wa = static_cast<std::size_t>(ta.dim(axis)) * inner;
  const std::size_t wb = static_cast<std::size_t>(tb.dim(axis)) * inner;

  Tensor out(oshape);
  for (std::size_t o = 0; o < outer; ++o) {
    std::memcpy(out.data.data() + o * (wa + wb), ta.data.data() + o * wa, wa * sizeof(double));
    std::memcpy(out.data.data() + o * (wa + wb) + wa, tb.data.data() + o * wb,
                wb * sizeof(double));
  }
  Node n;
  n.value = std::move(out);
  VarId out_id = append(std::move(n));
  node(out_id).backprop = [a, b, outer, wa, wb, out_id](Graph& g) {
    const Node& self = g.node(out_id);
    std::vector<double> ga(outer * wa), gb(outer * wb);
    for (std::size_t o = 0; o < outer; ++o) {
      std::memcpy(ga.data() + o * wa, self.grad.data() + o * (wa + wb), wa * sizeof(double));
      std::memcpy(gb.data() + o * wb, self.grad.data() + o * (wa + wb) + wa,
                  wb * sizeof(double));
    }
    g.accumulate(a, ga.data(), ga.size());
    g.accumulate(b, gb.data(), gb.size());
  };
  return out_id;
}

VarId Graph::global_mean(VarId x) {
  const Tensor& in = value(x);
  if (in.rank() != 4) throw std::invalid_argument("global_mean: expected [B,C,H,W]");
  const int B = in.dim(0), C = in.dim(1);
  const std::size_t hw = static_cast<std::size_t>(in.dim(2)) * in.dim(3);
  Tensor out({B, C});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const double* p = in.data.data() + (static_cast<std::size_t>(b) * C + c) * hw;
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += p[i];
      out.data[static_cast<std::size_t>(b) * C + c] = acc / static_cast<double>(hw);
    }
  Node n;
  n.value = std::move(out);
  VarId out_id = append(std::move(n));
  node(out_id).backprop = [x, B, C, hw, out_id](Graph& g) {
    const Node& self = g.node(out_id);
    std::vector<double> gi(static_cast<std::size_t>(B) * C * hw);
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) {
        const double gv = self.grad[static_cast<std::size_t>(b) * C + c] / static_cast<double>(hw);
        double* p = gi.data() + (static_cast<std::size_t>(b) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) p[i] = gv;
      }
    g.accumulate(x, gi.data(), gi.size());
  };
  return out_id;
}

VarId Graph::weighted_sum(VarId x, std::vector<double> weights) {
  const Tensor& in = value(x);
  if (weights.size() != in.size())
    throw std::invalid_argument("weighted_sum: weight count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * in.data[i];
  Node n;
  n.value = Tensor::scalar(acc);
  VarId out_id = append(std::move(n));
  auto w = std::make_shared<std::vector<double>>(std::move(weights));
  node(out_id).backprop = [x, w, out_id](Graph& g) {
    const double gv = g.node(out_id).grad[0];
    std::vector<double> gi(w->size());
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] = gv * (*w)[i];
    g.accumulate(x, gi.data(), gi.size());
  };
  return out_id;
}

VarId Graph::l1_penalty(const std::vector<Parameter*>& params, double lambda) {
  double acc = 0.0;
  for (const Parameter* p : params)
    for (double v : p->value.data) acc += std::abs(v);
  Node n;
  n.value = Tensor::scalar(lambda * acc);
  VarId out_id = append(std::move(n));
  std::vector<Parameter*> ps = params;
  node(out_id).backprop = [ps, lambda, out_id](Graph& g) {
    const double gv = g.node(out_id).grad[0] * lambda;
    for (Parameter* p : ps)
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const double v = p->value.data[i];
        if (v > 0.0)
          p->value.grad[i] += gv;
        else if (v < 0.0)
          p->value.grad[i] -= gv;
      }
  };
  return out_id;
}

}  // namespace viol
