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

#include <deque>
#include <functional>
#include <vector>

#include "viol/conv.hpp"
#include "viol/params.hpp"
#include "viol/tensor.hpp"

namespace viol {

using VarId = int;

/// Reverse-mode tape. Ops append nodes in topological order; backward()
/// seeds the root with 1 and walks the tape in reverse, so nodes that do not
/// feed the root (e.g. losing hypothesis pathways) receive no gradient work
/// at all. One graph per sample; parameter gradients accumulate across
/// graphs until the optimizer consumes them.
class Graph {
 public:
  VarId constant(Tensor v);

  /// Like constant but gradients w.r.t. this node are retained and readable
  /// after backward().
  VarId leaf(Tensor v);

  const Tensor& value(VarId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Gradient of the last backward() root w.r.t. node `id`. Zeros if the
  /// node was never reached.
  std::vector<double> grad(VarId id) const;

  /// Root must be scalar (size 1).
  void backward(VarId root);

  // --- generic ops -------------------------------------------------------
  VarId conv2d(VarId x, const ConvLayer& layer);
  VarId relu(VarId x);
  VarId add(VarId a, VarId b);               // same shape, elementwise
  VarId add_n(const std::vector<VarId>& xs); // same shape, elementwise sum
  VarId scale(VarId x, double c);
  VarId reshape(VarId x, std::vector<int> shape);
  VarId concat2(VarId a, VarId b, int axis);
  VarId global_mean(VarId x);  // [B,C,H,W] -> [B,C]
  VarId weighted_sum(VarId x, std::vector<double> weights);  // scalar dot

  /// Scalar lambda * sum(|p|) over the given parameters. Backward adds
  /// lambda*sign(p) into each parameter gradient (0 at p == 0).
  VarId l1_penalty(const std::vector<Parameter*>& params, double lambda);

  // --- plumbing used by op implementations -------------------------------
  struct Node {
    Tensor value;
    std::vector<double> grad;  // lazily allocated
    bool grad_live = false;
    std::function<void(Graph&)> backprop;  // null for constants
  };

  Node& node(VarId id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(VarId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  VarId append(Node n);
  void accumulate(VarId id, const double* g, std::size_t n);
  void accumulate_at(VarId id, std::size_t offset, double g);

 private:
  std::deque<Node> nodes_;  // deque: stable addresses for recorded contexts
};

namespace testing {
/// When non-empty, the named op's backward pass perturbs one gradient value,
/// so gradient-check suites must flag that op. Used by the grad-check CLI
/// sabotage mode; empty in normal operation.
extern thread_local const char* sabotage_op;
bool sabotage(const char* op, double* slot);
}  // namespace testing

}  // namespace viol
