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

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "viol/tensor.hpp"

namespace viol {

/// A named learnable tensor. The gradient buffer is always allocated and is
/// accumulated into (+=) by backward passes; the owner zeroes it between
/// optimizer steps.
struct Parameter {
  std::string name;
  Tensor value;

  Parameter(std::string n, std::vector<int> shape) : name(std::move(n)), value(std::move(shape)) {
    value.alloc_grad();
  }
};

/// Ordered registry of parameters. Order is creation order and is part of the
/// determinism contract (optimizer walks parameters in this order).
class ParamStore {
 public:
  Parameter& create(const std::string& name, std::vector<int> shape);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  const std::vector<std::unique_ptr<Parameter>>& items() const { return items_; }
  std::size_t count() const { return items_.size(); }
  std::size_t total_values() const;

  void zero_grads();

  /// All bias parameters (name ends in ".bias"), in creation order.
  std::vector<Parameter*> biases();

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
  std::unordered_map<std::string, Parameter*> index_;
};

/// One named tensor inside a checkpoint file.
struct CheckpointEntry {
  std::string name;
  Tensor tensor;
};

// Checkpoint container: little-endian, header (magic "VIOL", version u32,
// entry count u32) followed by per-entry records (name length u32, UTF-8
// name, rank u32, dims u32 each, raw f64 data).
void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::string& path);

}  // namespace viol
