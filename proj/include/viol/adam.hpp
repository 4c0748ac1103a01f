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
#include <string>
#include <unordered_map>

#include "viol/params.hpp"

namespace viol {

struct AdamConfig {
  double lr = 2e-4;
  double momentum1 = 0.9;
  double momentum2 = 0.99;
  double eps = 1e-8;
  double gamma = 0.5;            // exponential lr decay multiplier
  std::int64_t decay_interval = 20000;  // steps between decays
};

/// Adam with bias correction and a stepwise-exponential learning rate:
/// effective lr at update t is lr * gamma^floor(t / decay_interval).
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return step_; }
  double effective_lr(std::int64_t t) const;

  /// One update over every parameter in the store, consuming param.value.grad
  /// scaled by grad_scale (e.g. 1/batch). Gradients are not zeroed here.
  /// Throws std::runtime_error naming the parameter on non-finite gradients.
  void step(ParamStore& params, double grad_scale = 1.0);

  /// Moment buffers and the step counter as checkpoint entries
  /// ("<name>.m1"/"<name>.m2", "adam.step").
  std::vector<CheckpointEntry> export_state(const ParamStore& params) const;
  void import_state(const ParamStore& params, const std::vector<CheckpointEntry>& entries);

 private:
  struct Moments {
    std::vector<double> m1, m2;
  };
  Moments& moments_for(const Parameter& p);

  AdamConfig cfg_;
  std::int64_t step_ = 0;
  std::unordered_map<std::string, Moments> moments_;
};

}  // namespace viol
