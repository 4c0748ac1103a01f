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

#include "viol/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace viol {

double AdamState::effective_lr(std::int64_t t) const {
  const std::int64_t k = cfg_.decay_interval > 0 ? t / cfg_.decay_interval : 0;
  return cfg_.lr * std::pow(cfg_.gamma, static_cast<double>(k));
}

AdamState::Moments& AdamState::moments_for(const Parameter& p) {
  Moments& m = moments_[p.name];
  if (m.m1.size() != p.value.size()) {
    m.m1.assign(p.value.size(), 0.0);
    m.m2.assign(p.value.size(), 0.0);
  }
  return m;
}

void AdamState::step(ParamStore& params, double grad_scale) {
  const std::int64_t t = ++step_;
  const double lr = effective_lr(t);
  const double b1 = cfg_.momentum1, b2 = cfg_.momentum2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));

  for (auto& up : params.items()) {
    Parameter& p = *up;
    Moments& m = moments_for(p);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.value.grad[i] * grad_scale;
      if (!std::isfinite(g))
        throw std::runtime_error("non-finite gradient in parameter " + p.name);
      m.m1[i] = b1 * m.m1[i] + (1.0 - b1) * g;
      m.m2[i] = b2 * m.m2[i] + (1.0 - b2) * g * g;
      const double mhat = m.m1[i] / bc1;
      const double vhat = m.m2[i] / bc2;
      p.value.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

std::vector<CheckpointEntry> AdamState::export_state(const ParamStore& params) const {
  std::vector<CheckpointEntry> out;
  for (const auto& up : params.items()) {
    auto it = moments_.find(up->name);
    if (it == moments_.end()) continue;
    Tensor m1(up->value.shape, it->second.m1);
    Tensor m2(up->value.shape, it->second.m2);
    out.push_back({up->name + ".m1", std::move(m1)});
    out.push_back({up->name + ".m2", std::move(m2)});
  }
  out.push_back({"adam.step", Tensor::scalar(static_cast<double>(step_))});
  return out;
}

void AdamState::import_state(const ParamStore& params, const std::vector<CheckpointEntry>& entries) {
  for (const auto& e : entries) {
    if (e.name == "adam.step") {
      step_ = static_cast<std::int64_t>(e.tensor.data[0]);
      continue;
    }
    auto ends_with = [&](const char* suf) {
      std::size_t n = std::char_traits<char>::length(suf);
      return e.name.size() > n && e.name.compare(e.name.size() - n, n, suf) == 0;
    };
    int which = ends_with(".m1") ? 1 : ends_with(".m2") ? 2 : 0;
    if (!which) continue;
    std::string base = e.name.substr(0, e.name.size() - 3);
    const Parameter* p = params.find(base);
    if (!p) continue;
    if (e.tensor.size() != p->value.size())
      throw std::runtime_error("moment size mismatch for " + e.name);
    Moments& m = moments_[base];
    if (m.m1.size() != p->value.size()) {
      m.m1.assign(p->value.size(), 0.0);
      m.m2.assign(p->value.size(), 0.0);
    }
    (which == 1 ? m.m1 : m.m2) = e.tensor.data;
  }
}

}  // namespace viol
