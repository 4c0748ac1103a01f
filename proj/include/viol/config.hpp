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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "viol/adam.hpp"
#include "viol/pipeline.hpp"

namespace viol {

/// Flat key=value configuration with [section] headers. Keys are stored
/// section-qualified ("train.lr") in first-appearance order, so
/// parse(serialize(parse(x))) == parse(x).
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text);
  static ConfigFile load(const std::string& path);
  std::string serialize() const;
  void save(const std::string& path) const;

  std::optional<std::string> get(const std::string& qualified_key) const;
  void set(const std::string& qualified_key, const std::string& value);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  bool operator==(const ConfigFile& o) const { return entries_ == o.entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Run settings. Defaults are the reference training recipe: batch 32,
/// 100,000 iterations, lr 2e-4, momenta 0.9/0.99, gamma 0.5, validation
/// every 500 iterations.
struct RunConfig {
  // data
  std::string train_data;
  std::string val_data;
  std::string test_data;
  std::string kitti_odometry, kitti_raw, kitti_depth;
  std::string out_dir = "out";
  // model
  double width_mult = 1.0;
  int hypotheses = 4;
  std::vector<int> level_factors = {8, 4, 2, 1, 1};
  std::vector<int> refinement_depths = {2, 3, 4, 5};
  double lambda = 1e-4;
  // train
  int batch_size = 32;
  std::int64_t iterations = 100000;
  double lr = 2e-4;
  double momentum1 = 0.9;
  double momentum2 = 0.99;
  double gamma = 0.5;
  std::int64_t decay_interval = 20000;
  int val_interval = 500;
  int val_max_samples = 0;  // 0 = whole validation set
  std::uint64_t seed = 42;

  static RunConfig from_file(const ConfigFile& f);
  ConfigFile to_file() const;

  ModelConfig model_config() const;
  AdamConfig adam_config() const;
};

}  // namespace viol
