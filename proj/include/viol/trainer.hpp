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

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "viol/adam.hpp"
#include "viol/config.hpp"
#include "viol/data.hpp"
#include "viol/pipeline.hpp"

namespace viol {

/// Batch element indices for one iteration: a stateless function of
/// (seed, iteration), so resuming from a checkpoint replays the exact
/// sampling sequence.
std::vector<int> batch_indices(std::uint64_t seed, std::int64_t iteration, int batch_size,
                               int dataset_size);

/// Mean final-level reconstruction error over (up to max_samples of) a set.
double validation_error(const PoseEstimator& model, const DatasetReader& data, int max_samples);

/// Model parameters plus optimizer moments and step counter in one file.
void save_training_checkpoint(const std::string& path, const ParamStore& params,
                              const AdamState* adam);
/// Loads parameters by name (shape-checked) and, when adam is non-null, the
/// optimizer state. Returns the stored step count (0 if absent).
std::int64_t load_training_checkpoint(const std::string& path, ParamStore& params,
                                      AdamState* adam);

struct TrainResult {
  std::int64_t iterations_run = 0;
  double best_val = 0.0;
  std::int64_t best_val_iteration = -1;
  bool aborted_non_finite = false;
  int skipped_frames = 0;
  std::string best_checkpoint;
  std::string last_checkpoint;
};

/// Full training loop: per-iteration loss rows and one validation row per
/// val_interval go to `log` as "<iter>\t<kind>\t<value>" lines; the best
/// validation checkpoint and the latest checkpoint are kept under out_dir.
/// On a non-finite loss the run aborts with the last good checkpoint
/// retained. The iteration counter continues from adam.step_count(), so a
/// loaded checkpoint resumes bit-identically.
TrainResult train_loop(const RunConfig& cfg, const PoseEstimator& model, ParamStore& params,
                       AdamState& adam, const DatasetReader& train_data,
                       const DatasetReader* val_data, std::ostream& log,
                       const std::function<void(std::int64_t, double)>& progress = {});

}  // namespace viol
