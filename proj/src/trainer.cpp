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

#include "viol/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <ostream>

#include "viol/errors.hpp"

namespace fs = std::filesystem;

namespace viol {

std::vector<int> batch_indices(std::uint64_t seed, std::int64_t iteration, int batch_size,
                               int dataset_size) {
  Rng rng = substream(seed, "shuffle", static_cast<std::uint64_t>(iteration));
  std::vector<int> out(static_cast<std::size_t>(batch_size));
  for (auto& v : out) v = rng.uniform_int(dataset_size);
  return out;
}

double validation_error(const PoseEstimator& model, const DatasetReader& data, int max_samples) {
  const int n = max_samples > 0 ? std::min(max_samples, data.size()) : data.size();
  double sum = 0.0;
  int counted = 0;
  for (int i = 0; i < n; ++i) {
    try {
      InferenceResult r = model.infer(data.get(i));
      sum += r.traces.back().warp.total_error;
      ++counted;
    } catch (const DegenerateFrameError&) {
    }
  }
  return counted ? sum / counted : 0.0;
}

void save_training_checkpoint(const std::string& path, const ParamStore& params,
                              const AdamState* adam) {
  std::vector<CheckpointEntry> entries;
  for (const auto& p : params.items()) entries.push_back({p->name, p->value});
  if (adam) {
    auto extra = adam->export_state(params);
    entries.insert(entries.end(), std::make_move_iterator(extra.begin()),
                   std::make_move_iterator(extra.end()));
  }
  write_checkpoint(path, entries);
}

std::int64_t load_training_checkpoint(const std::string& path, ParamStore& params,
                                      AdamState* adam) {
  const auto entries = read_checkpoint(path);
  std::int64_t step = 0;
  for (const auto& e : entries) {
    if (e.name == "adam.step") {
      step = static_cast<std::int64_t>(e.tensor.data[0]);
      continue;
    }
    if (e.name.size() > 3 &&
        (e.name.compare(e.name.size() - 3, 3, ".m1") == 0 ||
         e.name.compare(e.name.size() - 3, 3, ".m2") == 0) &&
        !params.find(e.name))
      continue;  // optimizer moments, handled below
    Parameter* p = params.find(e.name);
    if (!p) continue;  // tolerate extra entries
    if (p->value.shape != e.tensor.shape)
      throw DataError("checkpoint shape mismatch for " + e.name + ": " +
                      shape_str(e.tensor.shape) + " vs " + shape_str(p->value.shape));
    p->value.data = e.tensor.data;
  }
  if (adam) adam->import_state(params, entries);
  return step;
}

TrainResult train_loop(const RunConfig& cfg, const PoseEstimator& model, ParamStore& params,
                       AdamState& adam, const DatasetReader& train_data,
                       const DatasetReader* val_data, std::ostream& log,
                       const std::function<void(std::int64_t, double)>& progress) {
  fs::create_directories(cfg.out_dir);
  TrainResult result;
  result.best_checkpoint = cfg.out_dir + "/ckpt_best.bin";
  result.last_checkpoint = cfg.out_dir + "/ckpt_last.bin";
  result.best_val = std::numeric_limits<double>::infinity();

  const std::int64_t start = adam.step_count();
  for (std::int64_t iter = start + 1; iter <= cfg.iterations; ++iter) {
    const std::vector<int> idx =
        batch_indices(cfg.seed, iter, cfg.batch_size, train_data.size());
    double loss_sum = 0.0;
    int used = 0;
    for (int i : idx) {
      try {
        Sample s = train_data.get(i);
        Graph g;
        const auto traces = model.forward(g, s);
        const VarId loss = model.total_loss(g, traces);
        loss_sum += g.value(loss).data[0];
        g.backward(loss);
        ++used;
      } catch (const DegenerateFrameError&) {
        ++result.skipped_frames;
      }
    }
    const double loss = used ? loss_sum / used : std::numeric_limits<double>::quiet_NaN();
    if (used == 0 || !std::isfinite(loss)) {
      log << iter << "\tabort\t" << loss << "\n";
      result.aborted_non_finite = true;
      result.iterations_run = iter - start - 1;
      return result;
    }
    adam.step(params, 1.0 / used);
    params.zero_grads();
    log << iter << "\tloss\t" << loss << "\n";
    if (progress) progress(iter, loss);

    if (cfg.val_interval > 0 && iter % cfg.val_interval == 0) {
      double val = loss;
      if (val_data) val = validation_error(model, *val_data, cfg.val_max_samples);
      log << iter << "\tval\t" << val << "\n";
      save_training_checkpoint(result.last_checkpoint, params, &adam);
      if (val < result.best_val) {
        result.best_val = val;
        result.best_val_iteration = iter;
        save_training_checkpoint(result.best_checkpoint, params, &adam);
      }
    }
    result.iterations_run = iter - start;
  }
  save_training_checkpoint(result.last_checkpoint, params, &adam);
  if (result.best_val_iteration < 0) {
    save_training_checkpoint(result.best_checkpoint, params, &adam);
    result.best_val_iteration = adam.step_count();
  }
  return result;
}

}  // namespace viol
