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

#include <string>
#include <vector>

#include "viol/data.hpp"
#include "viol/graph.hpp"
#include "viol/warp.hpp"

namespace viol {

/// Per-level schedule entry. Downsample factors default to 8,4,2,1,1 for
/// levels 0-4; refinement depth is the number of extra conv layers past the
/// three-layer Jacobian encoder.
struct LevelConfig {
  int index = 0;
  int factor = 1;
  int refinement_depth = 0;
};

struct ModelConfig {
  double width_mult = 1.0;
  int hypotheses = 4;
  double lambda = 1e-4;   // L1 bias penalty weight
  double eps_z = 1e-3;    // behind-camera cutoff, meters
  double head_init_scale = 0.01;  // pose-emitting layers start near zero
  std::vector<int> factors = {8, 4, 2, 1, 1};
  std::vector<int> extra_depth = {2, 3, 4, 5};  // levels 1..4

  std::vector<LevelConfig> schedule() const;
};

/// Everything recorded about one level of one forward pass.
struct LevelTrace {
  int level = 0;
  int factor = 1;
  EulerPose pose;       // accumulated six-vector after this level
  PoseTransform theta;
  WarpResult warp;

  VarId pose_id = -1;      // [6]
  VarId error_id = -1;     // scalar
  VarId jacobian_id = -1;  // [H,W,2]

  // Final level only.
  int winner_index = -1;
  std::vector<EulerPose> hyp_poses;
  std::vector<double> hyp_errors;
  std::vector<WarpResult> hyp_warps;
  std::vector<VarId> hyp_error_ids;
};

/// Inputs downsampled per level factor, with intrinsics scaled to match.
struct PreparedLevel {
  int factor = 1;
  Tensor source;  // [3,h,w]
  Tensor target;
  Tensor depth;   // [h,w]
  CameraIntrinsics k;
};
struct PreparedSample {
  std::vector<PreparedLevel> pyramids;  // unique factors
  ImuWindow imu;
  const PreparedLevel& at_factor(int factor) const;
};

struct InferenceResult {
  EulerPose pose;
  PoseTransform theta;
  int winner_index = -1;
  std::vector<LevelTrace> traces;
};

/// The five-level hierarchical estimator: level 0 integrates the IMU window
/// into an initial pose, levels 1-3 refine it through convolutions over the
/// previous level's error Jacobian at increasing resolution, and the final
/// level selects among hypothesis pathways by lowest reconstruction error.
class PoseEstimator {
 public:
  PoseEstimator(ParamStore& store, ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() const { return *store_; }

  /// Xavier-uniform weights from named substreams of `seed`; hypothesis
  /// pathways draw from independent streams so they differentiate.
  void init_weights(std::uint64_t seed) const;

  PreparedSample prepare(const Sample& s) const;

  LevelTrace run_level0(Graph& g, const PreparedSample& ps) const;

  /// One reproject+warp+error unit downstream of an arbitrary [6] pose node.
  /// The building block of every level; exposed for targeted tests.
  LevelTrace warp_level(Graph& g, VarId pose6, int level, int factor,
                        const PreparedSample& ps) const;
  LevelTrace run_refinement_level(Graph& g, const LevelTrace& prev, const LevelConfig& cfg,
                                  const PreparedSample& ps) const;
  LevelTrace run_final_level(Graph& g, const LevelTrace& prev, const PreparedSample& ps) const;

  /// Sum of per-level errors (winner only at the final level) plus the
  /// weighted L1 penalty over every bias term.
  VarId total_loss(Graph& g, const std::vector<LevelTrace>& traces) const;

  /// Levels 0..4 in order. The graph stays alive for backward().
  std::vector<LevelTrace> forward(Graph& g, const Sample& s) const;

  /// Runs the full hierarchy including the Jacobian computations (the same
  /// path as training; no optimizer state exists here).
  InferenceResult infer(const Sample& s) const;

 private:
  class RefineNet {
   public:
    RefineNet() = default;
    RefineNet(ParamStore& store, const std::string& prefix, int extra_depth, double width_mult);
    void init_weights(Rng& rng, double head_gain) const;
    VarId forward(Graph& g, VarId jac_chw) const;  // [1,2,h,w] -> [6]

   private:
    std::vector<ConvLayer> convs_;
    ConvLayer head_;
  };

  ParamStore* store_;
  ModelConfig cfg_;
  ImuFrontend imu_;
  std::vector<RefineNet> refine_;  // levels 1..3
  std::vector<RefineNet> hyp_;     // final-level pathways
};

/// Per-frame diagnostic line: level index, E_i, pose six-vector, winner
/// index, tab-separated.
std::string format_level_diagnostics(const std::vector<LevelTrace>& traces);

}  // namespace viol
