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

#include <array>
#include <map>
#include <string>
#include <vector>

#include "viol/geometry.hpp"

namespace viol {

/// Chain of world-from-camera transforms.
struct Trajectory {
  std::vector<PoseTransform> poses;
  std::vector<double> timestamps;  // strictly increasing; defaults to 0,1,2,...

  std::size_t size() const { return poses.size(); }
  Eigen::Vector3d position(std::size_t i) const { return poses[i].translation(); }
};

/// T_0 = I, T_k = T_{k-1} * rel_k. Rejects invariant-violating poses naming
/// the offending index.
Trajectory accumulate(const std::vector<PoseTransform>& relative_poses);

/// Inverse of accumulate: rel_k = T_{k-1}^-1 * T_k.
std::vector<PoseTransform> trajectory_to_relative(const Trajectory& t);

struct LengthErrors {
  int count = 0;
  double t_rel_percent = 0.0;   // mean translational error / length, percent
  double r_rel_deg_per_100m = 0.0;
};

struct MetricReport {
  double t_rel_percent = 0.0;
  double r_rel_deg_per_100m = 0.0;
  std::map<int, LengthErrors> per_length;  // keys 100..800; absent = too short
  int segment_count = 0;
};

/// Segment-relative errors over path lengths 100..800 m measured along the
/// ground truth, every frame serving as a segment start.
MetricReport kitti_relative_errors(const Trajectory& est, const Trajectory& gt);

/// Lag k maximizing the normalized cross-correlation of the rotational
/// acceleration norms (rates differenced once), so that est[i+k] aligns with
/// gt[i]. Ties break toward the smallest |lag|. Throws on constant series.
int temporal_align(const std::vector<Eigen::Vector3d>& est_rates,
                   const std::vector<Eigen::Vector3d>& gt_rates);

/// Per-frame body angular rates from consecutive orientations (unit dt).
std::vector<Eigen::Vector3d> trajectory_angular_rates(const Trajectory& t);

struct AlignmentResult {
  Trajectory aligned;
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

/// Closed-form least-squares rigid (optionally similarity) alignment fit on
/// the first `fraction` of positions and applied to the whole estimate.
/// Throws on fewer than 3 points or a degenerate (collinear) window.
AlignmentResult align_6dof_scale(const Trajectory& est, const Trajectory& gt, double fraction,
                                 bool with_scale);

/// Translation estimates for one frame at every level plus the final-level
/// hypothesis pathway outputs.
struct FrameLevelPoses {
  std::vector<Eigen::Vector3d> level_translation;  // one per level
  std::vector<Eigen::Vector3d> hyp_translation;    // final level pathways
};

struct PerLevelStats {
  std::vector<double> level_rmse;
  std::vector<double> hyp_rmse;
  std::array<double, 3> hyp_error_variance{0, 0, 0};  // per axis, frame-averaged
};

PerLevelStats per_level_rmse(const std::vector<FrameLevelPoses>& frames,
                             const std::vector<Eigen::Vector3d>& gt_translation);

// --- file formats ------------------------------------------------------------

/// KITTI pose format: 12 floats per line, row-major 3x4. Malformed input
/// raises DataError with the 1-based line number.
Trajectory load_trajectory_kitti(const std::string& path);
void save_trajectory_kitti(const std::string& path, const Trajectory& t);

void write_metric_csv(const std::string& path, const MetricReport& report);

/// Top-down (x,z) plot of both trajectories.
void write_trajectory_svg(const std::string& path, const Trajectory& est, const Trajectory& gt);

}  // namespace viol
