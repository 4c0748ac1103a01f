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
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "viol/errors.hpp"
#include "viol/geometry.hpp"
#include "viol/imu_frontend.hpp"
#include "viol/rng.hpp"
#include "viol/tensor.hpp"

namespace viol {

/// One training exemplar: RGB-D source, RGB target, IMU window, intrinsics.
struct Sample {
  Tensor source_rgb;    // [3,H,W] in [0,1]
  Tensor source_depth;  // [H,W] meters, <= 0 marks invalid
  Tensor target_rgb;    // [3,H,W]
  ImuWindow imu;
  CameraIntrinsics k;
  std::string sequence;
  int frame = 0;

  bool has_gt = false;  // synthetic data carries the true motion
  EulerPose gt_motion;
  std::array<double, 3> gt_v0{0, 0, 0};

  void validate() const;
};

/// KITTI odometry split: train on 00-08 excluding 03, test on 09-10, with a
/// validation fraction held out of train.
struct SplitSpec {
  std::vector<int> train = {0, 1, 2, 4, 5, 6, 7, 8};
  std::vector<int> test = {9, 10};
  double validation_fraction = 0.05;
};

/// Deterministic frame-level holdout: exactly floor(fraction*n) indices go
/// to validation, the rest to train, disjoint by construction.
void split_validation(int n_frames, double fraction, std::uint64_t seed,
                      std::vector<int>* train_idx, std::vector<int>* val_idx);

// --- image preprocessing ---------------------------------------------------

constexpr int kRawWidth = 1241;
constexpr int kRawHeight = 376;
constexpr int kCropHeight = 224;
constexpr int kNetWidth = 480;
constexpr int kNetHeight = 128;

/// Bilinear resize of [C,H,W]; pixel centers at (i+0.5)*scale-0.5, edges
/// clamped. Constant inputs stay constant.
Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);

/// Raw camera frame (values 0..255) -> [3,128,480] in [0,1]: resize to
/// 376x1241 when needed, keep the bottom 224 rows, resize to 128x480,
/// divide by 255.
Tensor preprocess_image(const Tensor& raw);

/// Intrinsics for the preprocessed frame given the raw-image intrinsics.
CameraIntrinsics preprocess_intrinsics(const CameraIntrinsics& raw);

// --- IMU windows -------------------------------------------------------------

struct ImuRecord {
  double t = 0.0;                      // seconds
  std::array<double, 3> w{0, 0, 0};    // angular rate, rad/s
  std::array<double, 3> a{0, 0, 0};    // linear acceleration, m/s^2
};

/// Selects the 20 rows nearest the 100 Hz grid spanning t_source-0.09 s
/// through t_source+0.10 s (10 rows at/before the source frame, 10 after).
/// A sample missing mid-window repeats its nearest neighbor and sets
/// gap_filled; a gap wider than 15 ms raises DegenerateFrameError.
ImuWindow build_imu_window(const std::vector<ImuRecord>& stream, double t_source);

// --- synthetic scenes --------------------------------------------------------

struct SyntheticConfig {
  int width = 192;
  int height = 64;
  int planes = 3;
  double depth_min = 2.0;
  double depth_max = 8.0;
  // Motion distribution for sample_motion().
  double rot_range = 0.02;        // rad, uniform per axis
  double trans_range_xy = 0.04;   // m, uniform
  double tz_min = 0.06, tz_max = 0.22;  // forward-dominant motion
  std::array<double, 3> v0_sigma{0, 0, 0};  // initial-velocity randomization
  double imu_noise = 0.0;         // additive white noise std
  double min_in_frame = 0.8;      // reject motions warping more than 20% out

  CameraIntrinsics intrinsics() const;
};

struct SyntheticSample {
  Sample sample;
  EulerPose motion;
  std::array<double, 3> v0{0, 0, 0};
};

/// Renders a textured multi-plane scene (piecewise-constant depth bands,
/// smooth procedural texture) at two poses separated by `motion`; the IMU
/// window is the constant-rate/constant-acceleration profile consistent with
/// the motion over 0.1 s starting from velocity v0, plus optional noise.
/// Throws std::invalid_argument when the motion pushes more than
/// 1-min_in_frame of pixels out of frame.
SyntheticSample generate_synthetic(std::uint64_t scene_seed, const EulerPose& motion,
                                   const CameraIntrinsics& k, const SyntheticConfig& cfg,
                                   const std::array<double, 3>& v0 = {0, 0, 0});

EulerPose sample_motion(Rng& rng, const SyntheticConfig& cfg);
std::array<double, 3> sample_v0(Rng& rng, const SyntheticConfig& cfg);

/// Rotation-vector exponential/log on SO(3); used by the IMU synthesis and
/// its closed-form oracle.
Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w);
Eigen::Vector3d log_so3(const Eigen::Matrix3d& r);

// --- dataset containers ------------------------------------------------------

/// Single-file binary container with a JSON sidecar index. Pixel payloads
/// are u8 (+u16 depth, KITTI convention value/256 m) or f32 per file.
class DatasetWriter {
 public:
  DatasetWriter(const std::string& path_prefix, bool f32_pixels);
  ~DatasetWriter();
  void add(const Sample& s);
  void finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path_prefix);
  ~DatasetReader();
  int size() const;
  int width() const;
  int height() const;
  Sample get(int i) const;  // thread-safe

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Bounded single-producer prefetch queue over a DatasetReader; emits
/// samples for a fixed index order.
class Prefetcher {
 public:
  Prefetcher(const DatasetReader& reader, std::vector<int> order, int capacity = 16);
  ~Prefetcher();
  Sample next();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// --- KITTI layout ------------------------------------------------------------

struct KittiPaths {
  std::string odometry_root;  // <root>/sequences/NN/{image_2,times.txt,calib.txt}
  std::string raw_root;       // <root>/<date>/<date>_drive_NNNN_{sync,extract}/...
  std::string depth_root;     // <root>/NN/%06d.png, 16-bit, value/256 = meters
};

/// Odometry sequence -> raw drive and frame range (start..end inclusive).
struct RawMapping {
  std::string date;
  std::string drive;
  int start = 0;
  int end = 0;
};
const std::map<int, RawMapping>& kitti_raw_mapping();

CameraIntrinsics parse_kitti_calib(const std::string& calib_path, int image_width,
                                   int image_height);
std::vector<double> load_kitti_times(const std::string& times_path);
std::vector<double> load_kitti_timestamps(const std::string& timestamps_path);
std::vector<ImuRecord> load_oxts_stream(const std::string& oxts_dir);

struct KittiSequence {
  int sequence = 0;
  int frame_count = 0;
  CameraIntrinsics k;                 // preprocessed intrinsics
  std::vector<double> frame_times;    // absolute seconds per frame
  std::vector<std::string> image_paths;
  std::vector<std::string> depth_paths;
  std::vector<ImuRecord> imu;
};
KittiSequence open_kitti_sequence(const KittiPaths& paths, int sequence);

/// Loads and preprocesses the (frame, frame+1) pair; throws
/// DegenerateFrameError when the IMU window cannot be built.
Sample load_kitti_pair(const KittiSequence& seq, int frame);

/// Result of a container-building pass over one sequence.
struct PrepareStats {
  int written = 0;
  std::vector<int> skipped_frames;
};
PrepareStats prepare_kitti_sequence(const KittiPaths& paths, int sequence,
                                    const std::string& out_prefix);

}  // namespace viol
