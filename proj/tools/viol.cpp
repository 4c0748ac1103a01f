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

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "viol/config.hpp"
#include "viol/data.hpp"
#include "viol/errors.hpp"
#include "viol/eval.hpp"
#include "viol/gradcheck.hpp"
#include "viol/graph.hpp"
#include "viol/pipeline.hpp"
#include "viol/trainer.hpp"

namespace fs = std::filesystem;
using namespace viol;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

RunConfig load_run_config(const std::string& config_path) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = RunConfig::from_file(ConfigFile::load(config_path));
  if (const char* root = std::getenv("VIOL_DATASET_ROOT")) {
    // Environment override for the dataset root.
    if (cfg.kitti_odometry.empty()) cfg.kitti_odometry = std::string(root) + "/odometry";
    if (cfg.kitti_raw.empty()) cfg.kitti_raw = std::string(root) + "/raw";
    if (cfg.kitti_depth.empty()) cfg.kitti_depth = std::string(root) + "/depth";
  }
  return cfg;
}

int cmd_prepare(const std::string& config_path, int sequence, const std::string& out_prefix) {
  RunConfig cfg = load_run_config(config_path);
  KittiPaths paths{cfg.kitti_odometry, cfg.kitti_raw, cfg.kitti_depth};
  PrepareStats stats = prepare_kitti_sequence(paths, sequence, out_prefix);
  std::cout << "sequence " << sequence << ": wrote " << stats.written << " samples to "
            << out_prefix << ".bin";
  if (!stats.skipped_frames.empty()) {
    std::cout << " (skipped frames:";
    for (int f : stats.skipped_frames) std::cout << " " << f;
    std::cout << ")";
  }
  std::cout << "\n";
  return 0;
}

int cmd_synth(const std::string& out_prefix, int count, std::uint64_t seed, int width, int height,
              double v0_sigma_z, double imu_noise, double val_fraction) {
  SyntheticConfig scfg;
  scfg.width = width;
  scfg.height = height;
  scfg.v0_sigma = {0.0, 0.0, v0_sigma_z};
  scfg.imu_noise = imu_noise;
  const CameraIntrinsics k = scfg.intrinsics();

  const int n_val = static_cast<int>(count * val_fraction);
  const int n_train = count - n_val;
  Rng motion_rng = substream(seed, "synth/motion");
  Rng v0_rng = substream(seed, "synth/v0");

  auto emit = [&](const std::string& prefix, int n, std::uint64_t salt) {
    DatasetWriter writer(prefix, /*f32_pixels=*/true);
    int written = 0;
    for (int i = 0; written < n; ++i) {
      const EulerPose motion = sample_motion(motion_rng, scfg);
      const auto v0 = sample_v0(v0_rng, scfg);
      try {
        SyntheticSample s =
            generate_synthetic(substream_seed(seed, "synth/scene", salt + static_cast<std::uint64_t>(i)),
                               motion, k, scfg, v0);
        writer.add(s.sample);
        ++written;
      } catch (const std::invalid_argument&) {
        // excessive motion draw; resample
      }
    }
    writer.finish();
    std::cout << "wrote " << n << " samples to " << prefix << ".bin\n";
  };
  emit(out_prefix, n_train, 0);
  if (n_val > 0) emit(out_prefix + "_val", n_val, 1u << 20);
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& resume,
              std::int64_t iterations_override) {
  RunConfig cfg = load_run_config(config_path);
  if (iterations_override > 0) cfg.iterations = iterations_override;
  if (cfg.train_data.empty()) {
    std::cerr << "train: config must set data.train\n";
    return kExitUsage;
  }
  DatasetReader train_data(cfg.train_data);
  std::unique_ptr<DatasetReader> val_data;
  if (!cfg.val_data.empty()) val_data = std::make_unique<DatasetReader>(cfg.val_data);

  ParamStore store;
  PoseEstimator model(store, cfg.model_config());
  AdamState adam(cfg.adam_config());
  if (!resume.empty())
    load_training_checkpoint(resume, store, &adam);
  else
    model.init_weights(cfg.seed);

  fs::create_directories(cfg.out_dir);
  std::ofstream log(cfg.out_dir + "/train_log.tsv", resume.empty() ? std::ios::trunc : std::ios::app);
  TrainResult result = train_loop(cfg, model, store, adam, train_data, val_data.get(), log,
                                  [](std::int64_t iter, double loss) {
                                    if (iter % 100 == 0)
                                      std::cout << "iter " << iter << " loss " << loss << "\n";
                                  });
  std::cout << "ran " << result.iterations_run << " iterations; best val " << result.best_val
            << " at iteration " << result.best_val_iteration << "\n";
  if (result.aborted_non_finite) {
    std::cerr << "train: aborted on non-finite loss; last good checkpoint: "
              << result.last_checkpoint << "\n";
    return kExitNumeric;
  }
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& data_prefix,
              const std::string& out_dir, const std::string& config_path) {
  RunConfig cfg = load_run_config(config_path);
  DatasetReader data(data_prefix);

  ParamStore store;
  PoseEstimator model(store, cfg.model_config());
  load_training_checkpoint(checkpoint, store, nullptr);

  fs::create_directories(out_dir);
  std::ofstream diag(out_dir + "/diagnostics.tsv", std::ios::trunc);
  std::ofstream hyps(out_dir + "/hypotheses.tsv", std::ios::trunc);

  std::vector<PoseTransform> rel;
  std::vector<int> winner_hist(static_cast<std::size_t>(cfg.hypotheses), 0);
  std::vector<int> missing;
  std::vector<FrameLevelPoses> frame_poses;
  std::vector<Eigen::Vector3d> gt_translations;
  bool all_gt = true;

  for (int i = 0; i < data.size(); ++i) {
    Sample s = data.get(i);
    try {
      InferenceResult r = model.infer(s);
      rel.push_back(r.theta);
      ++winner_hist[static_cast<std::size_t>(r.winner_index)];
      diag << "# frame " << i << "\n" << format_level_diagnostics(r.traces);
      hyps << i;
      for (const auto& hp : r.traces.back().hyp_poses)
        hyps << "\t" << hp.tx << "\t" << hp.ty << "\t" << hp.tz;
      hyps << "\n";

      if (s.has_gt) {
        FrameLevelPoses fp;
        for (const auto& t : r.traces)
          fp.level_translation.emplace_back(t.pose.tx, t.pose.ty, t.pose.tz);
        for (const auto& hp : r.traces.back().hyp_poses)
          fp.hyp_translation.emplace_back(hp.tx, hp.ty, hp.tz);
        frame_poses.push_back(std::move(fp));
        gt_translations.emplace_back(s.gt_motion.tx, s.gt_motion.ty, s.gt_motion.tz);
      } else {
        all_gt = false;
      }
    } catch (const DegenerateFrameError&) {
      missing.push_back(i);
      rel.push_back(PoseTransform{});  // identity keeps the chain aligned
      all_gt = false;
    }
  }

  Trajectory traj = accumulate(rel);
  save_trajectory_kitti(out_dir + "/poses.txt", traj);

  std::ofstream wh(out_dir + "/winner_histogram.txt", std::ios::trunc);
  std::cout << "winner histogram:";
  for (std::size_t m = 0; m < winner_hist.size(); ++m) {
    wh << m << "\t" << winner_hist[m] << "\n";
    std::cout << " " << winner_hist[m];
  }
  std::cout << "\n";

  if (all_gt && !frame_poses.empty()) {
    const PerLevelStats stats = per_level_rmse(frame_poses, gt_translations);
    std::ofstream csv(out_dir + "/per_level_rmse.csv", std::ios::trunc);
    csv << "level,rmse_m\n";
    for (std::size_t l = 0; l < stats.level_rmse.size(); ++l)
      csv << l << "," << stats.level_rmse[l] << "\n";
    for (std::size_t m = 0; m < stats.hyp_rmse.size(); ++m)
      csv << "hyp" << m << "," << stats.hyp_rmse[m] << "\n";
    csv << "var_x," << stats.hyp_error_variance[0] << "\n";
    csv << "var_y," << stats.hyp_error_variance[1] << "\n";
    csv << "var_z," << stats.hyp_error_variance[2] << "\n";
  }

  if (!missing.empty()) {
    std::cout << "skipped frames:";
    for (int f : missing) std::cout << " " << f;
    std::cout << "\n";
  }
  std::cout << "wrote " << rel.size() << " relative poses (" << traj.size()
            << " accumulated) to " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path, const std::string& out_dir,
             const std::string& align, double fraction, bool temporal) {
  Trajectory est = load_trajectory_kitti(est_path);
  Trajectory gt = load_trajectory_kitti(gt_path);

  int lag = 0;
  if (temporal) {
    lag = temporal_align(trajectory_angular_rates(est), trajectory_angular_rates(gt));
    // est[i+lag] corresponds to gt[i]; crop both to the overlap.
    Trajectory est2, gt2;
    const int n_est = static_cast<int>(est.size());
    const int n_gt = static_cast<int>(gt.size());
    for (int i = 0; i < n_gt; ++i) {
      const int j = i + lag;
      if (j < 0 || j >= n_est) continue;
      est2.poses.push_back(est.poses[static_cast<std::size_t>(j)]);
      est2.timestamps.push_back(static_cast<double>(est2.poses.size() - 1));
      gt2.poses.push_back(gt.poses[static_cast<std::size_t>(i)]);
      gt2.timestamps.push_back(static_cast<double>(gt2.poses.size() - 1));
    }
    est = std::move(est2);
    gt = std::move(gt2);
  }

  if (align == "6dof" || align == "6dof_scale") {
    AlignmentResult ar = align_6dof_scale(est, gt, fraction, align == "6dof_scale");
    est = std::move(ar.aligned);
    std::cout << "alignment scale " << ar.scale << "\n";
  } else if (align != "none") {
    std::cerr << "eval: unknown alignment mode '" << align << "'\n";
    return kExitUsage;
  }

  const std::size_t n = std::min(est.size(), gt.size());
  est.poses.resize(n);
  est.timestamps.resize(n);
  gt.poses.resize(n);
  gt.timestamps.resize(n);

  MetricReport report = kitti_relative_errors(est, gt);
  fs::create_directories(out_dir);
  write_metric_csv(out_dir + "/metrics.csv", report);
  write_trajectory_svg(out_dir + "/trajectory.svg", est, gt);
  save_trajectory_kitti(out_dir + "/aligned_poses.txt", est);
  std::cout << "temporal lag " << lag << "; t_rel " << report.t_rel_percent << "% ; r_rel "
            << report.r_rel_deg_per_100m << " deg/100m over " << report.segment_count
            << " segments\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& sabotage) {
  static std::string sabotage_hold = sabotage;
  viol::testing::sabotage_op = sabotage_hold.c_str();
  const auto results = run_gradient_checks(seed);
  bool all_pass = true;
  std::printf("%-42s %12s %10s %7s  %s\n", "op", "max_rel_err", "tolerance", "checks", "status");
  for (const auto& r : results) {
    std::printf("%-42s %12.3e %10.0e %7d  %s%s%s\n", r.op.c_str(), r.max_rel_err, r.tolerance,
                r.checks, r.pass ? "PASS" : "FAIL", r.worst_slot.empty() ? "" : "  worst: ",
                r.worst_slot.c_str());
    all_pass = all_pass && r.pass;
  }
  viol::testing::sabotage_op = "";
  return all_pass ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised visual-inertial odometry: hierarchical pose estimation with "
               "online error correction"};
  app.require_subcommand(1);

  std::string config_path, out_prefix, out_dir = "out", checkpoint, data_prefix, resume;
  std::string est_path, gt_path, align = "none", sabotage;
  int sequence = 10, count = 1024, width = 192, height = 64;
  std::uint64_t seed = 42;
  double v0_sigma_z = 0.0, imu_noise = 0.0, val_fraction = 0.0, fraction = 0.1;
  bool temporal = true;
  std::int64_t iterations = 0;

  auto* prep = app.add_subcommand("prepare", "build a dataset container from the KITTI layout");
  prep->add_option("--config", config_path, "run configuration file");
  prep->add_option("--sequence", sequence, "odometry sequence number")->required();
  prep->add_option("--out", out_prefix, "output container prefix")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene dataset");
  synth->add_option("--out", out_prefix)->required();
  synth->add_option("--count", count, "sample count");
  synth->add_option("--seed", seed);
  synth->add_option("--width", width);
  synth->add_option("--height", height);
  synth->add_option("--v0-sigma-z", v0_sigma_z, "initial forward-velocity randomization (m/s)");
  synth->add_option("--imu-noise", imu_noise, "IMU additive noise std");
  synth->add_option("--val-fraction", val_fraction, "also emit <out>_val with this fraction");

  auto* train = app.add_subcommand("train", "run the training loop");
  train->add_option("--config", config_path)->required();
  train->add_option("--resume", resume, "checkpoint to resume from");
  train->add_option("--iterations", iterations, "override train.iterations");

  auto* infer = app.add_subcommand("infer", "run inference over a container");
  infer->add_option("--config", config_path);
  infer->add_option("--checkpoint", checkpoint)->required();
  infer->add_option("--data", data_prefix, "container prefix")->required();
  infer->add_option("--out", out_dir);

  auto* eval = app.add_subcommand("eval", "trajectory metrics against ground truth");
  eval->add_option("--est", est_path)->required();
  eval->add_option("--gt", gt_path)->required();
  eval->add_option("--out", out_dir);
  eval->add_option("--align", align, "none | 6dof | 6dof_scale");
  eval->add_option("--fraction", fraction, "alignment window fraction");
  eval->add_flag("--temporal,!--no-temporal", temporal, "cross-correlation temporal alignment");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc->add_option("--seed", seed);
  gc->add_option("--sabotage", sabotage, "perturb the named op's backward (self-test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (prep->parsed()) return cmd_prepare(config_path, sequence, out_prefix);
    if (synth->parsed())
      return cmd_synth(out_prefix, count, seed, width, height, v0_sigma_z, imu_noise,
                       val_fraction);
    if (train->parsed()) return cmd_train(config_path, resume, iterations);
    if (infer->parsed()) return cmd_infer(checkpoint, data_prefix, out_dir, config_path);
    if (eval->parsed()) return cmd_eval(est_path, gt_path, out_dir, align, fraction, temporal);
    if (gc->parsed()) return cmd_gradcheck(seed, sabotage);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DegenerateFrameError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
