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

#include "viol/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "viol/errors.hpp"

namespace viol {

std::vector<LevelConfig> ModelConfig::schedule() const {
  if (factors.size() != 5)
    throw std::invalid_argument("ModelConfig: exactly 5 level factors expected");
  if (extra_depth.size() != 4)
    throw std::invalid_argument("ModelConfig: exactly 4 refinement depths expected");
  std::vector<LevelConfig> out(5);
  for (int i = 0; i < 5; ++i) {
    out[static_cast<std::size_t>(i)].index = i;
    out[static_cast<std::size_t>(i)].factor = factors[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)].refinement_depth =
        i == 0 ? 0 : extra_depth[static_cast<std::size_t>(i - 1)];
  }
  return out;
}

const PreparedLevel& PreparedSample::at_factor(int factor) const {
  for (const auto& p : pyramids)
    if (p.factor == factor) return p;
  throw std::logic_error("PreparedSample: no pyramid level for factor " + std::to_string(factor));
}

namespace {
int scaled_channels(int ch, double width_mult) {
  const int v = static_cast<int>(std::lround(ch * width_mult));
  return v < 1 ? 1 : v;
}
}  // namespace

PoseEstimator::RefineNet::RefineNet(ParamStore& store, const std::string& prefix, int extra_depth,
                                    double width_mult) {
  const int c = scaled_channels(128, width_mult);
  convs_.push_back(make_conv_layer(store, prefix + ".enc1", 2, c, 7, 7, 1, 1));
  convs_.push_back(make_conv_layer(store, prefix + ".enc2", c, c, 5, 5, 2, 2));
  convs_.push_back(make_conv_layer(store, prefix + ".enc3", c, c, 3, 3, 2, 2));
  for (int i = 0; i < extra_depth; ++i)
    convs_.push_back(
        make_conv_layer(store, prefix + ".ref" + std::to_string(i + 1), c, c, 3, 3, 1, 1));
  head_ = make_conv_layer(store, prefix + ".head", c, 6, 1, 1, 1, 1);
}

void PoseEstimator::RefineNet::init_weights(Rng& rng, double head_gain) const {
  for (const ConvLayer& c : convs_) init_xavier_uniform(c, rng);
  init_xavier_uniform(head_, rng, head_gain);
}

VarId PoseEstimator::RefineNet::forward(Graph& g, VarId jac_chw) const {
  VarId x = jac_chw;
  for (const ConvLayer& c : convs_) x = g.relu(g.conv2d(x, c));
  x = g.conv2d(x, head_);          // linear pose output
  x = g.global_mean(x);            // [1,6]
  return g.reshape(x, {6});
}

PoseEstimator::PoseEstimator(ParamStore& store, ModelConfig cfg)
    : store_(&store), cfg_(std::move(cfg)), imu_(store, cfg_.width_mult) {
  const auto sched = cfg_.schedule();
  for (int i = 1; i <= 3; ++i)
    refine_.emplace_back(store, "refine.l" + std::to_string(i),
                         sched[static_cast<std::size_t>(i)].refinement_depth, cfg_.width_mult);
  for (int m = 0; m < cfg_.hypotheses; ++m)
    hyp_.emplace_back(store, "hyp.m" + std::to_string(m), sched[4].refinement_depth,
                      cfg_.width_mult);
}

void PoseEstimator::init_weights(std::uint64_t seed) const {
  imu_.init_weights(seed, cfg_.head_init_scale);
  for (std::size_t i = 0; i < refine_.size(); ++i) {
    Rng r = substream(seed, "init/refine", i);
    refine_[i].init_weights(r, cfg_.head_init_scale);
  }
  for (std::size_t m = 0; m < hyp_.size(); ++m) {
    Rng r = substream(seed, "init/hypothesis", m);
    hyp_[m].init_weights(r, cfg_.head_init_scale);
  }
}

PreparedSample PoseEstimator::prepare(const Sample& s) const {
  PreparedSample ps;
  ps.imu = s.imu;
  std::vector<int> factors = cfg_.factors;
  std::sort(factors.begin(), factors.end());
  factors.erase(std::unique(factors.begin(), factors.end()), factors.end());
  for (int f : factors) {
    PreparedLevel lvl;
    lvl.factor = f;
    lvl.source = downsample_image(s.source_rgb, f);
    lvl.target = downsample_image(s.target_rgb, f);
    lvl.depth = downsample_depth(s.source_depth, f);
    lvl.k = scale_intrinsics(s.k, f);
    ps.pyramids.push_back(std::move(lvl));
  }
  return ps;
}

LevelTrace PoseEstimator::warp_level(Graph& g, VarId pose6, int level, int factor,
                                     const PreparedSample& ps) const {
  const PreparedLevel& lvl = ps.at_factor(factor);
  ReprojectVar rp = reproject_op(g, pose6, lvl.depth, lvl.k, factor, cfg_.eps_z);
  WarpErrorVar wv = warp_error_op(g, rp.coords, lvl.source, lvl.target, rp.valid, factor);

  LevelTrace t;
  t.level = level;
  t.factor = factor;
  t.pose_id = pose6;
  t.error_id = wv.error;
  t.jacobian_id = wv.jacobian;
  t.pose = EulerPose::from_ptr(g.value(pose6).data.data());
  t.theta = make_transform(t.pose);
  t.warp = snapshot_warp(g, wv, lvl.target);
  return t;
}

LevelTrace PoseEstimator::run_level0(Graph& g, const PreparedSample& ps) const {
  const PreparedLevel& lvl = ps.at_factor(cfg_.factors[0]);
  bool any_depth = false;
  for (double d : lvl.depth.data)
    if (d > 0.0) {
      any_depth = true;
      break;
    }
  if (!any_depth) throw DegenerateFrameError("run_level0: depth map has no valid returns");

  VarId pose0 = imu_.forward(g, ps.imu);
  return warp_level(g, pose0, 0, cfg_.factors[0], ps);
}

LevelTrace PoseEstimator::run_refinement_level(Graph& g, const LevelTrace& prev,
                                               const LevelConfig& cfg,
                                               const PreparedSample& ps) const {
  if (cfg.index < 1 || cfg.index > 3)
    throw std::invalid_argument("run_refinement_level: level index must be 1..3");
  const Tensor& jac = g.value(prev.jacobian_id);
  const PreparedLevel& prev_lvl = ps.at_factor(prev.factor);
  if (jac.dim(0) != prev_lvl.depth.dim(0) || jac.dim(1) != prev_lvl.depth.dim(1))
    throw std::invalid_argument("run_refinement_level: previous Jacobian scale " +
                                shape_str(jac.shape) + " does not match factor " +
                                std::to_string(prev.factor));

  VarId jc = jacobian_to_channels(g, prev.jacobian_id);
  VarId delta = refine_[static_cast<std::size_t>(cfg.index - 1)].forward(g, jc);
  // Additive update in angle/translation space; the transform is rebuilt
  // from the summed six-vector.
  VarId pose = g.add(prev.pose_id, delta);
  return warp_level(g, pose, cfg.index, cfg.factor, ps);
}

LevelTrace PoseEstimator::run_final_level(Graph& g, const LevelTrace& prev,
                                          const PreparedSample& ps) const {
  const int factor = cfg_.factors[4];
  VarId jc = jacobian_to_channels(g, prev.jacobian_id);

  std::vector<LevelTrace> hyp_traces;
  hyp_traces.reserve(hyp_.size());
  for (std::size_t m = 0; m < hyp_.size(); ++m) {
    VarId delta = hyp_[m].forward(g, jc);
    VarId pose = g.add(prev.pose_id, delta);
    hyp_traces.push_back(warp_level(g, pose, 4, factor, ps));
  }

  int winner = 0;
  for (std::size_t m = 1; m < hyp_traces.size(); ++m)
    if (hyp_traces[m].warp.total_error < hyp_traces[static_cast<std::size_t>(winner)].warp.total_error)
      winner = static_cast<int>(m);

  LevelTrace t = hyp_traces[static_cast<std::size_t>(winner)];
  t.winner_index = winner;
  for (auto& h : hyp_traces) {
    t.hyp_poses.push_back(h.pose);
    t.hyp_errors.push_back(h.warp.total_error);
    t.hyp_error_ids.push_back(h.error_id);
    t.hyp_warps.push_back(std::move(h.warp));
  }
  return t;
}

VarId PoseEstimator::total_loss(Graph& g, const std::vector<LevelTrace>& traces) const {
  std::vector<VarId> errors;
  errors.reserve(traces.size());
  for (const auto& t : traces) errors.push_back(t.error_id);
  VarId e_sum = g.add_n(errors);
  VarId penalty = g.l1_penalty(store_->biases(), cfg_.lambda);
  return g.add(e_sum, penalty);
}

std::vector<LevelTrace> PoseEstimator::forward(Graph& g, const Sample& s) const {
  PreparedSample ps = prepare(s);
  const auto sched = cfg_.schedule();
  std::vector<LevelTrace> traces;
  traces.push_back(run_level0(g, ps));
  for (int i = 1; i <= 3; ++i)
    traces.push_back(run_refinement_level(g, traces.back(), sched[static_cast<std::size_t>(i)], ps));
  traces.push_back(run_final_level(g, traces.back(), ps));
  return traces;
}

InferenceResult PoseEstimator::infer(const Sample& s) const {
  Graph g;
  std::vector<LevelTrace> traces = forward(g, s);
  InferenceResult out;
  out.traces = std::move(traces);
  const LevelTrace& last = out.traces.back();
  out.pose = last.pose;
  out.theta = last.theta;
  out.winner_index = last.winner_index;
  return out;
}

std::string format_level_diagnostics(const std::vector<LevelTrace>& traces) {
  std::string out;
  char buf[256];
  for (const auto& t : traces) {
    const auto p = t.pose.to_array();
    std::snprintf(buf, sizeof(buf),
                  "%d\t%.9e\t%.9e\t%.9e\t%.9e\t%.9e\t%.9e\t%.9e\t%d\n", t.level,
                  t.warp.total_error, p[0], p[1], p[2], p[3], p[4], p[5], t.winner_index);
    out += buf;
  }
  return out;
}

}  // namespace viol
