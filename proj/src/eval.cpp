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

#include "viol/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "viol/data.hpp"  // exp_so3/log_so3
#include "viol/errors.hpp"

namespace viol {

namespace {
constexpr int kLengths[] = {100, 200, 300, 400, 500, 600, 700, 800};

double rotation_angle(const Eigen::Matrix3d& r) {
  return std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0));
}
}  // namespace

Trajectory accumulate(const std::vector<PoseTransform>& relative_poses) {
  if (relative_poses.empty()) throw std::invalid_argument("accumulate: empty pose list");
  Trajectory t;
  t.poses.push_back(PoseTransform{});
  t.timestamps.push_back(0.0);
  for (std::size_t i = 0; i < relative_poses.size(); ++i) {
    if (!relative_poses[i].valid(1e-9))
      throw std::invalid_argument("accumulate: invalid relative pose at index " +
                                  std::to_string(i));
    t.poses.push_back(t.poses.back() * relative_poses[i]);
    t.timestamps.push_back(static_cast<double>(i + 1));
  }
  return t;
}

std::vector<PoseTransform> trajectory_to_relative(const Trajectory& t) {
  std::vector<PoseTransform> rel;
  for (std::size_t i = 1; i < t.size(); ++i) rel.push_back(t.poses[i - 1].inverse() * t.poses[i]);
  return rel;
}

MetricReport kitti_relative_errors(const Trajectory& est, const Trajectory& gt) {
  if (est.size() != gt.size())
    throw std::invalid_argument("kitti_relative_errors: trajectory lengths differ (" +
                                std::to_string(est.size()) + " vs " + std::to_string(gt.size()) +
                                ")");
  const std::size_t n = gt.size();
  std::vector<double> dist(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    dist[i] = dist[i - 1] + (gt.position(i) - gt.position(i - 1)).norm();

  MetricReport report;
  double t_sum = 0.0, r_sum = 0.0;
  int count = 0;
  for (int len : kLengths) {
    LengthErrors le;
    double lt = 0.0, lr = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
      while (j < n && dist[j] <= dist[i] + len) ++j;
      if (j >= n) break;
      const PoseTransform rel_gt = gt.poses[i].inverse() * gt.poses[j];
      const PoseTransform rel_est = est.poses[i].inverse() * est.poses[j];
      const PoseTransform err = rel_est.inverse() * rel_gt;
      lt += err.translation().norm() / len;
      lr += rotation_angle(err.rotation()) / len;
      ++le.count;
    }
    if (le.count == 0) continue;  // trajectory shorter than this segment
    le.t_rel_percent = 100.0 * lt / le.count;
    le.r_rel_deg_per_100m = (lr / le.count) * 100.0 * 180.0 / M_PI;
    report.per_length[len] = le;
    t_sum += lt;
    r_sum += lr;
    count += le.count;
  }
  if (count > 0) {
    report.t_rel_percent = 100.0 * t_sum / count;
    report.r_rel_deg_per_100m = (r_sum / count) * 100.0 * 180.0 / M_PI;
  }
  report.segment_count = count;
  return report;
}

std::vector<Eigen::Vector3d> trajectory_angular_rates(const Trajectory& t) {
  std::vector<Eigen::Vector3d> rates;
  for (std::size_t i = 1; i < t.size(); ++i)
    rates.push_back(log_so3(t.poses[i - 1].rotation().transpose() * t.poses[i].rotation()));
  return rates;
}

int temporal_align(const std::vector<Eigen::Vector3d>& est_rates,
                   const std::vector<Eigen::Vector3d>& gt_rates) {
  if (est_rates.size() < 3 || gt_rates.size() < 3)
    throw std::invalid_argument("temporal_align: series too short");

  auto accel_norms = [](const std::vector<Eigen::Vector3d>& r) {
    std::vector<double> out;
    for (std::size_t i = 1; i < r.size(); ++i) out.push_back((r[i] - r[i - 1]).norm());
    return out;
  };
  const std::vector<double> a = accel_norms(est_rates);
  const std::vector<double> b = accel_norms(gt_rates);

  const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
  const int max_lag = std::min(na, nb) - 2;

  double best_score = -2.0;
  int best_lag = 0;
  bool any = false;
  // |lag| ascending so exact ties keep the smallest shift.
  for (int mag = 0; mag <= max_lag; ++mag) {
    for (int sign = 0; sign < (mag == 0 ? 1 : 2); ++sign) {
      const int lag = sign == 0 ? mag : -mag;
      // est[i+lag] pairs with gt[i].
      const int lo = std::max(0, -lag);
      const int hi = std::min(nb, na - lag);
      const int m = hi - lo;
      if (m < 3) continue;
      double ma = 0.0, mb = 0.0;
      for (int i = lo; i < hi; ++i) {
        ma += a[static_cast<std::size_t>(i + lag)];
        mb += b[static_cast<std::size_t>(i)];
      }
      ma /= m;
      mb /= m;
      double sab = 0.0, saa = 0.0, sbb = 0.0;
      for (int i = lo; i < hi; ++i) {
        const double da = a[static_cast<std::size_t>(i + lag)] - ma;
        const double db = b[static_cast<std::size_t>(i)] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
      }
      if (saa <= 0.0 || sbb <= 0.0) continue;
      any = true;
      const double score = sab / std::sqrt(saa * sbb);
      if (score > best_score + 1e-12) {
        best_score = score;
        best_lag = lag;
      }
    }
  }
  if (!any)
    throw std::invalid_argument("temporal_align: undefined correlation on constant series");
  return best_lag;
}

AlignmentResult align_6dof_scale(const Trajectory& est, const Trajectory& gt, double fraction,
                                 bool with_scale) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("align_6dof_scale: fraction must be in (0,1]");
  const std::size_t n = std::min(est.size(), gt.size());
  const std::size_t m = std::max<std::size_t>(3, static_cast<std::size_t>(fraction * n));
  if (n < 3 || m > n) throw std::invalid_argument("align_6dof_scale: fewer than 3 positions");

  Eigen::Vector3d ce = Eigen::Vector3d::Zero(), cg = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < m; ++i) {
    ce += est.position(i);
    cg += gt.position(i);
  }
  ce /= static_cast<double>(m);
  cg /= static_cast<double>(m);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_e = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::Vector3d de = est.position(i) - ce;
    const Eigen::Vector3d dg = gt.position(i) - cg;
    cov += dg * de.transpose();
    var_e += de.squaredNorm();
  }
  cov /= static_cast<double>(m);
  var_e /= static_cast<double>(m);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  // Rank < 2 means the window is a point or a line: rotation about the line
  // is unobservable.
  if (sv(1) <= 1e-12 * std::max(1.0, sv(0)))
    throw std::invalid_argument("align_6dof_scale: degenerate (collinear) alignment window");

  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = svd.matrixU() * d * svd.matrixV().transpose();
  const double scale = with_scale ? (sv(0) + sv(1) * d(1, 1) + sv(2) * d(2, 2)) / var_e : 1.0;
  const Eigen::Vector3d t = cg - scale * r * ce;

  AlignmentResult out;
  out.scale = scale;
  out.rotation = r;
  out.translation = t;
  out.aligned.timestamps = est.timestamps;
  for (const auto& p : est.poses) {
    PoseTransform q;
    q.mat.topLeftCorner<3, 3>() = r * p.rotation();
    q.mat.topRightCorner<3, 1>() = scale * r * p.translation() + t;
    out.aligned.poses.push_back(q);
  }
  return out;
}

PerLevelStats per_level_rmse(const std::vector<FrameLevelPoses>& frames,
                             const std::vector<Eigen::Vector3d>& gt_translation) {
  if (frames.size() != gt_translation.size())
    throw std::invalid_argument("per_level_rmse: frame count mismatch");
  PerLevelStats stats;
  if (frames.empty()) return stats;

  const std::size_t levels = frames[0].level_translation.size();
  const std::size_t hyps = frames[0].hyp_translation.size();
  stats.level_rmse.assign(levels, 0.0);
  stats.hyp_rmse.assign(hyps, 0.0);

  std::array<double, 3> var_sum{0, 0, 0};
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (std::size_t l = 0; l < levels; ++l)
      stats.level_rmse[l] += (frames[f].level_translation[l] - gt_translation[f]).squaredNorm();
    for (std::size_t mth = 0; mth < hyps; ++mth)
      stats.hyp_rmse[mth] += (frames[f].hyp_translation[mth] - gt_translation[f]).squaredNorm();
    if (hyps > 1) {
      for (int axis = 0; axis < 3; ++axis) {
        double mean = 0.0;
        for (std::size_t mth = 0; mth < hyps; ++mth)
          mean += frames[f].hyp_translation[mth][axis] - gt_translation[f][axis];
        mean /= static_cast<double>(hyps);
        double var = 0.0;
        for (std::size_t mth = 0; mth < hyps; ++mth) {
          const double d = frames[f].hyp_translation[mth][axis] - gt_translation[f][axis] - mean;
          var += d * d;
        }
        var_sum[static_cast<std::size_t>(axis)] += var / static_cast<double>(hyps);
      }
    }
  }
  for (auto& v : stats.level_rmse) v = std::sqrt(v / static_cast<double>(frames.size()));
  for (auto& v : stats.hyp_rmse) v = std::sqrt(v / static_cast<double>(frames.size()));
  for (int axis = 0; axis < 3; ++axis)
    stats.hyp_error_variance[static_cast<std::size_t>(axis)] =
        var_sum[static_cast<std::size_t>(axis)] / static_cast<double>(frames.size());
  return stats;
}

Trajectory load_trajectory_kitti(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open trajectory: " + path);
  Trajectory t;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double v[12];
    for (int i = 0; i < 12; ++i)
      if (!(ls >> v[i]))
        throw DataError("malformed pose line " + std::to_string(line_no) + " in " + path);
    double extra;
    if (ls >> extra)
      throw DataError("malformed pose line " + std::to_string(line_no) + " in " + path);
    PoseTransform p;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) p.mat(r, c) = v[r * 4 + c];
    t.poses.push_back(p);
    t.timestamps.push_back(static_cast<double>(t.poses.size() - 1));
  }
  if (t.poses.empty()) throw DataError("empty trajectory file: " + path);
  return t;
}

void save_trajectory_kitti(const std::string& path, const Trajectory& t) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write trajectory: " + path);
  char buf[512];
  for (const auto& p : t.poses) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  p.mat(0, 0), p.mat(0, 1), p.mat(0, 2), p.mat(0, 3), p.mat(1, 0), p.mat(1, 1),
                  p.mat(1, 2), p.mat(1, 3), p.mat(2, 0), p.mat(2, 1), p.mat(2, 2), p.mat(2, 3));
    os << buf;
  }
}

void write_metric_csv(const std::string& path, const MetricReport& report) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write csv: " + path);
  os << "length_m,t_rel_percent,r_rel_deg_per_100m,segments\n";
  char buf[160];
  for (const auto& [len, le] : report.per_length) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%d\n", len, le.t_rel_percent,
                  le.r_rel_deg_per_100m, le.count);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "overall,%.6f,%.6f,%d\n", report.t_rel_percent,
                report.r_rel_deg_per_100m, report.segment_count);
  os << buf;
}

void write_trajectory_svg(const std::string& path, const Trajectory& est, const Trajectory& gt) {
  double min_x = 1e30, max_x = -1e30, min_z = 1e30, max_z = -1e30;
  auto scan = [&](const Trajectory& t) {
    for (const auto& p : t.poses) {
      const auto pos = p.translation();
      min_x = std::min(min_x, pos.x());
      max_x = std::max(max_x, pos.x());
      min_z = std::min(min_z, pos.z());
      max_z = std::max(max_z, pos.z());
    }
  };
  scan(est);
  scan(gt);
  const double span = std::max({max_x - min_x, max_z - min_z, 1e-6});
  const double sz = 800.0, margin = 40.0;
  const double s = (sz - 2 * margin) / span;

  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write svg: " + path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << sz << "' height='" << sz << "'>\n";
  auto poly = [&](const Trajectory& t, const char* color) {
    os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (const auto& p : t.poses) {
      const auto pos = p.translation();
      os << margin + (pos.x() - min_x) * s << "," << sz - margin - (pos.z() - min_z) * s << " ";
    }
    os << "'/>\n";
  };
  poly(gt, "#202020");
  poly(est, "#d62728");
  os << "<text x='10' y='20' font-size='14' fill='#202020'>ground truth</text>\n";
  os << "<text x='10' y='40' font-size='14' fill='#d62728'>estimate</text>\n";
  os << "</svg>\n";
}

}  // namespace viol
