// Builds a miniature on-disk tree with the exact KITTI odometry/raw/depth
// layout the loader expects, so the ingestion path can run end to end
// without the real dataset.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "viol/data.hpp"
#include "viol/image_io.hpp"

namespace kitti_mock {

struct MockTree {
  std::string root;
  viol::KittiPaths paths;
  int frames = 0;
};

inline std::string timestamp_line(double seconds_of_day) {
  const int h = static_cast<int>(seconds_of_day / 3600.0);
  const int m = static_cast<int>((seconds_of_day - h * 3600.0) / 60.0);
  const double s = seconds_of_day - h * 3600.0 - m * 60.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "2011-09-30 %02d:%02d:%012.9f", h, m, s);
  return buf;
}

// Sequence 10 maps to drive 2011_09_30_0034 starting at raw frame 0.
inline MockTree build(const std::string& root, int frames, int img_w = 1241, int img_h = 376) {
  namespace fs = std::filesystem;
  MockTree tree;
  tree.root = root;
  tree.frames = frames;
  tree.paths = {root + "/odometry", root + "/raw", root + "/depth"};

  const std::string seq_dir = tree.paths.odometry_root + "/sequences/10";
  const std::string drive = tree.paths.raw_root + "/2011_09_30/2011_09_30_drive_0034";
  fs::create_directories(seq_dir + "/image_2");
  fs::create_directories(drive + "_sync/image_02");
  fs::create_directories(drive + "_extract/oxts/data");
  fs::create_directories(tree.paths.depth_root + "/10");

  {
    std::ofstream calib(seq_dir + "/calib.txt");
    calib << "P0: 707.0912 0 601.8873 0 0 707.0912 183.1104 0 0 0 1 0\n";
    calib << "P1: 707.0912 0 601.8873 -379.8145 0 707.0912 183.1104 0 0 0 1 0\n";
    calib << "P2: 707.0912 0 601.8873 45.7541 0 707.0912 183.1104 -0.3454 0 0 1 0.0049\n";
    calib << "P3: 707.0912 0 601.8873 -334.1081 0 707.0912 183.1104 2.3309 0 0 1 0.0033\n";
  }

  const double frame_dt = 0.104;
  const double t0 = 12 * 3600 + 40 * 60 + 10.0;  // 12:40:10, absolute
  {
    std::ofstream times(seq_dir + "/times.txt");
    std::ofstream sync_ts(drive + "_sync/image_02/timestamps.txt");
    for (int j = 0; j < frames; ++j) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6e\n", j * frame_dt);
      times << buf;
      sync_ts << timestamp_line(t0 + j * frame_dt) << "\n";
    }
  }

  // 100 Hz oxts stream covering the frame span with margin.
  {
    std::ofstream ts(drive + "_extract/oxts/timestamps.txt");
    const int n = static_cast<int>((frames * frame_dt + 0.4) / 0.01);
    for (int k = 0; k < n; ++k) {
      const double t = t0 - 0.2 + k * 0.01;
      ts << timestamp_line(t) << "\n";
      char name[64];
      std::snprintf(name, sizeof(name), "/data/%010d.txt", k);
      std::ofstream rec(drive + "_extract/oxts" + name);
      // 30-field oxts record; accelerations at 11..13, rates at 17..19.
      double v[30] = {0};
      v[0] = 49.0;
      v[1] = 8.4;
      v[2] = 112.0;
      v[11] = 0.1 * std::sin(k * 0.05);
      v[12] = -0.05;
      v[13] = 9.81;
      v[17] = 0.02 * std::cos(k * 0.03);
      v[18] = 0.01;
      v[19] = 0.005 * std::sin(k * 0.02);
      for (int i = 0; i < 30; ++i) rec << v[i] << (i + 1 < 30 ? " " : "\n");
    }
  }

  for (int j = 0; j < frames; ++j) {
    viol::Tensor img({3, img_h, img_w});
    for (int c = 0; c < 3; ++c)
      for (int r = 0; r < img_h; ++r)
        for (int cc = 0; cc < img_w; ++cc)
          img.at({c, r, cc}) =
              std::fmod(r * 7.0 + cc * 13.0 + c * 29.0 + j * 11.0, 256.0);
    char name[32];
    std::snprintf(name, sizeof(name), "/%06d.png", j);
    viol::write_image_rgb8(seq_dir + "/image_2" + name, img);

    // Depth valid below the horizon, increasing with row; u16 value/256 m.
    viol::Tensor depth({img_h, img_w});
    for (int r = img_h / 3; r < img_h; ++r)
      for (int cc = 0; cc < img_w; ++cc)
        depth.at({r, cc}) = (5.0 + 20.0 * (img_h - r) / img_h) * 256.0;
    viol::write_image_gray16(tree.paths.depth_root + "/10" + name, depth);
  }
  return tree;
}

}  // namespace kitti_mock
