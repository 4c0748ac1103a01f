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

#include "viol/data.hpp"

#include <json.hpp>

#include "viol/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace viol {

void Sample::validate() const {
  if (source_rgb.rank() != 3 || source_rgb.dim(0) != 3)
    throw std::invalid_argument("Sample: source_rgb must be [3,H,W]");
  check_same_shape(source_rgb, target_rgb, "Sample rgb");
  if (source_depth.shape != std::vector<int>{source_rgb.dim(1), source_rgb.dim(2)})
    throw std::invalid_argument("Sample: depth shape mismatch");
  if (k.width != source_rgb.dim(2) || k.height != source_rgb.dim(1))
    throw std::invalid_argument("Sample: intrinsics size mismatch");
  for (double v : source_rgb.data)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("Sample: rgb outside [0,1]");
  for (double v : target_rgb.data)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("Sample: rgb outside [0,1]");
  imu.validate();
}

void split_validation(int n_frames, double fraction, std::uint64_t seed,
                      std::vector<int>* train_idx, std::vector<int>* val_idx) {
  std::vector<int> idx(static_cast<std::size_t>(n_frames));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = substream(seed, "split");
  // Fisher-Yates, then the prefix becomes validation.
  for (int i = n_frames - 1; i > 0; --i) {
    const int j = rng.uniform_int(i + 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  const int n_val = static_cast<int>(std::floor(fraction * n_frames));
  val_idx->assign(idx.begin(), idx.begin() + n_val);
  train_idx->assign(idx.begin() + n_val, idx.end());
  std::sort(val_idx->begin(), val_idx->end());
  std::sort(train_idx->begin(), train_idx->end());
}

// --- IMU windows -------------------------------------------------------------

ImuWindow build_imu_window(const std::vector<ImuRecord>& stream, double t_source) {
  constexpr double kDt = 0.01;
  constexpr double kGapTol = 0.0075;   // flag repetitions beyond 3/4 sample
  constexpr double kCoverTol = 0.015;  // more than one missing sample: give up
  if (stream.size() < 2)
    throw DegenerateFrameError("build_imu_window: IMU stream too short");

  ImuWindow win;
  win.angular_velocity = Tensor({ImuWindow::kRows, 3});
  win.linear_acceleration = Tensor({ImuWindow::kRows, 3});

  for (int i = 0; i < ImuWindow::kRows; ++i) {
    const double tau = t_source + (i - 9) * kDt;
    auto it = std::lower_bound(stream.begin(), stream.end(), tau,
                               [](const ImuRecord& r, double t) { return r.t < t; });
    std::size_t best = it == stream.end() ? stream.size() - 1
                                          : static_cast<std::size_t>(it - stream.begin());
    if (best > 0 && std::abs(stream[best - 1].t - tau) <= std::abs(stream[best].t - tau))
      --best;
    const double dist = std::abs(stream[best].t - tau);
    if (dist > kCoverTol) {
      std::ostringstream os;
      os << "build_imu_window: insufficient IMU coverage near t=" << tau << " (nearest sample "
         << dist << "s away)";
      throw DegenerateFrameError(os.str());
    }
    if (dist > kGapTol) win.gap_filled = true;
    for (int a = 0; a < 3; ++a) {
      win.angular_velocity.at({i, a}) = stream[best].w[static_cast<std::size_t>(a)];
      win.linear_acceleration.at({i, a}) = stream[best].a[static_cast<std::size_t>(a)];
    }
  }
  return win;
}

// --- synthetic scenes --------------------------------------------------------

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  Eigen::Matrix3d wx;
  wx << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  if (theta < 1e-10) return Eigen::Matrix3d::Identity() + wx + 0.5 * wx * wx;
  return Eigen::Matrix3d::Identity() + std::sin(theta) / theta * wx +
         (1.0 - std::cos(theta)) / (theta * theta) * wx * wx;
}

Eigen::Vector3d log_so3(const Eigen::Matrix3d& r) {
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(c);
  Eigen::Vector3d v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (theta < 1e-10) return 0.5 * v;
  if (theta > M_PI - 1e-6) {
    // Near pi the skew part degenerates; recover the axis from the diagonal.
    Eigen::Vector3d axis;
    for (int i = 0; i < 3; ++i) axis[i] = std::sqrt(std::max(0.0, (r(i, i) + 1.0) / 2.0));
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (axis[i] > axis[k]) k = i;
    for (int i = 0; i < 3; ++i)
      if (i != k && v[i] * axis[i] < 0) axis[i] = -axis[i];
    if (v[k] < 0) axis = -axis;
    return theta * axis.normalized();
  }
  return theta / (2.0 * std::sin(theta)) * v;
}

CameraIntrinsics SyntheticConfig::intrinsics() const {
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.fx = k.fy = 2.5 * height;
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  return k;
}

namespace {

struct TextureField {
  struct Comp {
    double kx, ky, phase, amp;
  };
  std::array<std::vector<Comp>, 3> comps;

  static TextureField make(Rng& rng, int n_comp) {
    TextureField t;
    for (auto& channel : t.comps) {
      channel.resize(static_cast<std::size_t>(n_comp));
      double amp_sum = 0.0;
      for (auto& c : channel) {
        const double wavelength = rng.uniform(18.0, 64.0);
        const double dir = rng.uniform(0.0, 2.0 * M_PI);
        const double k = 2.0 * M_PI / wavelength;
        c.kx = k * std::cos(dir);
        c.ky = k * std::sin(dir);
        c.phase = rng.uniform(0.0, 2.0 * M_PI);
        c.amp = rng.uniform(0.5, 1.0);
        amp_sum += c.amp;
      }
      // Total swing 0.42 keeps values inside (0,1) with no clamping kinks.
      for (auto& c : channel) c.amp *= 0.42 / amp_sum;
    }
    return t;
  }

  double eval(int channel, double x, double y) const {
    double v = 0.5;
    for (const auto& c : comps[static_cast<std::size_t>(channel)])
      v += c.amp * std::sin(c.kx * x + c.ky * y + c.phase);
    return v;
  }
};

}  // namespace

EulerPose sample_motion(Rng& rng, const SyntheticConfig& cfg) {
  EulerPose m;
  m.alpha = rng.uniform(-cfg.rot_range, cfg.rot_range);
  m.beta = rng.uniform(-cfg.rot_range, cfg.rot_range);
  m.gamma = rng.uniform(-cfg.rot_range, cfg.rot_range);
  m.tx = rng.uniform(-cfg.trans_range_xy, cfg.trans_range_xy);
  m.ty = rng.uniform(-cfg.trans_range_xy, cfg.trans_range_xy);
  m.tz = rng.uniform(cfg.tz_min, cfg.tz_max);
  return m;
}

std::array<double, 3> sample_v0(Rng& rng, const SyntheticConfig& cfg) {
  return {cfg.v0_sigma[0] * rng.normal(), cfg.v0_sigma[1] * rng.normal(),
          cfg.v0_sigma[2] * rng.normal()};
}

SyntheticSample generate_synthetic(std::uint64_t scene_seed, const EulerPose& motion,
                                   const CameraIntrinsics& k, const SyntheticConfig& cfg,
                                   const std::array<double, 3>& v0) {
  const int h = k.height, w = k.width;
  Rng tex_rng = substream(scene_seed, "texture");
  Rng depth_rng = substream(scene_seed, "planes");
  const TextureField tex = TextureField::make(tex_rng, 8);

  // Piecewise-constant depth bands: fronto-parallel planes seen as
  // horizontal stripes in the source view.
  Tensor depth({h, w});
  const int planes = std::max(1, cfg.planes);
  std::vector<double> plane_depth(static_cast<std::size_t>(planes));
  for (auto& d : plane_depth) d = depth_rng.uniform(cfg.depth_min, cfg.depth_max);
  for (int r = 0; r < h; ++r) {
    const int band = std::min(planes - 1, r * planes / h);
    for (int c = 0; c < w; ++c)
      depth.data[static_cast<std::size_t>(r) * w + c] = plane_depth[static_cast<std::size_t>(band)];
  }

  Sample s;
  s.source_depth = depth;
  s.source_rgb = Tensor({3, h, w});
  s.target_rgb = Tensor({3, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < h; ++r)
      for (int cc = 0; cc < w; ++cc)
        s.source_rgb.data[static_cast<std::size_t>(c) * hw + static_cast<std::size_t>(r) * w + cc] =
            tex.eval(c, cc, r);

  // Exact view change: the target pixel content is the continuous texture
  // evaluated at the ground-truth correspondence.
  ReprojectResult rr = reproject_grid(depth, k, motion);
  int in_frame = 0;
  for (int r = 0; r < h; ++r)
    for (int cc = 0; cc < w; ++cc) {
      const std::size_t p = static_cast<std::size_t>(r) * w + cc;
      const double x = rr.grid.coords.data[p * 2];
      const double y = rr.grid.coords.data[p * 2 + 1];
      const bool ok = rr.grid.valid[p] != 0;
      if (ok && x >= 0.0 && x <= w - 1 && y >= 0.0 && y <= h - 1) ++in_frame;
      for (int c = 0; c < 3; ++c)
        s.target_rgb.data[static_cast<std::size_t>(c) * hw + p] =
            ok ? tex.eval(c, x, y) : 0.5;
    }
  if (in_frame < cfg.min_in_frame * static_cast<double>(hw)) {
    std::ostringstream os;
    os << "generate_synthetic: excessive motion, only " << in_frame << "/" << hw
       << " pixels stay in frame";
    throw std::invalid_argument(os.str());
  }

  // Constant-rate / constant-acceleration profile consistent with the motion
  // over dt = 0.1 s from initial velocity v0: T = v0*dt + a*dt^2/2.
  constexpr double kDt = 0.1;
  const Eigen::Vector3d omega = log_so3(euler_to_rotation(motion)) / kDt;
  const Eigen::Vector3d t_vec(motion.tx, motion.ty, motion.tz);
  const Eigen::Vector3d v0_vec(v0[0], v0[1], v0[2]);
  const Eigen::Vector3d accel = 2.0 * (t_vec - v0_vec * kDt) / (kDt * kDt);

  Rng noise_rng = substream(scene_seed, "imu-noise");
  s.imu.angular_velocity = Tensor({ImuWindow::kRows, 3});
  s.imu.linear_acceleration = Tensor({ImuWindow::kRows, 3});
  for (int i = 0; i < ImuWindow::kRows; ++i)
    for (int a = 0; a < 3; ++a) {
      s.imu.angular_velocity.at({i, a}) = omega[a] + cfg.imu_noise * noise_rng.normal();
      s.imu.linear_acceleration.at({i, a}) = accel[a] + cfg.imu_noise * noise_rng.normal();
    }

  s.k = k;
  s.sequence = "synth";
  s.frame = static_cast<int>(scene_seed & 0x7fffffff);
  s.has_gt = true;
  s.gt_motion = motion;
  s.gt_v0 = v0;

  SyntheticSample out;
  out.sample = std::move(s);
  out.motion = motion;
  out.v0 = v0;
  return out;
}

// --- dataset containers ------------------------------------------------------

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64s(std::ostream& os, const double* v, std::size_t n) {
  os.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * 8));
}
void get_f64s(std::istream& is, double* v, std::size_t n) {
  is.read(reinterpret_cast<char*>(v), static_cast<std::streamsize>(n * 8));
}

}  // namespace

struct DatasetWriter::Impl {
  std::string prefix;
  std::ofstream bin;
  bool f32 = false;
  int width = -1, height = -1;
  json samples = json::array();
  bool finished = false;
};

DatasetWriter::DatasetWriter(const std::string& path_prefix, bool f32_pixels)
    : impl_(std::make_unique<Impl>()) {
  impl_->prefix = path_prefix;
  impl_->f32 = f32_pixels;
  impl_->bin.open(path_prefix + ".bin", std::ios::binary | std::ios::trunc);
  if (!impl_->bin) throw DataError("cannot open for write: " + path_prefix + ".bin");
  impl_->bin.write("VIOD", 4);
  put_u32(impl_->bin, 1);
}

DatasetWriter::~DatasetWriter() {
  if (impl_ && !impl_->finished) {
    try {
      finish();
    } catch (...) {
    }
  }
}

void DatasetWriter::add(const Sample& s) {
  s.validate();
  Impl& im = *impl_;
  const int h = s.source_rgb.dim(1), w = s.source_rgb.dim(2);
  if (im.width < 0) {
    im.width = w;
    im.height = h;
  } else if (im.width != w || im.height != h) {
    throw DataError("DatasetWriter: mixed sample sizes in one container");
  }

  const auto offset = static_cast<std::uint64_t>(im.bin.tellp());
  std::ostream& os = im.bin;
  put_u32(os, static_cast<std::uint32_t>(s.sequence.size()));
  os.write(s.sequence.data(), static_cast<std::streamsize>(s.sequence.size()));
  put_u32(os, static_cast<std::uint32_t>(s.frame));
  const std::uint8_t flags = static_cast<std::uint8_t>((s.has_gt ? 1 : 0) |
                                                       (s.imu.gap_filled ? 2 : 0));
  os.write(reinterpret_cast<const char*>(&flags), 1);
  const double kv[4] = {s.k.fx, s.k.fy, s.k.cx, s.k.cy};
  put_f64s(os, kv, 4);
  const auto m = s.gt_motion.to_array();
  put_f64s(os, m.data(), 6);
  put_f64s(os, s.gt_v0.data(), 3);
  put_f64s(os, s.imu.angular_velocity.data.data(), 60);
  put_f64s(os, s.imu.linear_acceleration.data.data(), 60);

  auto write_rgb = [&](const Tensor& t) {
    if (im.f32) {
      std::vector<float> buf(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) buf[i] = static_cast<float>(t.data[i]);
      os.write(reinterpret_cast<const char*>(buf.data()),
               static_cast<std::streamsize>(buf.size() * 4));
    } else {
      std::vector<std::uint8_t> buf(t.size());
      for (std::size_t i = 0; i < t.size(); ++i)
        buf[i] = static_cast<std::uint8_t>(std::clamp(std::lround(t.data[i] * 255.0), 0l, 255l));
      os.write(reinterpret_cast<const char*>(buf.data()),
               static_cast<std::streamsize>(buf.size()));
    }
  };
  write_rgb(s.source_rgb);
  write_rgb(s.target_rgb);
  if (im.f32) {
    std::vector<float> buf(s.source_depth.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
      buf[i] = static_cast<float>(s.source_depth.data[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * 4));
  } else {
    std::vector<std::uint16_t> buf(s.source_depth.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
      buf[i] = static_cast<std::uint16_t>(
          std::clamp(std::lround(s.source_depth.data[i] * 256.0), 0l, 65535l));
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * 2));
  }

  json e;
  e["seq"] = s.sequence;
  e["frame"] = s.frame;
  e["offset"] = offset;
  e["has_gt"] = s.has_gt;
  if (s.has_gt) {
    e["motion"] = s.gt_motion.to_array();
    e["v0"] = s.gt_v0;
  }
  im.samples.push_back(std::move(e));
}

void DatasetWriter::finish() {
  Impl& im = *impl_;
  if (im.finished) return;
  im.bin.close();
  json root;
  root["count"] = im.samples.size();
  root["width"] = im.width;
  root["height"] = im.height;
  root["pixel_format"] = im.f32 ? "f32" : "u8";
  root["samples"] = std::move(im.samples);
  std::ofstream js(im.prefix + ".json", std::ios::trunc);
  if (!js) throw DataError("cannot write index: " + im.prefix + ".json");
  js << root.dump(1) << "\n";
  im.finished = true;
}

struct DatasetReader::Impl {
  std::string prefix;
  mutable std::ifstream bin;
  mutable std::mutex mu;
  bool f32 = false;
  int width = 0, height = 0;
  std::vector<std::uint64_t> offsets;
};

DatasetReader::DatasetReader(const std::string& path_prefix) : impl_(std::make_unique<Impl>()) {
  impl_->prefix = path_prefix;
  std::ifstream js(path_prefix + ".json");
  if (!js) throw DataError("cannot open index: " + path_prefix + ".json");
  json root = json::parse(js, nullptr, true);
  impl_->width = root.at("width").get<int>();
  impl_->height = root.at("height").get<int>();
  impl_->f32 = root.at("pixel_format").get<std::string>() == "f32";
  for (const auto& e : root.at("samples")) impl_->offsets.push_back(e.at("offset").get<std::uint64_t>());

  impl_->bin.open(path_prefix + ".bin", std::ios::binary);
  if (!impl_->bin) throw DataError("cannot open container: " + path_prefix + ".bin");
  char magic[4];
  impl_->bin.read(magic, 4);
  if (std::memcmp(magic, "VIOD", 4) != 0)
    throw DataError("bad container magic: " + path_prefix + ".bin");
}

DatasetReader::~DatasetReader() = default;

int DatasetReader::size() const { return static_cast<int>(impl_->offsets.size()); }
int DatasetReader::width() const { return impl_->width; }
int DatasetReader::height() const { return impl_->height; }

Sample DatasetReader::get(int i) const {
  if (i < 0 || i >= size()) throw std::out_of_range("DatasetReader::get index");
  Impl& im = *impl_;
  std::lock_guard<std::mutex> lock(im.mu);
  std::istream& is = im.bin;
  is.clear();
  is.seekg(static_cast<std::streamoff>(im.offsets[static_cast<std::size_t>(i)]));

  Sample s;
  const std::uint32_t seq_len = get_u32(is);
  s.sequence.resize(seq_len);
  is.read(s.sequence.data(), seq_len);
  s.frame = static_cast<int>(get_u32(is));
  std::uint8_t flags = 0;
  is.read(reinterpret_cast<char*>(&flags), 1);
  s.has_gt = flags & 1;
  double kv[4];
  get_f64s(is, kv, 4);
  s.k = {kv[0], kv[1], kv[2], kv[3], im.width, im.height};
  std::array<double, 6> m{};
  get_f64s(is, m.data(), 6);
  s.gt_motion = EulerPose::from_array(m);
  get_f64s(is, s.gt_v0.data(), 3);
  s.imu.angular_velocity = Tensor({ImuWindow::kRows, 3});
  s.imu.linear_acceleration = Tensor({ImuWindow::kRows, 3});
  s.imu.gap_filled = flags & 2;
  get_f64s(is, s.imu.angular_velocity.data.data(), 60);
  get_f64s(is, s.imu.linear_acceleration.data.data(), 60);

  const std::size_t hw3 = static_cast<std::size_t>(im.width) * im.height * 3;
  const std::size_t hw = static_cast<std::size_t>(im.width) * im.height;
  s.source_rgb = Tensor({3, im.height, im.width});
  s.target_rgb = Tensor({3, im.height, im.width});
  s.source_depth = Tensor({im.height, im.width});
  auto read_rgb = [&](Tensor& t) {
    if (im.f32) {
      std::vector<float> buf(hw3);
      is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(hw3 * 4));
      for (std::size_t j = 0; j < hw3; ++j) t.data[j] = buf[j];
    } else {
      std::vector<std::uint8_t> buf(hw3);
      is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(hw3));
      for (std::size_t j = 0; j < hw3; ++j) t.data[j] = buf[j] / 255.0;
    }
  };
  read_rgb(s.source_rgb);
  read_rgb(s.target_rgb);
  if (im.f32) {
    std::vector<float> buf(hw);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(hw * 4));
    for (std::size_t j = 0; j < hw; ++j) s.source_depth.data[j] = buf[j];
  } else {
    std::vector<std::uint16_t> buf(hw);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(hw * 2));
    for (std::size_t j = 0; j < hw; ++j) s.source_depth.data[j] = buf[j] / 256.0;
  }
  if (!is) throw DataError("truncated container record in " + im.prefix + ".bin");
  return s;
}

// --- prefetcher ----------------------------------------------------------------

struct Prefetcher::Impl {
  const DatasetReader* reader;
  std::vector<int> order;
  std::size_t produced = 0, consumed = 0;
  int capacity;
  std::deque<Sample> queue;
  std::mutex mu;
  std::condition_variable cv_full, cv_empty;
  std::thread worker;
  bool stop = false;

  void run() {
    while (true) {
      std::unique_lock<std::mutex> lock(mu);
      cv_full.wait(lock, [&] { return stop || queue.size() < static_cast<std::size_t>(capacity); });
      if (stop || produced >= order.size()) return;
      const int idx = order[produced];
      lock.unlock();
      Sample s = reader->get(idx);
      lock.lock();
      queue.push_back(std::move(s));
      ++produced;
      cv_empty.notify_one();
      if (produced >= order.size()) return;
    }
  }
};

Prefetcher::Prefetcher(const DatasetReader& reader, std::vector<int> order, int capacity)
    : impl_(std::make_unique<Impl>()) {
  impl_->reader = &reader;
  impl_->order = std::move(order);
  impl_->capacity = std::max(1, capacity);
  impl_->worker = std::thread([this] { impl_->run(); });
}

Prefetcher::~Prefetcher() {
  {
    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->stop = true;
  }
  impl_->cv_full.notify_all();
  if (impl_->worker.joinable()) impl_->worker.join();
}

Sample Prefetcher::next() {
  std::unique_lock<std::mutex> lock(impl_->mu);
  if (impl_->consumed >= impl_->order.size())
    throw std::logic_error("Prefetcher: order exhausted");
  impl_->cv_empty.wait(lock, [&] { return !impl_->queue.empty(); });
  Sample s = std::move(impl_->queue.front());
  impl_->queue.pop_front();
  ++impl_->consumed;
  impl_->cv_full.notify_one();
  return s;
}

// --- KITTI layout ------------------------------------------------------------

const std::map<int, RawMapping>& kitti_raw_mapping() {
  // Published correspondence between odometry sequences and raw drives.
  static const std::map<int, RawMapping> table = {
      {0, {"2011_10_03", "0027", 0, 4540}},  {1, {"2011_10_03", "0042", 0, 1100}},
      {2, {"2011_10_03", "0034", 0, 4660}},  {3, {"2011_09_26", "0067", 0, 800}},
      {4, {"2011_09_30", "0016", 0, 270}},   {5, {"2011_09_30", "0018", 0, 2760}},
      {6, {"2011_09_30", "0020", 0, 1100}},  {7, {"2011_09_30", "0027", 0, 1100}},
      {8, {"2011_09_30", "0028", 1100, 5170}}, {9, {"2011_09_30", "0033", 0, 1590}},
      {10, {"2011_09_30", "0034", 0, 1200}},
  };
  return table;
}

CameraIntrinsics parse_kitti_calib(const std::string& calib_path, int image_width,
                                   int image_height) {
  std::ifstream is(calib_path);
  if (!is) throw DataError("cannot open calibration: " + calib_path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("P2:", 0) != 0) continue;
    std::istringstream ls(line.substr(3));
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (v.size() != 12) throw DataError("malformed P2 row in " + calib_path);
    CameraIntrinsics k;
    k.fx = v[0];
    k.cx = v[2];
    k.fy = v[5];
    k.cy = v[6];
    k.width = image_width;
    k.height = image_height;
    return k;
  }
  throw DataError("no P2 row in " + calib_path);
}

std::vector<double> load_kitti_times(const std::string& times_path) {
  std::ifstream is(times_path);
  if (!is) throw DataError("cannot open times file: " + times_path);
  std::vector<double> out;
  double t;
  while (is >> t) out.push_back(t);
  return out;
}

namespace {
// days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}
}  // namespace

std::vector<double> load_kitti_timestamps(const std::string& timestamps_path) {
  std::ifstream is(timestamps_path);
  if (!is) throw DataError("cannot open timestamps: " + timestamps_path);
  std::vector<double> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.size() < 19) continue;
    int y, mo, d, h, mi;
    double sec;
    if (std::sscanf(line.c_str(), "%d-%d-%d %d:%d:%lf", &y, &mo, &d, &h, &mi, &sec) != 6)
      throw DataError("malformed timestamp line in " + timestamps_path + ": " + line);
    out.push_back(static_cast<double>(days_from_civil(y, mo, d)) * 86400.0 + h * 3600.0 +
                  mi * 60.0 + sec);
  }
  return out;
}

std::vector<ImuRecord> load_oxts_stream(const std::string& oxts_dir) {
  const std::string ts_path = oxts_dir + "/timestamps.txt";
  std::vector<double> times = load_kitti_timestamps(ts_path);
  std::vector<ImuRecord> out;
  out.reserve(times.size());
  char name[64];
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::snprintf(name, sizeof(name), "/data/%010zu.txt", i);
    std::ifstream is(oxts_dir + name);
    if (!is) throw DataError("missing oxts record: " + oxts_dir + name);
    std::vector<double> v;
    double x;
    while (is >> x) v.push_back(x);
    if (v.size() < 23) throw DataError("short oxts record: " + oxts_dir + name);
    ImuRecord r;
    r.t = times[i];
    r.a = {v[11], v[12], v[13]};  // ax, ay, az
    r.w = {v[17], v[18], v[19]};  // wx, wy, wz
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const ImuRecord& a, const ImuRecord& b) { return a.t < b.t; });
  return out;
}

KittiSequence open_kitti_sequence(const KittiPaths& paths, int sequence) {
  char seq_name[8];
  std::snprintf(seq_name, sizeof(seq_name), "%02d", sequence);
  const std::string seq_dir = paths.odometry_root + "/sequences/" + seq_name;

  KittiSequence seq;
  seq.sequence = sequence;
  const std::vector<double> rel_times = load_kitti_times(seq_dir + "/times.txt");
  seq.frame_count = static_cast<int>(rel_times.size());

  const auto& mapping = kitti_raw_mapping().at(sequence);
  const std::string drive_dir =
      paths.raw_root + "/" + mapping.date + "/" + mapping.date + "_drive_" + mapping.drive;
  const std::vector<double> sync_times =
      load_kitti_timestamps(drive_dir + "_sync/image_02/timestamps.txt");
  if (static_cast<int>(sync_times.size()) < mapping.start + seq.frame_count)
    throw DataError("raw sync timestamps shorter than sequence " + std::string(seq_name));
  for (int j = 0; j < seq.frame_count; ++j)
    seq.frame_times.push_back(sync_times[static_cast<std::size_t>(mapping.start + j)]);

  seq.imu = load_oxts_stream(drive_dir + "_extract/oxts");

  char frame_name[32];
  for (int j = 0; j < seq.frame_count; ++j) {
    std::snprintf(frame_name, sizeof(frame_name), "/%06d.png", j);
    seq.image_paths.push_back(seq_dir + "/image_2" + frame_name);
    seq.depth_paths.push_back(paths.depth_root + "/" + seq_name + frame_name);
  }

  // Raw-image size fixes the intrinsics scaling for preprocessing.
  Tensor first = read_image_rgb8(seq.image_paths.at(0));
  CameraIntrinsics raw_k = parse_kitti_calib(seq_dir + "/calib.txt", first.dim(2), first.dim(1));
  seq.k = preprocess_intrinsics(raw_k);
  return seq;
}

namespace {

// Sparse-depth-aware downscale: averages the valid entries inside each
// output pixel's source box, leaving pixels with no valid support at 0.
Tensor resize_depth_valid(const Tensor& depth, int out_h, int out_w) {
  const int h = depth.dim(0), w = depth.dim(1);
  Tensor out({out_h, out_w});
  for (int r = 0; r < out_h; ++r) {
    const int y0 = r * h / out_h;
    const int y1 = std::max(y0 + 1, (r + 1) * h / out_h);
    for (int c = 0; c < out_w; ++c) {
      const int x0 = c * w / out_w;
      const int x1 = std::max(x0 + 1, (c + 1) * w / out_w);
      double acc = 0.0;
      int cnt = 0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          const double v = depth.data[static_cast<std::size_t>(y) * w + x];
          if (v > 0.0) {
            acc += v;
            ++cnt;
          }
        }
      out.data[static_cast<std::size_t>(r) * out_w + c] = cnt ? acc / cnt : 0.0;
    }
  }
  return out;
}

}  // namespace

Sample load_kitti_pair(const KittiSequence& seq, int frame) {
  if (frame < 0 || frame + 1 >= seq.frame_count)
    throw std::out_of_range("load_kitti_pair: frame out of range");

  Sample s;
  Tensor raw_src = read_image_rgb8(seq.image_paths[static_cast<std::size_t>(frame)]);
  Tensor raw_tgt = read_image_rgb8(seq.image_paths[static_cast<std::size_t>(frame + 1)]);
  s.source_rgb = preprocess_image(raw_src);
  s.target_rgb = preprocess_image(raw_tgt);

  Tensor raw_depth = read_image_gray16(seq.depth_paths[static_cast<std::size_t>(frame)]);
  for (double& v : raw_depth.data) v /= 256.0;
  // Same geometry as the RGB path: resize to reference, crop bottom, scale.
  if (raw_depth.dim(0) != kRawHeight || raw_depth.dim(1) != kRawWidth)
    raw_depth = resize_depth_valid(raw_depth, kRawHeight, kRawWidth);
  Tensor cropped({kCropHeight, kRawWidth});
  const int top = kRawHeight - kCropHeight;
  for (int r = 0; r < kCropHeight; ++r)
    std::copy_n(raw_depth.data.data() + static_cast<std::size_t>(top + r) * kRawWidth, kRawWidth,
                cropped.data.data() + static_cast<std::size_t>(r) * kRawWidth);
  s.source_depth = resize_depth_valid(cropped, kNetHeight, kNetWidth);

  s.k = seq.k;
  s.imu = build_imu_window(seq.imu, seq.frame_times[static_cast<std::size_t>(frame)]);
  char seq_name[8];
  std::snprintf(seq_name, sizeof(seq_name), "%02d", seq.sequence);
  s.sequence = seq_name;
  s.frame = frame;
  return s;
}

PrepareStats prepare_kitti_sequence(const KittiPaths& paths, int sequence,
                                    const std::string& out_prefix) {
  KittiSequence seq = open_kitti_sequence(paths, sequence);
  PrepareStats stats;
  DatasetWriter writer(out_prefix, /*f32_pixels=*/false);
  for (int j = 0; j + 1 < seq.frame_count; ++j) {
    try {
      writer.add(load_kitti_pair(seq, j));
      ++stats.written;
    } catch (const DegenerateFrameError&) {
      stats.skipped_frames.push_back(j);
    }
  }
  writer.finish();
  return stats;
}

}  // namespace viol
