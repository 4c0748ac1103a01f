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

#include "viol/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "viol/errors.hpp"

namespace viol {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoi(trim(tok)));
  return out;
}

std::string join_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile f;
  std::istringstream is(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw DataError("config line " + std::to_string(line_no) + ": empty key");
    f.set(section.empty() ? key : section + "." + key, value);
  }
  return f;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config: " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return parse(os.str());
}

std::string ConfigFile::serialize() const {
  std::string out;
  std::string current_section;
  bool first = true;
  for (const auto& [k, v] : entries_) {
    const auto dot = k.find('.');
    const std::string section = dot == std::string::npos ? "" : k.substr(0, dot);
    const std::string key = dot == std::string::npos ? k : k.substr(dot + 1);
    if (section != current_section || first) {
      if (!first) out += "\n";
      if (!section.empty()) out += "[" + section + "]\n";
      current_section = section;
      first = false;
    }
    out += key + " = " + v + "\n";
  }
  return out;
}

void ConfigFile::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write config: " + path);
  os << serialize();
}

std::optional<std::string> ConfigFile::get(const std::string& qualified_key) const {
  for (const auto& [k, v] : entries_)
    if (k == qualified_key) return v;
  return std::nullopt;
}

void ConfigFile::set(const std::string& qualified_key, const std::string& value) {
  for (auto& [k, v] : entries_)
    if (k == qualified_key) {
      v = value;
      return;
    }
  entries_.emplace_back(qualified_key, value);
}

RunConfig RunConfig::from_file(const ConfigFile& f) {
  RunConfig c;
  auto str = [&](const char* k, std::string& dst) {
    if (auto v = f.get(k)) dst = *v;
  };
  auto dbl = [&](const char* k, double& dst) {
    if (auto v = f.get(k)) dst = std::stod(*v);
  };
  auto i64 = [&](const char* k, std::int64_t& dst) {
    if (auto v = f.get(k)) dst = std::stoll(*v);
  };
  auto i32 = [&](const char* k, int& dst) {
    if (auto v = f.get(k)) dst = std::stoi(*v);
  };

  str("data.train", c.train_data);
  str("data.val", c.val_data);
  str("data.test", c.test_data);
  str("data.kitti_odometry", c.kitti_odometry);
  str("data.kitti_raw", c.kitti_raw);
  str("data.kitti_depth", c.kitti_depth);
  str("data.out_dir", c.out_dir);

  dbl("model.width_mult", c.width_mult);
  i32("model.hypotheses", c.hypotheses);
  if (auto v = f.get("model.level_factors")) c.level_factors = parse_int_list(*v);
  if (auto v = f.get("model.refinement_depths")) c.refinement_depths = parse_int_list(*v);
  dbl("model.lambda", c.lambda);

  i32("train.batch_size", c.batch_size);
  i64("train.iterations", c.iterations);
  dbl("train.lr", c.lr);
  dbl("train.momentum1", c.momentum1);
  dbl("train.momentum2", c.momentum2);
  dbl("train.gamma", c.gamma);
  i64("train.decay_interval", c.decay_interval);
  i32("train.val_interval", c.val_interval);
  i32("train.val_max_samples", c.val_max_samples);
  if (auto v = f.get("train.seed")) c.seed = std::stoull(*v);
  return c;
}

ConfigFile RunConfig::to_file() const {
  ConfigFile f;
  f.set("data.train", train_data);
  f.set("data.val", val_data);
  f.set("data.test", test_data);
  f.set("data.kitti_odometry", kitti_odometry);
  f.set("data.kitti_raw", kitti_raw);
  f.set("data.kitti_depth", kitti_depth);
  f.set("data.out_dir", out_dir);
  f.set("model.width_mult", fmt_double(width_mult));
  f.set("model.hypotheses", std::to_string(hypotheses));
  f.set("model.level_factors", join_int_list(level_factors));
  f.set("model.refinement_depths", join_int_list(refinement_depths));
  f.set("model.lambda", fmt_double(lambda));
  f.set("train.batch_size", std::to_string(batch_size));
  f.set("train.iterations", std::to_string(iterations));
  f.set("train.lr", fmt_double(lr));
  f.set("train.momentum1", fmt_double(momentum1));
  f.set("train.momentum2", fmt_double(momentum2));
  f.set("train.gamma", fmt_double(gamma));
  f.set("train.decay_interval", std::to_string(decay_interval));
  f.set("train.val_interval", std::to_string(val_interval));
  f.set("train.val_max_samples", std::to_string(val_max_samples));
  f.set("train.seed", std::to_string(seed));
  return f;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.width_mult = width_mult;
  m.hypotheses = hypotheses;
  m.lambda = lambda;
  m.factors = level_factors;
  m.extra_depth = refinement_depths;
  return m;
}

AdamConfig RunConfig::adam_config() const {
  AdamConfig a;
  a.lr = lr;
  a.momentum1 = momentum1;
  a.momentum2 = momentum2;
  a.gamma = gamma;
  a.decay_interval = decay_interval;
  return a;
}

}  // namespace viol
