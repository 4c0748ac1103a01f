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

#include <cstdint>
#include <string>
#include <vector>

namespace viol {

struct GradCheckResult {
  std::string op;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  int checks = 0;
  bool pass = false;
  std::string worst_slot;  // parameter/input owning the max error
};

/// Relative error with an absolute floor so near-zero pairs compare sanely.
double gradcheck_rel_err(double analytic, double numeric, double floor = 1e-8);

/// Every finite-difference suite at reduced width: op-level checks at 1e-6
/// and chained/pipeline checks at 1e-4, matching the library's contracts.
std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed);

}  // namespace viol
