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

#include <stdexcept>

namespace viol {

/// A frame that cannot be processed (all-invalid depth, empty valid mask,
/// insufficient sensor coverage). Callers running over sequences catch this
/// and skip the frame.
struct DegenerateFrameError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable or malformed external data (files, directory layouts).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace viol
