// Copyright 2026 The BurnSeer Authors. All Rights Reserved.
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

#include <cmath>
#include <cstdint>

namespace burnseer {

/// Timestamps are stored as integer milliseconds since the epoch so window
/// boundaries compare exactly.
using TimestampMs = std::int64_t;

/// Seconds (possibly fractional) to milliseconds, rounding half up.
inline TimestampMs to_ms(double seconds) {
  return static_cast<TimestampMs>(std::floor(seconds * 1000.0 + 0.5));
}

inline double to_seconds(TimestampMs ms) { return static_cast<double>(ms) / 1000.0; }

}  // namespace burnseer
