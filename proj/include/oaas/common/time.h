// Copyright 2026 The oaas-mini Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace oaas {

/// Simulated durations and instants share one integer-nanosecond
/// representation; an instant is the duration since simulation start.
using Duration = std::chrono::nanoseconds;
using SimTime = std::chrono::nanoseconds;

/// Converts fractional seconds to nanoseconds, rounding half-up.
inline Duration FromSeconds(double seconds) {
  return Duration(static_cast<int64_t>(std::floor(seconds * 1e9 + 0.5)));
}

inline Duration FromMillis(double millis) { return FromSeconds(millis / 1e3); }
inline Duration FromMicros(double micros) { return FromSeconds(micros / 1e6); }

inline double ToSeconds(Duration d) { return static_cast<double>(d.count()) / 1e9; }
inline double ToMillis(Duration d) { return static_cast<double>(d.count()) / 1e6; }

}  // namespace oaas
