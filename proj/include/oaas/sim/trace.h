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

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "oaas/common/time.h"

namespace oaas::sim {

struct TraceRecord {
  SimTime time;
  std::string kind;
  std::string entity;
  std::string detail;
};

/// Optional event log. Components check enabled() before formatting so a
/// disabled trace costs one branch per call site.
class Trace {
 public:
  explicit Trace(bool enabled = false) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  void set_enabled(bool enabled) { enabled_ = enabled; }

  void Record(SimTime time, std::string kind, std::string entity, std::string detail) {
    if (enabled_) records_.push_back({time, std::move(kind), std::move(entity), std::move(detail)});
  }

  const std::vector<TraceRecord>& records() const { return records_; }
  void Clear() { records_.clear(); }

  /// One `timestamp kind entity detail` line per record; timestamps in seconds.
  void Write(std::ostream& out) const;
  std::string Dump() const;

 private:
  bool enabled_;
  std::vector<TraceRecord> records_;
};

/// Returns the value of `key=` in a space-separated detail string, or "".
std::string_view DetailField(std::string_view detail, std::string_view key);

}  // namespace oaas::sim
