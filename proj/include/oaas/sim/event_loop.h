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

#include <cstdint>
#include <functional>
#include <unordered_set>
#include <vector>

#include "oaas/common/time.h"

namespace oaas::sim {

struct EventHandle {
  uint64_t id = 0;
  bool valid() const { return id != 0; }
};

/// Single-threaded discrete-event loop. Events fire in timestamp order;
/// equal timestamps fire in scheduling order.
class EventLoop {
 public:
  using Callback = std::function<void()>;

  SimTime Now() const { return now_; }

  /// Throws PastTimestampError when `at` precedes the current time.
  EventHandle Schedule(SimTime at, Callback callback);
  EventHandle ScheduleAfter(Duration delay, Callback callback) {
    return Schedule(now_ + delay, std::move(callback));
  }

  /// Returns false when the event already fired or was cancelled.
  bool Cancel(EventHandle handle);

  /// Dispatches every event with timestamp <= `until`, then sets the clock to `until`.
  void RunUntil(SimTime until);

  /// Dispatches events until `stop` holds (checked before the first event and
  /// after each one) or the queue drains. Returns whether `stop` held.
  bool RunUntil(const std::function<bool()>& stop);

  /// Dispatches the next live event, if any.
  bool Step();

  size_t pending() const { return heap_.size() - cancelled_.size(); }
  uint64_t dispatched() const { return dispatched_; }

 private:
  struct Entry {
    SimTime at;
    uint64_t seq;
    Callback callback;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  Entry PopTop();

  SimTime now_{0};
  uint64_t next_seq_ = 1;
  uint64_t dispatched_ = 0;
  std::vector<Entry> heap_;
  std::unordered_set<uint64_t> cancelled_;
  std::unordered_set<uint64_t> live_;
};

}  // namespace oaas::sim
