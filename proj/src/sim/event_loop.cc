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

#include "oaas/sim/event_loop.h"

#include <algorithm>

#include <fmt/format.h>

#include "oaas/common/errors.h"

namespace oaas::sim {

EventHandle EventLoop::Schedule(SimTime at, Callback callback) {
  if (at < now_) {
    throw PastTimestampError(
        fmt::format("cannot schedule at {}ns, clock is at {}ns", at.count(), now_.count()));
  }
  const uint64_t seq = next_seq_++;
  heap_.push_back(Entry{at, seq, std::move(callback)});
  std::push_heap(heap_.begin(), heap_.end(), Later{});
  live_.insert(seq);
  return EventHandle{seq};
}

bool EventLoop::Cancel(EventHandle handle) {
  if (!handle.valid() || live_.erase(handle.id) == 0) return false;
  cancelled_.insert(handle.id);
  return true;
}

EventLoop::Entry EventLoop::PopTop() {
  std::pop_heap(heap_.begin(), heap_.end(), Later{});
  Entry e = std::move(heap_.back());
  heap_.pop_back();
  return e;
}

bool EventLoop::Step() {
  while (!heap_.empty()) {
    Entry e = PopTop();
    if (cancelled_.erase(e.seq) != 0) continue;
    live_.erase(e.seq);
    now_ = e.at;
    ++dispatched_;
    e.callback();
    return true;
  }
  return false;
}

void EventLoop::RunUntil(SimTime until) {
  while (!heap_.empty()) {
    if (cancelled_.erase(heap_.front().seq) != 0) {
      PopTop();
      continue;
    }
    if (heap_.front().at > until) break;
    Step();
  }
  if (now_ < until) now_ = until;
}

bool EventLoop::RunUntil(const std::function<bool()>& stop) {
  if (stop()) return true;
  while (Step()) {
    if (stop()) return true;
  }
  return false;
}

}  // namespace oaas::sim
