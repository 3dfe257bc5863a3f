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

#include "oaas/sim/failure.h"

#include <algorithm>
#include <cmath>

namespace oaas::sim {

FailureInjector::FailureInjector(EventLoop& loop, Cluster& cluster, FailureConfig config,
                                 const RandomSource& random)
    : loop_(loop), cluster_(cluster), config_(config), random_(random) {}

Duration FailureInjector::SampleGap(Rng& rng) const {
  const double gap = rng.Normal(static_cast<double>(config_.mtbf.count()),
                                static_cast<double>(config_.jitter_stddev.count()));
  return Duration(static_cast<int64_t>(std::max(0.0, std::floor(gap + 0.5))));
}

void FailureInjector::AddTarget(ContainerId id) {
  if (targets_.contains(id)) return;
  auto [it, inserted] =
      targets_.emplace(id, Target{random_.Stream("failure", static_cast<uint64_t>(id)), {}});
  auto& st = stats_[id];
  st.registered_at = loop_.Now();
  Duration first;
  if (config_.random_phase) {
    first = Duration(static_cast<int64_t>(
        it->second.rng.Uniform(0.0, static_cast<double>(config_.mtbf.count()))));
  } else {
    first = SampleGap(it->second.rng);
  }
  ScheduleKill(id, first);
}

void FailureInjector::RemoveTarget(ContainerId id) {
  auto it = targets_.find(id);
  if (it == targets_.end()) return;
  loop_.Cancel(it->second.next);
  targets_.erase(it);
}

void FailureInjector::ScheduleKill(ContainerId id, Duration gap) {
  auto& t = targets_.at(id);
  t.next = loop_.ScheduleAfter(gap, [this, id] { DoKill(id); });
}

void FailureInjector::DoKill(ContainerId id) {
  if (!targets_.contains(id)) return;
  if (!cluster_.Exists(id)) {
    targets_.erase(id);
    return;
  }
  auto& st = stats_[id];
  ++st.kills;
  st.down = true;
  st.down_since = loop_.Now();
  st.last_kill = loop_.Now();
  cluster_.Kill(id);
  if (hook_) hook_(id, true);
  auto& t = targets_.at(id);
  t.next = loop_.ScheduleAfter(config_.recovery_time, [this, id] { DoRecover(id); });
}

void FailureInjector::DoRecover(ContainerId id) {
  if (!targets_.contains(id)) return;
  cluster_.Recover(id, config_.restart_warmup);
  auto finish = [this, id] {
    if (!targets_.contains(id)) return;
    auto& st = stats_[id];
    ++st.recoveries;
    st.down = false;
    st.downtime += loop_.Now() - st.down_since;
    if (hook_) hook_(id, false);
    auto& t = targets_.at(id);
    ScheduleKill(id, SampleGap(t.rng));
  };
  if (config_.restart_warmup.count() <= 0) {
    finish();
  } else {
    targets_.at(id).next = loop_.ScheduleAfter(config_.restart_warmup, std::move(finish));
  }
}

double FailureInjector::MeanUptimeFraction() const {
  if (stats_.empty()) return 1.0;
  const auto now = loop_.Now();
  double sum = 0.0;
  for (const auto& [id, st] : stats_) {
    const auto lifetime = now - st.registered_at;
    if (lifetime.count() <= 0) {
      sum += 1.0;
      continue;
    }
    auto down = st.downtime;
    if (st.down) down += now - st.down_since;
    sum += 1.0 - static_cast<double>(down.count()) / static_cast<double>(lifetime.count());
  }
  return sum / static_cast<double>(stats_.size());
}

}  // namespace oaas::sim
