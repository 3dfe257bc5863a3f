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

#include <functional>
#include <map>

#include "oaas/common/time.h"
#include "oaas/sim/cluster.h"
#include "oaas/sim/random.h"

namespace oaas::sim {

struct FailureConfig {
  Duration mtbf = FromSeconds(180.0);
  Duration jitter_stddev = FromSeconds(18.0);
  /// Kill-to-restart time; 10.76s makes a 180s MTBF yield 94.36% uptime.
  Duration recovery_time = FromSeconds(10.76);
  /// Warming time after the restart; zero keeps downtime == recovery_time.
  Duration restart_warmup{0};
  /// Draw the first failure uniformly in [0, mtbf) instead of at mtbf + jitter,
  /// so targets do not fail in lockstep at the start of a run.
  bool random_phase = true;
};

/// Up time / down time bookkeeping for one target.
struct TargetStats {
  uint64_t kills = 0;
  uint64_t recoveries = 0;
  Duration downtime{0};
  SimTime registered_at{0};
  SimTime down_since{0};
  bool down = false;
  SimTime last_kill{-1};
};

/// Kills each registered container independently. After a kill the target is
/// down for recovery_time (+ restart_warmup); the next kill follows the
/// recovery by mtbf + N(0, jitter), floored at zero.
class FailureInjector {
 public:
  using Hook = std::function<void(ContainerId, bool killed)>;

  FailureInjector(EventLoop& loop, Cluster& cluster, FailureConfig config,
                  const RandomSource& random);

  void AddTarget(ContainerId id);
  void RemoveTarget(ContainerId id);
  /// Called after each kill (killed=true) and recovery (killed=false).
  void set_hook(Hook hook) { hook_ = std::move(hook); }

  const FailureConfig& config() const { return config_; }
  const std::map<ContainerId, TargetStats>& stats() const { return stats_; }
  /// Fraction of registered time each target spent up, averaged over targets.
  double MeanUptimeFraction() const;

 private:
  struct Target {
    Rng rng;
    EventHandle next;
  };

  void ScheduleKill(ContainerId id, Duration gap);
  void DoKill(ContainerId id);
  void DoRecover(ContainerId id);
  Duration SampleGap(Rng& rng) const;

  EventLoop& loop_;
  Cluster& cluster_;
  FailureConfig config_;
  const RandomSource& random_;
  Hook hook_;
  std::map<ContainerId, Target> targets_;
  std::map<ContainerId, TargetStats> stats_;
};

}  // namespace oaas::sim
