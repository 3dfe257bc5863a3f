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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oaas/common/time.h"
#include "oaas/enforcement/planning.h"
#include "oaas/sim/trace.h"

namespace oaas::enforcement {

enum class ControllerPhase { kMonitoring, kChangeDetection, kConfigurationEvaluation, kReconfiguration };

std::string_view ControllerPhaseName(ControllerPhase phase);

struct ControllerConfig {
  Duration interval = FromSeconds(10.0);
  double drift_threshold = 0.15;
  double error_threshold = 0.01;
  double headroom = 0.0;
  CapacityEstimatorConfig estimator;
};

struct ReconfigurationAction {
  std::string class_name;
  std::string function;
  int from = 0;
  int to = 0;
  std::string reason;
  ThroughputPlan plan;
};

/// Throughput controller of one function. Holds the applied plan and the
/// capacity estimate that produced it.
struct ControllerState {
  std::string class_name;
  std::string function;
  ControllerConfig config;
  CapacityEstimator estimator;
  ThroughputPlan plan{};
  ControllerPhase phase = ControllerPhase::kMonitoring;
  /// Phases entered during the most recent step, in order.
  std::vector<ControllerPhase> last_phases{};
  uint64_t steps = 0;
  uint64_t reconfigurations = 0;

  /// Initial plan from the bootstrap prior (config.estimator.prior).
  static ControllerState Create(std::string class_name, std::string function,
                                ControllerConfig config, double guaranteed_rate, double cpu,
                                int concurrency_limit);
};

/// One adjustment-interval tick: Monitoring folds in `window`; ChangeDetection
/// fires on capacity drift beyond the threshold, on an error ratio above its
/// threshold, or when the applied plan no longer covers the guaranteed rate;
/// ConfigurationEvaluation re-plans and checks that the pool fits in
/// `available_cores`; Reconfiguration returns the resize. Returns nullopt when
/// nothing changes. Throws InfeasiblePlanError (the prior plan stays applied).
std::optional<ReconfigurationAction> ControlStep(ControllerState& state, const MetricWindow& window,
                                                 double available_cores,
                                                 sim::Trace* trace = nullptr,
                                                 SimTime now = SimTime(0));

}  // namespace oaas::enforcement
