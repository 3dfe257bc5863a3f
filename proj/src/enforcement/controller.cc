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


#include "oaas/enforcement/controller.h"

#include <cmath>

#include <fmt/format.h>

#include "oaas/common/errors.h"

namespace oaas::enforcement {

std::string_view ControllerPhaseName(ControllerPhase phase) {
  switch (phase) {
    case ControllerPhase::kMonitoring:
      return "Monitoring";
    case ControllerPhase::kChangeDetection:
      return "ChangeDetection";
    case ControllerPhase::kConfigurationEvaluation:
      return "ConfigurationEvaluation";
    case ControllerPhase::kReconfiguration:
      return "Reconfiguration";
  }
  return "Monitoring";
}

ControllerState ControllerState::Create(std::string class_name, std::string function,
                                        ControllerConfig config, double guaranteed_rate,
                                        double cpu, int concurrency_limit) {
  ControllerState s{std::move(class_name), std::move(function), config,
                    CapacityEstimator(config.estimator, concurrency_limit)};
  s.plan = PlanThroughput(guaranteed_rate, s.estimator.estimate(), config.headroom, cpu,
                          concurrency_limit);
  return s;
}

std::optional<ReconfigurationAction> ControlStep(ControllerState& state, const MetricWindow& window,
                                                 double available_cores, sim::Trace* trace,
                                                 SimTime now) {
  state.last_phases.clear();
  ++state.steps;
  auto enter = [&](ControllerPhase p) {
    state.phase = p;
    state.last_phases.push_back(p);
  };

  enter(ControllerPhase::kMonitoring);
  const double kappa = state.estimator.Observe(window);

  enter(ControllerPhase::kChangeDetection);
  const auto& plan = state.plan;
  const double planned = plan.per_container_capacity;
  const double required = plan.guaranteed_rate * (1.0 + state.config.headroom);
  std::string reason;
  if (planned > 0 && std::abs(kappa - planned) / planned > state.config.drift_threshold) {
    reason = "drift";
  } else if (window.ErrorRatio() > state.config.error_threshold) {
    reason = "errors";
  } else if (plan.warm_containers * kappa < required * (1.0 - 1e-12)) {
    reason = "guarantee";
  }
  if (reason.empty()) {
    enter(ControllerPhase::kMonitoring);
    return std::nullopt;
  }

  enter(ControllerPhase::kConfigurationEvaluation);
  auto next = PlanThroughput(plan.guaranteed_rate, kappa, state.config.headroom, plan.cpu,
                             plan.concurrency_limit);
  if (next.warm_containers * next.cpu > available_cores + 1e-9) {
    enter(ControllerPhase::kMonitoring);
    throw InfeasiblePlanError(fmt::format(
        "{}.{} needs {} cores for {} containers, only {} available", state.class_name,
        state.function, next.warm_containers * next.cpu, next.warm_containers, available_cores));
  }
  const int from = plan.warm_containers;
  state.plan = next;
  if (next.warm_containers == from) {
    // Capacity re-baselined without a resize.
    enter(ControllerPhase::kMonitoring);
    return std::nullopt;
  }

  enter(ControllerPhase::kReconfiguration);
  ++state.reconfigurations;
  ReconfigurationAction action{state.class_name, state.function, from, next.warm_containers,
                               reason, next};
  if (trace && trace->enabled()) {
    trace->Record(now, "reconfig", fmt::format("class={}", state.class_name),
                  fmt::format("fn={} from={} to={} reason={}", state.function, from,
                              next.warm_containers, reason));
  }
  enter(ControllerPhase::kMonitoring);
  return action;
}

}  // namespace oaas::enforcement
