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
#include <utility>
#include <vector>

#include "oaas/enforcement/planning.h"
#include "oaas/harness/metrics.h"
#include "oaas/harness/scenario.h"

namespace oaas::harness {

struct RunOptions {
  bool trace = false;
  /// Cluster allocation audits after every change; slow on long runs.
  bool audit = false;
};

struct ServiceResult {
  std::string class_name;
  MetricsReport report;
};

struct ExperimentResult {
  std::string scenario;
  /// One entry per deployed service, in deployment order.
  std::vector<ServiceResult> services;
  /// All services merged into one report.
  MetricsReport combined;
  int replicas = 0;
  int shards = 0;
  /// Mean up-time fraction of the failure targets; 1 without injection.
  double shard_uptime = 1.0;
  uint64_t shard_kills = 0;
  uint64_t audits = 0;
  uint64_t events = 0;
  std::string trace;
};

/// Runs one scenario end to end: deploy, create objects, warm up, measure,
/// drain. Throws ConfigError for a scenario that does not fit its manifest.
ExperimentResult RunExperiment(const ScenarioConfig& scenario, const RunOptions& options = {});

/// Empty when the run satisfies the scenario thresholds, else one message
/// per violation.
std::vector<std::string> CheckThresholds(const ScenarioConfig& scenario,
                                         const ExperimentResult& result);

struct PolicyRun {
  enforcement::PolicyKind policy;
  ExperimentResult result;
};

/// Runs the same scenario (same seed) once per policy.
std::vector<PolicyRun> ComparePolicies(const ScenarioConfig& scenario,
                                       const std::vector<enforcement::PolicyKind>& policies,
                                       const RunOptions& options = {});
std::string FormatComparison(const std::vector<PolicyRun>& runs);

struct RefinementRound {
  int pods = 0;
  int concurrency = 0;
  double achieved_rps = 0.0;
  double error_ratio = 0.0;
  enforcement::ManualRefinement::Phase phase = enforcement::ManualRefinement::Phase::kDone;
};

struct RefinementResult {
  double target = 0.0;
  std::vector<RefinementRound> rounds;
  /// Rounds the operator needed to first meet the target.
  int rounds_to_target = 0;
  std::optional<std::pair<int, int>> best;
};

struct RefinementOptions {
  /// Each round load-tests the deployment at probe_factor x target so the
  /// measured rate is the deployment's capacity, not the offered rate.
  double probe_factor = 1.2;
  /// A round matches the objective when measured >= target * meet_fraction.
  double meet_fraction = 1.0;
  int max_rounds = 30;
  /// Stop once the target is first met (phase one only).
  bool stop_at_target = false;
};

/// Operator-driven tuning: each round redeploys the scenario under the
/// manual policy with the pods and per-container concurrency proposed by the
/// refinement procedure and feeds back the measured throughput.
RefinementResult RunManualRefinement(const ScenarioConfig& scenario, double target,
                                     const RefinementOptions& options = {});

struct SweepPoint {
  int services = 0;
  std::vector<Aggregates> per_service;
  double max_error_ratio = 0.0;
  double min_achieved_fraction = 0.0;
};

/// Runs the scenario with 1..max_services copies of the class.
std::vector<SweepPoint> RunSweep(const ScenarioConfig& scenario, int max_services,
                                 const RunOptions& options = {});
std::string FormatSweep(const std::vector<SweepPoint>& points, double target_rps);

}  // namespace oaas::harness
