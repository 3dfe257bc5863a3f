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
#include <optional>
#include <string>
#include <string_view>

namespace oaas::enforcement {

enum class PolicyKind { kOprc, kKnativeLike, kKnativeConcurrencyCapped, kKnativeRts, kManualRefinement };

std::string_view PolicyName(PolicyKind kind);
/// Accepts the names printed by PolicyName (case-insensitive). Throws ConfigError.
PolicyKind ParsePolicy(std::string_view name);

// ---- Availability ----------------------------------------------------------

struct AvailabilityPlan {
  double target = 0.0;
  double stability = 0.0;
  int n_replicas = 1;
};

/// Smallest N >= 1 with 1 - (1 - P)^N >= A. Throws DomainError unless both
/// A and P lie in (0, 1).
int RequiredReplicas(double target, double stability);
AvailabilityPlan PlanAvailability(double target, double stability);

/// Availability of a group of N independent replicas with stability P.
double GroupAvailability(double stability, int n_replicas);

// ---- Throughput ------------------------------------------------------------

/// Aggregated observations of one function over one controller interval.
struct MetricWindow {
  int64_t arrivals = 0;
  int64_t completed = 0;
  int64_t failed = 0;
  int64_t rejected = 0;
  /// Sum over completed invocations of the time each held a container slot.
  double busy_seconds = 0.0;
  double length_seconds = 0.0;

  double MeanServiceSeconds() const { return completed > 0 ? busy_seconds / completed : 0.0; }
  double ErrorRatio() const;
};

struct CapacityEstimatorConfig {
  int min_samples = 50;
  double alpha = 0.3;
  /// Bootstrap per-container capacity (rps) used until a window qualifies.
  double prior = 1.0;
};

/// Per-container capacity estimate kappa = concurrency / mean service time,
/// smoothed exponentially across qualifying windows.
class CapacityEstimator {
 public:
  CapacityEstimator(CapacityEstimatorConfig config, int concurrency_limit);

  /// Folds in one window and returns the current estimate. Windows with
  /// fewer than min_samples completions leave the estimate unchanged.
  double Observe(const MetricWindow& window);
  double estimate() const { return estimate_.value_or(config_.prior); }
  bool on_prior() const { return !estimate_.has_value(); }
  const CapacityEstimatorConfig& config() const { return config_; }

 private:
  CapacityEstimatorConfig config_;
  int concurrency_limit_;
  std::optional<double> estimate_;
};

/// One-shot form of the estimator: raw kappa of `window`, or `prior` when the
/// window is too small.
double EstimateCapacity(const MetricWindow& window, int concurrency_limit, double prior,
                        int min_samples = 50);

struct ThroughputPlan {
  double guaranteed_rate = 0.0;
  double per_container_capacity = 0.0;
  int warm_containers = 0;
  double cpu = 1.0;
  int concurrency_limit = 1;

  friend bool operator==(const ThroughputPlan&, const ThroughputPlan&) = default;
};

/// warm = ceil(A * (1 + headroom) / kappa); zero when A is zero.
ThroughputPlan PlanThroughput(double rate, double capacity, double headroom = 0.0,
                              double cpu = 1.0, int concurrency_limit = 1);

// ---- Baselines -------------------------------------------------------------

/// Knative-style sizing: ceil(observed concurrency / target per container).
int AutoscaleKnativeLike(double observed_concurrency, double target_per_container);

/// Phase-one manual refinement: ceil(target / measured * current).
int ManualRefinementStep(int current_pods, double measured, double target);

/// The three-phase manual procedure: (1) scale by the ratio formula until the
/// target is met, (2) remove pods until it is no longer met, (3) trade pods
/// for per-container concurrency while the target still holds.
class ManualRefinement {
 public:
  enum class Phase { kScaleToTarget, kTrimPods, kRaiseConcurrency, kDone };

  struct Config {
    double target = 0.0;
    /// A round "meets" the target when measured >= target * meet_fraction.
    double meet_fraction = 0.95;
    int initial_pods = 1;
    int initial_concurrency = 1;
    int max_rounds = 50;
  };

  explicit ManualRefinement(Config config);

  int pods() const { return pods_; }
  int concurrency() const { return concurrency_; }
  Phase phase() const { return phase_; }
  int rounds() const { return rounds_; }
  /// Rounds spent in phase one, including the one that met the target.
  int scale_rounds() const { return scale_rounds_; }
  bool done() const { return phase_ == Phase::kDone; }
  /// Best configuration found so far that met the target.
  std::optional<std::pair<int, int>> best() const { return best_; }

  /// Records the measurement of the current configuration and moves to the
  /// next one.
  void Record(double measured);

 private:
  bool Meets(double measured) const {
    return measured >= config_.target * config_.meet_fraction;
  }

  Config config_;
  Phase phase_ = Phase::kScaleToTarget;
  int pods_;
  int concurrency_;
  int rounds_ = 0;
  int scale_rounds_ = 0;
  std::optional<std::pair<int, int>> best_;
};

}  // namespace oaas::enforcement
