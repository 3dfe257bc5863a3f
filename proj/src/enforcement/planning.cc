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


#include "oaas/enforcement/planning.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "oaas/common/errors.h"

namespace oaas::enforcement {

namespace {

// Absorbs floating-point noise in ratios that are mathematically integral.
constexpr double kCeilSlack = 1e-9;

int SlackCeil(double x) { return static_cast<int>(std::ceil(x - kCeilSlack)); }

std::string Lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view PolicyName(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kOprc:
      return "Oprc";
    case PolicyKind::kKnativeLike:
      return "KnativeLike";
    case PolicyKind::kKnativeConcurrencyCapped:
      return "KnativeConcurrencyCapped";
    case PolicyKind::kKnativeRts:
      return "KnativeRts";
    case PolicyKind::kManualRefinement:
      return "ManualRefinement";
  }
  return "Oprc";
}

PolicyKind ParsePolicy(std::string_view name) {
  const auto v = Lower(name);
  for (auto k : {PolicyKind::kOprc, PolicyKind::kKnativeLike, PolicyKind::kKnativeConcurrencyCapped,
                 PolicyKind::kKnativeRts, PolicyKind::kManualRefinement}) {
    if (v == Lower(PolicyName(k))) return k;
  }
  if (v == "knative") return PolicyKind::kKnativeLike;
  if (v == "knative-con") return PolicyKind::kKnativeConcurrencyCapped;
  if (v == "knative-rts") return PolicyKind::kKnativeRts;
  if (v == "manual") return PolicyKind::kManualRefinement;
  throw ConfigError(fmt::format("unknown policy '{}'", name));
}

double GroupAvailability(double stability, int n_replicas) {
  return 1.0 - std::pow(1.0 - stability, n_replicas);
}

int RequiredReplicas(double target, double stability) {
  if (!(target > 0.0 && target < 1.0)) {
    throw DomainError(fmt::format("target availability {} is outside (0, 1)", target));
  }
  if (!(stability > 0.0 && stability < 1.0)) {
    throw DomainError(fmt::format("resource stability {} is outside (0, 1)", stability));
  }
  int n = std::max(1, static_cast<int>(std::ceil(std::log(1.0 - target) /
                                                 std::log(1.0 - stability))));
  // The closed form can land one off when the ratio is integral; settle on
  // the defining inequality.
  while (n > 1 && GroupAvailability(stability, n - 1) >= target) --n;
  while (GroupAvailability(stability, n) < target) ++n;
  return n;
}

AvailabilityPlan PlanAvailability(double target, double stability) {
  return {target, stability, RequiredReplicas(target, stability)};
}

double MetricWindow::ErrorRatio() const {
  const int64_t finished = completed + failed + rejected;
  return finished > 0 ? static_cast<double>(failed + rejected) / static_cast<double>(finished)
                      : 0.0;
}

CapacityEstimator::CapacityEstimator(CapacityEstimatorConfig config, int concurrency_limit)
    : config_(config), concurrency_limit_(std::max(1, concurrency_limit)) {}

double CapacityEstimator::Observe(const MetricWindow& window) {
  if (window.completed < config_.min_samples || window.MeanServiceSeconds() <= 0.0) {
    return estimate();
  }
  const double raw = concurrency_limit_ / window.MeanServiceSeconds();
  estimate_ = estimate_ ? config_.alpha * raw + (1.0 - config_.alpha) * *estimate_ : raw;
  return *estimate_;
}

double EstimateCapacity(const MetricWindow& window, int concurrency_limit, double prior,
                        int min_samples) {
  if (window.completed < min_samples || window.MeanServiceSeconds() <= 0.0) return prior;
  return std::max(1, concurrency_limit) / window.MeanServiceSeconds();
}

ThroughputPlan PlanThroughput(double rate, double capacity, double headroom, double cpu,
                              int concurrency_limit) {
  ThroughputPlan plan;
  plan.guaranteed_rate = rate;
  plan.per_container_capacity = capacity;
  plan.cpu = cpu;
  plan.concurrency_limit = concurrency_limit;
  if (rate <= 0.0) return plan;
  if (!(capacity > 0.0)) throw DomainError("per-container capacity must be positive");
  plan.warm_containers = SlackCeil(rate * (1.0 + headroom) / capacity);
  return plan;
}

int AutoscaleKnativeLike(double observed_concurrency, double target_per_container) {
  if (observed_concurrency <= 0.0) return 0;
  if (!(target_per_container > 0.0)) throw DomainError("target concurrency must be positive");
  return SlackCeil(observed_concurrency / target_per_container);
}

int ManualRefinementStep(int current_pods, double measured, double target) {
  if (!(measured > 0.0)) throw DomainError("measured throughput must be positive");
  return std::max(1, SlackCeil(target / measured * current_pods));
}

ManualRefinement::ManualRefinement(Config config)
    : config_(config),
      pods_(std::max(1, config.initial_pods)),
      concurrency_(std::max(1, config.initial_concurrency)) {}

void ManualRefinement::Record(double measured) {
  if (done()) return;
  ++rounds_;
  const bool meets = Meets(measured);
  if (meets) best_ = {pods_, concurrency_};
  switch (phase_) {
    case Phase::kScaleToTarget:
      ++scale_rounds_;
      if (meets) {
        phase_ = pods_ > 1 ? Phase::kTrimPods : Phase::kRaiseConcurrency;
        if (phase_ == Phase::kTrimPods) {
          --pods_;
        } else {
          concurrency_ *= 2;
        }
      } else {
        pods_ = ManualRefinementStep(pods_, std::max(measured, 1e-9), config_.target);
      }
      break;
    case Phase::kTrimPods:
      if (meets && pods_ > 1) {
        --pods_;
      } else {
        // Back to the smallest passing pod count, then trade pods for concurrency.
        pods_ = best_->first;
        concurrency_ = best_->second;
        if (pods_ <= 1) {
          phase_ = Phase::kDone;
          break;
        }
        phase_ = Phase::kRaiseConcurrency;
        concurrency_ *= 2;
        pods_ = std::max(1, (pods_ + 1) / 2);
      }
      break;
    case Phase::kRaiseConcurrency:
      if (meets && pods_ > 1) {
        concurrency_ *= 2;
        pods_ = std::max(1, (pods_ + 1) / 2);
      } else {
        pods_ = best_->first;
        concurrency_ = best_->second;
        phase_ = Phase::kDone;
      }
      break;
    case Phase::kDone:
      break;
  }
  if (rounds_ >= config_.max_rounds) phase_ = Phase::kDone;
}

}  // namespace oaas::enforcement
