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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oaas/common/errors.h"
#include "oaas/enforcement/controller.h"
#include "oaas/enforcement/planning.h"

namespace oaas::enforcement {
namespace {

// Smallest n with 1 - (1-P)^n >= A, by plain iteration with repeated
// multiplication rather than pow.
int ReplicaOracle(double a, double p) {
  double down = 1.0 - p;
  int n = 1;
  while (1.0 - down < a) {
    down *= (1.0 - p);
    ++n;
  }
  return n;
}

TEST(AvailabilityPlanTest, ReplicaCountsAtMeasuredStability) {
  EXPECT_EQ(RequiredReplicas(0.99, 0.9436), 2);
  EXPECT_EQ(RequiredReplicas(0.999, 0.9436), 3);
  EXPECT_EQ(RequiredReplicas(0.9999, 0.9436), 4);
  EXPECT_EQ(RequiredReplicas(0.99999, 0.9436), 5);
  EXPECT_EQ(RequiredReplicas(0.9, 0.9436), 1);
}

TEST(AvailabilityPlanTest, MatchesOracleOnGrid) {
  for (double a : {0.5, 0.9, 0.95, 0.99, 0.995, 0.999, 0.9995, 0.9999, 0.99999, 0.999999}) {
    for (double p : {0.5, 0.9436}) {
      const int n = RequiredReplicas(a, p);
      EXPECT_EQ(n, ReplicaOracle(a, p)) << a << " " << p;
      EXPECT_GE(GroupAvailability(p, n), a);
      if (n > 1) EXPECT_LT(GroupAvailability(p, n - 1), a);
    }
  }
}

TEST(AvailabilityPlanTest, MonotoneInTargetAndStability) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.01, 0.999999);
  for (int i = 0; i < 500; ++i) {
    double a1 = u(rng), a2 = u(rng), p = u(rng);
    if (a1 > a2) std::swap(a1, a2);
    EXPECT_LE(RequiredReplicas(a1, p), RequiredReplicas(a2, p));
    double p2 = std::min(0.999999, p + 0.05);
    EXPECT_GE(RequiredReplicas(a2, p), RequiredReplicas(a2, p2));
  }
}

TEST(AvailabilityPlanTest, RejectsOutOfDomain) {
  EXPECT_THROW(RequiredReplicas(1.0, 0.9), DomainError);
  EXPECT_THROW(RequiredReplicas(0.0, 0.9), DomainError);
  EXPECT_THROW(RequiredReplicas(0.99, 1.0), DomainError);
  EXPECT_THROW(RequiredReplicas(0.99, 0.0), DomainError);
  EXPECT_THROW(RequiredReplicas(-0.1, 0.5), DomainError);
}

MetricWindow Window(int64_t completed, double mean_service_s, double length_s = 10.0) {
  MetricWindow w;
  w.arrivals = completed;
  w.completed = completed;
  w.busy_seconds = completed * mean_service_s;
  w.length_seconds = length_s;
  return w;
}

TEST(CapacityEstimatorTest, Examples) {
  EXPECT_NEAR(EstimateCapacity(Window(1000, 0.1), 10, 1.0), 100.0, 1e-9);
  EXPECT_DOUBLE_EQ(EstimateCapacity(MetricWindow{}, 10, 7.5), 7.5);
  EXPECT_DOUBLE_EQ(EstimateCapacity(Window(49, 0.1), 10, 7.5), 7.5);

  CapacityEstimator est({50, 0.3, 5.0}, 1);
  EXPECT_TRUE(est.on_prior());
  EXPECT_DOUBLE_EQ(est.estimate(), 5.0);
  EXPECT_NEAR(est.Observe(Window(100, 0.01)), 100.0, 1e-9);
  EXPECT_NEAR(est.Observe(Window(100, 0.005)), 130.0, 1e-9);
  // A sparse window keeps the last estimate.
  EXPECT_NEAR(est.Observe(Window(3, 1.0)), 130.0, 1e-9);
  EXPECT_FALSE(est.on_prior());
}

TEST(ThroughputPlanTest, Examples) {
  EXPECT_EQ(PlanThroughput(100, 40).warm_containers, 3);
  EXPECT_EQ(PlanThroughput(0, 40).warm_containers, 0);
  EXPECT_EQ(PlanThroughput(100, 20).warm_containers, 5);
  EXPECT_EQ(PlanThroughput(100, 25).warm_containers, 4);
  EXPECT_EQ(PlanThroughput(100, 25, 0.1).warm_containers, 5);
  EXPECT_EQ(PlanThroughput(10000, 2500, 0.1).warm_containers, 5);
  EXPECT_THROW(PlanThroughput(100, 0), DomainError);
}

TEST(ThroughputPlanTest, MonotoneInRateAndCapacity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 5000.0);
  for (int i = 0; i < 1000; ++i) {
    double r1 = u(rng), r2 = u(rng), k = u(rng) / 10;
    if (r1 > r2) std::swap(r1, r2);
    const int w1 = PlanThroughput(r1, k).warm_containers;
    const int w2 = PlanThroughput(r2, k).warm_containers;
    EXPECT_LE(w1, w2);
    EXPECT_GE(w1 * k, r1 * (1 - 1e-9));
    EXPECT_GE(PlanThroughput(r2, k).warm_containers, PlanThroughput(r2, k * 1.5).warm_containers);
  }
}

TEST(BaselineRulesTest, KnativeAutoscale) {
  EXPECT_EQ(AutoscaleKnativeLike(0.0, 100), 0);
  EXPECT_EQ(AutoscaleKnativeLike(550.0, 100), 6);
  EXPECT_EQ(AutoscaleKnativeLike(500.0, 100), 5);
  EXPECT_EQ(AutoscaleKnativeLike(1.0, 0.7), 2);
  EXPECT_THROW(AutoscaleKnativeLike(5.0, 0.0), DomainError);
}

TEST(BaselineRulesTest, ManualStep) {
  EXPECT_EQ(ManualRefinementStep(2, 500, 1000), 4);
  EXPECT_EQ(ManualRefinementStep(4, 1000, 1000), 4);
  EXPECT_EQ(ManualRefinementStep(4, 2000, 1000), 2);
  EXPECT_THROW(ManualRefinementStep(4, 0, 1000), DomainError);
}

TEST(BaselineRulesTest, ManualRefinementPhases) {
  // Each pod sustains 300 rps at concurrency 1, and doubling concurrency
  // adds 60% per pod.
  auto measure = [](int pods, int conc) {
    return pods * 300.0 * std::pow(1.6, std::log2(static_cast<double>(conc)));
  };
  ManualRefinement m({1000, 0.95, 1, 1, 50});
  while (!m.done()) m.Record(measure(m.pods(), m.concurrency()));
  ASSERT_TRUE(m.best().has_value());
  EXPECT_GE(measure(m.best()->first, m.best()->second), 950.0);
  EXPECT_EQ(m.scale_rounds(), 2);
  EXPECT_GT(m.rounds(), m.scale_rounds());
}

ControllerConfig TestConfig(double prior) {
  ControllerConfig c;
  c.estimator.prior = prior;
  return c;
}

TEST(ControllerTest, SteadyStateIsNoOp) {
  auto s = ControllerState::Create("C", "f", TestConfig(100), 1000, 1.0, 1);
  EXPECT_EQ(s.plan.warm_containers, 10);
  for (int i = 0; i < 20; ++i) {
    auto w = Window(10000, 0.01);
    EXPECT_FALSE(ControlStep(s, w, 100).has_value());
  }
  EXPECT_EQ(s.plan.warm_containers, 10);
  EXPECT_EQ(s.reconfigurations, 0u);
  EXPECT_EQ(s.phase, ControllerPhase::kMonitoring);
}

TEST(ControllerTest, ServiceTimeDoublingDoublesWarmPool) {
  auto s = ControllerState::Create("C", "f", TestConfig(100), 1000, 1.0, 1);
  ASSERT_FALSE(ControlStep(s, Window(10000, 0.01), 100).has_value());
  int last = s.plan.warm_containers;
  int steps = 0;
  while (s.plan.warm_containers < 20 && steps < 30) {
    ControlStep(s, Window(10000, 0.02), 100);
    EXPECT_GE(s.plan.warm_containers, last);
    last = s.plan.warm_containers;
    ++steps;
  }
  EXPECT_EQ(s.plan.warm_containers, 20);
  EXPECT_LE(steps, 15);
  for (int i = 0; i < 20; ++i) ControlStep(s, Window(10000, 0.02), 100);
  EXPECT_EQ(s.plan.warm_containers, 20);
}

TEST(ControllerTest, InfeasiblePlanKeepsPrior) {
  auto s = ControllerState::Create("C", "f", TestConfig(100), 1000, 2.0, 1);
  const auto before = s.plan;
  EXPECT_THROW(ControlStep(s, Window(10000, 0.1), 30), InfeasiblePlanError);
  EXPECT_EQ(s.plan, before);
  EXPECT_EQ(s.phase, ControllerPhase::kMonitoring);
}

TEST(ControllerTest, PhaseOrderAndTraceLine) {
  auto s = ControllerState::Create("Img", "resize", TestConfig(100), 1000, 1.0, 1);
  sim::Trace trace(true);
  auto action = ControlStep(s, Window(10000, 0.05), 1000, &trace, FromSeconds(10));
  ASSERT_TRUE(action.has_value());
  EXPECT_EQ(action->from, 10);
  EXPECT_GT(action->to, 10);
  EXPECT_EQ(action->reason, "drift");
  const std::vector<ControllerPhase> expected = {
      ControllerPhase::kMonitoring, ControllerPhase::kChangeDetection,
      ControllerPhase::kConfigurationEvaluation, ControllerPhase::kReconfiguration,
      ControllerPhase::kMonitoring};
  EXPECT_EQ(s.last_phases, expected);
  ASSERT_EQ(trace.records().size(), 1u);
  const auto& r = trace.records()[0];
  EXPECT_EQ(r.kind, "reconfig");
  EXPECT_EQ(r.entity, "class=Img");
  EXPECT_EQ(sim::DetailField(r.detail, "from"), "10");
  EXPECT_EQ(sim::DetailField(r.detail, "reason"), "drift");
}

TEST(ControllerTest, ErrorRatioTriggersEvaluation) {
  auto s = ControllerState::Create("C", "f", TestConfig(100), 1000, 1.0, 1);
  auto w = Window(10000, 0.01);
  w.failed = 500;
  ControlStep(s, w, 100);
  EXPECT_EQ(s.last_phases.size(), 4u);
  EXPECT_EQ(s.last_phases[2], ControllerPhase::kConfigurationEvaluation);
}

TEST(PolicyNameTest, ParsesAliases) {
  EXPECT_EQ(ParsePolicy("oprc"), PolicyKind::kOprc);
  EXPECT_EQ(ParsePolicy("knative"), PolicyKind::kKnativeLike);
  EXPECT_EQ(ParsePolicy("KnativeRts"), PolicyKind::kKnativeRts);
  EXPECT_EQ(ParsePolicy("manual"), PolicyKind::kManualRefinement);
  EXPECT_THROW(ParsePolicy("lambda"), ConfigError);
}

}  // namespace
}  // namespace oaas::enforcement
