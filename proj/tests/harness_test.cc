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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oaas/common/errors.h"
#include "oaas/harness/experiment.h"
#include "oaas/harness/load.h"
#include "oaas/harness/metrics.h"
#include "oaas/harness/scenario.h"
#include "oaas/sim/trace.h"

namespace oaas::harness {
namespace {

const std::string kRoot = OAAS_SOURCE_DIR;

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---- Load generation ------------------------------------------------------

TEST(LoadGeneratorTest, ConstantRateIssuesExactlyRateTimesDuration) {
  sim::EventLoop loop;
  LoadSpec spec;
  spec.rps = 200;
  spec.duration = FromSeconds(5400);
  uint64_t arrivals = 0;
  SimTime last{0};
  LoadGenerator gen(loop, spec, SimTime{0}, [&](std::function<void()> done) {
    ++arrivals;
    last = loop.Now();
    done();
  });
  gen.Start();
  loop.RunUntil(FromSeconds(6000));
  EXPECT_EQ(arrivals, 1080000u);
  EXPECT_EQ(gen.issued(), 1080000u);
  EXPECT_LT(last, FromSeconds(5400));
}

TEST(LoadGeneratorTest, ConstantRateSpacingIsExact) {
  sim::EventLoop loop;
  LoadSpec spec;
  spec.rps = 4;
  spec.duration = FromSeconds(1);
  std::vector<SimTime> at;
  LoadGenerator gen(loop, spec, FromSeconds(10), [&](std::function<void()>) {
    at.push_back(loop.Now());
  });
  gen.Start();
  loop.RunUntil(FromSeconds(20));
  ASSERT_EQ(at.size(), 4u);
  for (size_t k = 0; k < at.size(); ++k) {
    EXPECT_EQ(at[k], FromSeconds(10) + FromMillis(250.0 * static_cast<double>(k)));
  }
}

TEST(LoadGeneratorTest, PoissonMeanRateIsClose) {
  sim::EventLoop loop;
  LoadSpec spec;
  spec.rps = 500;
  spec.poisson = true;
  spec.duration = FromSeconds(200);
  spec.seed = 3;
  uint64_t n = 0;
  LoadGenerator gen(loop, spec, SimTime{0}, [&](std::function<void()>) { ++n; });
  gen.Start();
  loop.RunUntil(FromSeconds(300));
  // 100k expected arrivals; five standard deviations is about 1600.
  EXPECT_NEAR(static_cast<double>(n), 100000.0, 1600.0);
}

TEST(LoadGeneratorTest, ClosedLoopSingleClientNeverOverlaps) {
  sim::EventLoop loop;
  LoadSpec spec;
  spec.pattern = LoadPattern::kClosedLoop;
  spec.clients = 1;
  spec.duration = FromSeconds(10);
  LoadGenerator* self = nullptr;
  int max_seen = 0;
  LoadGenerator gen(loop, spec, SimTime{0}, [&](std::function<void()> done) {
    max_seen = std::max(max_seen, self->outstanding());
    loop.ScheduleAfter(FromMillis(100), done);
  });
  self = &gen;
  gen.Start();
  loop.RunUntil(FromSeconds(20));
  EXPECT_EQ(gen.max_outstanding(), 1);
  EXPECT_EQ(max_seen, 1);
  EXPECT_EQ(gen.issued(), 100u);
  EXPECT_EQ(gen.outstanding(), 0);
}

TEST(LoadGeneratorTest, ClosedLoopKeepsClientCountInFlight) {
  sim::EventLoop loop;
  LoadSpec spec;
  spec.pattern = LoadPattern::kClosedLoop;
  spec.clients = 8;
  spec.duration = FromSeconds(1);
  LoadGenerator gen(loop, spec, SimTime{0}, [&](std::function<void()> done) {
    loop.ScheduleAfter(FromMillis(10), done);
  });
  gen.Start();
  loop.RunUntil(FromSeconds(5));
  EXPECT_EQ(gen.max_outstanding(), 8);
  EXPECT_EQ(gen.issued(), 800u);
}

TEST(LoadGeneratorTest, BurstArrivalsStayInsideWindows) {
  sim::EventLoop loop;
  LoadSpec spec;
  spec.pattern = LoadPattern::kBurst;
  spec.rps = 1000;
  spec.idle = FromSeconds(60);
  spec.burst = FromSeconds(1);
  spec.duration = FromSeconds(183);
  std::vector<SimTime> at;
  LoadGenerator gen(loop, spec, SimTime{0}, [&](std::function<void()>) {
    at.push_back(loop.Now());
  });
  gen.Start();
  loop.RunUntil(FromSeconds(400));
  ASSERT_EQ(at.size(), 3000u);
  for (auto t : at) {
    const double s = ToSeconds(t);
    const double phase = std::fmod(s, 61.0);
    EXPECT_GE(phase, 60.0) << s;
    EXPECT_LT(phase, 61.0) << s;
  }
}

TEST(LoadGeneratorTest, RejectsInvalidSpecs) {
  LoadSpec spec;
  spec.rps = 0;
  EXPECT_THROW(spec.Validate(), ConfigError);
  spec = {};
  spec.duration = Duration(0);
  EXPECT_THROW(spec.Validate(), ConfigError);
  spec = {};
  spec.pattern = LoadPattern::kClosedLoop;
  spec.clients = 0;
  EXPECT_THROW(spec.Validate(), ConfigError);
  EXPECT_THROW(ParseLoadPattern("zigzag"), ConfigError);
  EXPECT_EQ(ParseLoadPattern("Burst"), LoadPattern::kBurst);
}

// ---- Metrics --------------------------------------------------------------

TEST(MetricsTest, NearestRankExamples) {
  EXPECT_EQ(NearestRank({}, 50), 0.0);
  EXPECT_EQ(NearestRank({15, 20, 35, 40, 50}, 30), 20.0);
  EXPECT_EQ(NearestRank({15, 20, 35, 40, 50}, 40), 20.0);
  EXPECT_EQ(NearestRank({15, 20, 35, 40, 50}, 50), 35.0);
  EXPECT_EQ(NearestRank({15, 20, 35, 40, 50}, 100), 50.0);
  EXPECT_EQ(NearestRank({3, 1, 2}, 1), 1.0);
}

TEST(MetricsTest, EmptyRunHasHeaderOnlyCsvAndZeroAggregates) {
  MetricsCollector c(SimTime{0}, Duration(0));
  const auto report = c.Build({}, 0.0);
  EXPECT_TRUE(report.series.empty());
  const auto csv = FormatCsv(report);
  EXPECT_EQ(csv, "t_s,offered_rps,achieved_rps,error_ratio,p50_ms,p95_ms,p99_ms,"
                 "warm_containers,replicas,cores_allocated\n");
  const auto& a = report.aggregates;
  EXPECT_EQ(a.offered, 0u);
  EXPECT_EQ(a.completed, 0u);
  EXPECT_EQ(a.error_ratio, 0.0);
  EXPECT_EQ(a.p99_ms, 0.0);
  EXPECT_EQ(a.achieved_rps, 0.0);
}

TEST(MetricsTest, BucketsByArrivalSecondAndIgnoresOutOfWindow) {
  MetricsCollector c(FromSeconds(10), FromSeconds(2));
  for (double t : {9.5, 10.0, 10.5, 11.2, 12.0}) c.OnArrival(FromSeconds(t));
  EXPECT_EQ(c.offered(), 3u);
  runtime::Breakdown b;
  b.execution = FromMillis(2);
  c.OnOutcome({FromSeconds(10.0), FromSeconds(10.002), runtime::InvocationStatus::kCompleted, b});
  c.OnOutcome({FromSeconds(10.5), FromSeconds(10.6), runtime::InvocationStatus::kRejected, {}});
  c.OnOutcome({FromSeconds(11.2), FromSeconds(11.204), runtime::InvocationStatus::kCompleted, b});
  c.OnOutcome({FromSeconds(9.5), FromSeconds(10.1), runtime::InvocationStatus::kFailed, {}});
  const auto r = c.Build({}, 3.0);
  ASSERT_EQ(r.series.size(), 2u);
  EXPECT_EQ(r.series[0].offered_rps, 2.0);
  EXPECT_EQ(r.series[0].achieved_rps, 1.0);
  EXPECT_DOUBLE_EQ(r.series[0].error_ratio, 0.5);
  EXPECT_EQ(r.series[1].achieved_rps, 1.0);
  const auto& a = r.aggregates;
  EXPECT_EQ(a.offered, 3u);
  EXPECT_EQ(a.completed, 2u);
  EXPECT_EQ(a.rejected, 1u);
  EXPECT_EQ(a.failed, 0u);
  EXPECT_EQ(a.unfinished, 0u);
  EXPECT_DOUBLE_EQ(a.achieved_rps, 1.0);
  EXPECT_NEAR(a.mean_ms, 3.0, 1e-9);
  EXPECT_NEAR(a.execution_ms, 2.0, 1e-9);
  EXPECT_NEAR(a.overhead_share, 1.0 / 3.0, 1e-9);
  EXPECT_EQ(a.core_seconds, 3.0);
}

TEST(MetricsTest, JsonRoundTripIsLossless) {
  Aggregates a;
  a.scenario = "x";
  a.policy = "Oprc";
  a.seed = 99;
  a.duration_s = 60;
  a.offered = 600;
  a.completed = 590;
  a.failed = 4;
  a.rejected = 5;
  a.unfinished = 1;
  a.offered_rps = 10;
  a.achieved_rps = 590.0 / 60.0;
  a.error_ratio = 9.0 / 599.0;
  a.mean_ms = 1.0 / 3.0;
  a.p50_ms = 0.1;
  a.p95_ms = 0.7;
  a.p99_ms = 1.9;
  a.queue_ms = 0.01;
  a.cold_start_ms = 0.0;
  a.data_access_ms = 0.2;
  a.execution_ms = 0.1;
  a.commit_ms = 0.005;
  a.overhead_share = 0.7;
  a.core_seconds = 1234.5;
  a.mean_warm_containers = 12.25;
  a.max_replicas = 3;
  a.reconfigurations = 2;
  a.retries = 7;
  const auto text = AggregatesToJson(a).dump();
  EXPECT_EQ(AggregatesFromJson(nlohmann::json::parse(text)), a);
}

TEST(MetricsTest, JsonRejectsMissingFieldsAndOtherVersions) {
  auto j = nlohmann::json::parse(AggregatesToJson(Aggregates{}).dump());
  j["schema_version"] = 2;
  EXPECT_THROW(AggregatesFromJson(j), ConfigError);
  j = nlohmann::json::parse(AggregatesToJson(Aggregates{}).dump());
  j.erase("p99_ms");
  EXPECT_THROW(AggregatesFromJson(j), ConfigError);
  EXPECT_THROW(ReadAggregates("/nonexistent/metrics.json"), IoError);
}

// ---- Scenarios ------------------------------------------------------------

constexpr const char* kMinimalScenario = R"(
name: mini
manifest: m.yaml
class: C
function: f
cluster:
  nodes:
    - name: n
load:
  duration_s: 10
)";

TEST(ScenarioTest, ParsesDefaultsAndResolvesManifestAgainstBaseDir) {
  const auto s = ParseScenario(kMinimalScenario, "/base/dir");
  EXPECT_EQ(s.manifest, "/base/dir/m.yaml");
  EXPECT_EQ(s.services, 1);
  EXPECT_EQ(s.policy, enforcement::PolicyKind::kOprc);
  EXPECT_EQ(s.load.duration, FromSeconds(10));
  EXPECT_EQ(s.nodes.size(), 1u);
  EXPECT_FALSE(s.failure.has_value());
  EXPECT_FALSE(s.warmup.has_value());
  EXPECT_EQ(ExpandVariants(s).size(), 1u);
}

TEST(ScenarioTest, RejectsMalformedScenarios) {
  EXPECT_THROW(ParseScenario("name: [unclosed"), ConfigError);
  EXPECT_THROW(ParseScenario(std::string(kMinimalScenario) + "bogus: 1\n"), ConfigError);
  EXPECT_THROW(ParseScenario(std::string(kMinimalScenario) + "policy: Nope\n"), ConfigError);
  EXPECT_THROW(ParseScenario(std::string(kMinimalScenario) + "objects: 0\n"), ConfigError);
  EXPECT_THROW(ParseScenario("manifest: m.yaml\nclass: C\nfunction: f\nload: {duration_s: 1}\n"),
               ConfigError);
  EXPECT_THROW(LoadScenario("/nonexistent/scenario.yaml"), IoError);
}

TEST(ScenarioTest, VariantsOverrideFunctionAndComputeNodes) {
  const auto s = ParseScenario(R"(
name: v
manifest: m.yaml
class: C
function: f
cluster:
  nodes:
    - {name: a, role: storage}
    - {name: b, role: compute}
    - {name: c, role: compute}
variants:
  - {name: one, function: g, compute: [b]}
  - {name: two}
load:
  duration_s: 1
)");
  const auto vs = ExpandVariants(s);
  ASSERT_EQ(vs.size(), 2u);
  EXPECT_EQ(vs[0].name, "v/one");
  EXPECT_EQ(vs[0].function, "g");
  EXPECT_EQ(vs[0].nodes[0].role, NodeRole::kStorage);
  EXPECT_EQ(vs[0].nodes[1].role, NodeRole::kCompute);
  EXPECT_EQ(vs[0].nodes[2].role, NodeRole::kIdle);
  EXPECT_EQ(vs[1].function, "f");
  EXPECT_EQ(vs[1].nodes[2].role, NodeRole::kCompute);
}

TEST(ScenarioTest, ShippedPresetsParse) {
  for (const auto& entry : std::filesystem::directory_iterator(kRoot + "/scenarios")) {
    if (entry.path().extension() != ".yaml") continue;
    SCOPED_TRACE(entry.path().string());
    const auto s = LoadScenario(entry.path().string());
    EXPECT_TRUE(std::filesystem::exists(s.manifest));
  }
}

// ---- End-to-end runs -------------------------------------------------------

ScenarioConfig Smoke() { return LoadScenario(kRoot + "/scenarios/smoke.yaml"); }

TEST(ExperimentTest, SmokeRunMatchesGoldenCsv) {
  const auto r = RunExperiment(Smoke());
  const auto golden = ReadFile(kRoot + "/tests/golden/smoke.csv");
  ASSERT_FALSE(golden.empty());
  EXPECT_EQ(FormatCsv(r.combined), golden);
}

TEST(ExperimentTest, SameSeedIsByteIdenticalAndOtherSeedDiffers) {
  auto s = Smoke();
  const auto a = RunExperiment(s, {true, false});
  const auto b = RunExperiment(s, {true, false});
  EXPECT_EQ(FormatCsv(a.combined), FormatCsv(b.combined));
  EXPECT_EQ(AggregatesToJson(a.combined.aggregates).dump(),
            AggregatesToJson(b.combined.aggregates).dump());
  EXPECT_EQ(a.trace, b.trace);
  s.seed += 1;
  const auto c = RunExperiment(s);
  EXPECT_NE(FormatCsv(a.combined), FormatCsv(c.combined));
}

TEST(ExperimentTest, EveryMeasuredArrivalIsAccountedFor) {
  auto s = Smoke();
  s.drain = Duration(0);
  const auto r = RunExperiment(s);
  const auto& a = r.combined.aggregates;
  EXPECT_GT(a.offered, 0u);
  EXPECT_EQ(a.offered, a.completed + a.failed + a.rejected + a.unfinished);
  EXPECT_GT(r.shard_kills, 0u);
  EXPECT_GT(a.failed, 0u);
}

TEST(ExperimentTest, WarmupTrafficIsExcludedFromTheReport) {
  auto s = Smoke();
  s.failure.reset();
  s.load.poisson = false;
  s.warmup->poisson = false;
  s.warmup->rps = 500;
  const auto r = RunExperiment(s);
  // 100 rps for 20 s; the 2500 warm-up requests must not show up.
  EXPECT_EQ(r.combined.aggregates.offered, 2000u);
  EXPECT_EQ(r.combined.aggregates.completed, 2000u);
  for (const auto& row : r.combined.series) EXPECT_EQ(row.offered_rps, 100.0);
}

TEST(ExperimentTest, CostIntegralMatchesConstantAllocation) {
  auto s = Smoke();
  s.failure.reset();
  s.policy = enforcement::PolicyKind::kManualRefinement;
  s.runtime.manual_pods = 3;
  s.runtime.manual_concurrency = 1;
  const auto r = RunExperiment(s);
  const auto& series = r.combined.series;
  ASSERT_FALSE(series.empty());
  // A fixed pool never changes the allocation, so every gauge equals the
  // mean rate of the cost integral.
  const double cores = series.front().cores_allocated;
  for (const auto& row : series) EXPECT_DOUBLE_EQ(row.cores_allocated, cores);
  EXPECT_NEAR(r.combined.aggregates.core_seconds, cores * 20.0, 1e-6);
}

TEST(ExperimentTest, ControllerSettlesWithinThreeIntervals) {
  auto s = Smoke();
  s.failure.reset();
  s.warmup.reset();
  s.load.duration = FromSeconds(120);
  s.runtime.controller.interval = FromSeconds(10);
  const auto r = RunExperiment(s, {true, false});
  std::istringstream lines(r.trace);
  std::string line;
  double last = -1.0;
  int reconfigs = 0;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    double t = 0.0;
    std::string kind;
    fields >> t >> kind;
    if (kind == "reconfig") {
      ++reconfigs;
      last = t;
    }
  }
  // The estimate replaces the prior once; after that steady load is a fixed point.
  EXPECT_LE(last, 30.0 + 1e-9) << reconfigs;
  EXPECT_EQ(r.combined.aggregates.error_ratio, 0.0);
}

TEST(ExperimentTest, ThresholdsFlagShortfalls) {
  auto s = Smoke();
  const auto r = RunExperiment(s);
  s.thresholds.max_error_ratio = 0.0;
  s.thresholds.min_achieved_fraction = 1.0;
  EXPECT_EQ(CheckThresholds(s, r).size(), 2u);
  s.thresholds.max_error_ratio = 1.0;
  s.thresholds.min_achieved_fraction = 0.0;
  EXPECT_TRUE(CheckThresholds(s, r).empty());
}

TEST(ExperimentTest, ScenarioErrorsAreConfigErrors) {
  auto s = Smoke();
  s.class_name = "Missing";
  EXPECT_THROW(RunExperiment(s), ConfigError);
  s = Smoke();
  s.function = "missing";
  EXPECT_THROW(RunExperiment(s), ConfigError);
  s = Smoke();
  s.nodes[0].cpu = 1;
  EXPECT_THROW(RunExperiment(s), ConfigError);
}

TEST(ExperimentTest, ServicesAreMeasuredSeparately) {
  auto s = Smoke();
  s.failure.reset();
  s.nodes[0].cpu = 32;
  s.services = 2;
  const auto r = RunExperiment(s);
  ASSERT_EQ(r.services.size(), 2u);
  EXPECT_EQ(r.services[0].class_name, "Chatty-0");
  EXPECT_EQ(r.services[1].class_name, "Chatty-1");
  const auto total = r.services[0].report.aggregates.offered + r.services[1].report.aggregates.offered;
  EXPECT_EQ(total, r.combined.aggregates.offered);
}

// Frozen from a simulator run of the shipped refinement preset: phase one
// scales 1 -> 12 -> 13 -> 14 pods and meets 10k rps on the fourth deploy.
TEST(RefinementTest, ManualPhaseOneConvergesInFourRounds) {
  const auto s = LoadScenario(kRoot + "/scenarios/refinement-manual-vs-auto.yaml");
  RefinementOptions options;
  options.stop_at_target = true;
  const auto r = RunManualRefinement(s, 10000, options);
  EXPECT_EQ(r.rounds_to_target, 4);
  ASSERT_GE(r.rounds.size(), 4u);
  EXPECT_EQ(r.rounds[0].pods, 1);
  EXPECT_EQ(r.rounds[3].pods, 14);
  EXPECT_GE(r.rounds[3].achieved_rps, 10000.0);
  EXPECT_LT(r.rounds[2].achieved_rps, 10000.0);
}

TEST(RefinementTest, RejectsNonPositiveTargets) {
  EXPECT_THROW(RunManualRefinement(Smoke(), 0), DomainError);
}

}  // namespace
}  // namespace oaas::harness
