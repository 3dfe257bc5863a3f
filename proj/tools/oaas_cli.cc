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

// Command-line front end: deploy, invoke, run, compare, report.
//
// Exit codes: 0 success, 1 scenario or input error, 2 threshold violation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "oaas/common/errors.h"
#include "oaas/enforcement/planning.h"
#include "oaas/harness/experiment.h"
#include "oaas/harness/metrics.h"
#include "oaas/harness/scenario.h"
#include "oaas/package/manifest.h"
#include "oaas/package/resolve.h"
#include "oaas/runtime/class_runtime.h"
#include "oaas/runtime/template.h"

namespace {

using namespace oaas;

constexpr int kOk = 0;
constexpr int kScenarioError = 1;
constexpr int kThresholdViolation = 2;

struct Globals {
  std::optional<uint64_t> seed;
  bool trace = false;
  std::string out = "out";
};

std::string QosText(const package::QosSpec& q) {
  std::vector<std::string> parts;
  if (q.throughput) parts.push_back(fmt::format("throughput={}", *q.throughput));
  if (q.availability) parts.push_back(fmt::format("availability={}", *q.availability));
  if (q.locality) parts.push_back(fmt::format("locality={}", package::LocalityName(*q.locality)));
  if (parts.empty()) return "-";
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : " ") + p;
  return s;
}

int Deploy(const std::string& manifest_path) {
  const auto classes = package::ResolveInheritance(package::LoadManifestFile(manifest_path));
  const auto registry = runtime::DefaultTemplateRegistry();
  for (const auto& rc : classes) {
    const auto tmpl = runtime::SelectTemplate(rc, registry);
    int replicas = 1;
    if (rc.qos.availability) {
      replicas = enforcement::RequiredReplicas(*rc.qos.availability / 100.0, 0.9436);
    }
    fmt::print("class {}{} template={} replicas={} persistent={}\n", rc.name,
               rc.parent ? " : " + *rc.parent : "", tmpl.template_id, replicas,
               rc.constraint.IsPersistent());
    for (const auto& fn : rc.functions) {
      fmt::print("  {:<16} {}\n", fn.name(), QosText(fn.effective_qos));
    }
    for (const auto& w : package::DeploymentWarnings(rc)) fmt::print("  warning: {}\n", w);
  }
  return kOk;
}

int Invoke(const Globals& g, const std::string& manifest_path, const std::string& class_name,
           const std::string& object_id, const std::string& function) {
  sim::EventLoop loop;
  sim::Trace trace(g.trace);
  sim::Cluster cluster(loop, sim::ClusterConfig{}, &trace);
  auto net = sim::NetworkModel::DefaultPreset();
  sim::RandomSource random(g.seed.value_or(1));
  runtime::RuntimeConfig config;
  for (int i = 0; i < 3; ++i) {
    config.storage_nodes.push_back(cluster.AddNode(fmt::format("node-{}", i), 16, "dc"));
  }
  runtime::RuntimeManager manager({&loop, &cluster, &net, &random, &trace});
  const package::ResolvedClass* target = nullptr;
  const auto classes = package::ResolveInheritance(package::LoadManifestFile(manifest_path));
  for (const auto& rc : classes) {
    if (rc.name == class_name) target = &rc;
  }
  if (target == nullptr) throw ConfigError(fmt::format("no class '{}' in {}", class_name, manifest_path));
  auto& rt = manager.Deploy(*target, config);
  store::Document attrs = store::Document::object();
  for (const auto& key : target->key_specs) {
    if (key.kind == package::KeyKind::kStructured) attrs[key.name] = store::Document::object();
  }
  rt.CreateObject(object_id, attrs);
  // Let the initial containers finish their cold start.
  loop.RunUntil(loop.Now() + cluster.config().cold_start_delay);
  runtime::InvocationRequest req;
  req.object_id = object_id;
  req.function = function;
  const auto out = runtime::InvokeAndWait(rt, req);
  nlohmann::ordered_json j;
  j["status"] = runtime::StatusName(out.status);
  j["object"] = out.object_id;
  j["function"] = out.function;
  j["revision"] = out.revision;
  j["latency_ms"] = ToMillis(out.Latency());
  j["breakdown_ms"] = {{"queue", ToMillis(out.breakdown.queue)},
                       {"cold_start", ToMillis(out.breakdown.cold_start)},
                       {"data_access", ToMillis(out.breakdown.data_access)},
                       {"execution", ToMillis(out.breakdown.execution)},
                       {"commit", ToMillis(out.breakdown.commit)}};
  if (!out.error.empty()) j["error"] = out.error;
  std::cout << j.dump(2) << "\n";
  if (g.trace) std::cout << trace.Dump();
  return out.status == runtime::InvocationStatus::kCompleted ? kOk : kScenarioError;
}

harness::ScenarioConfig LoadWithOverrides(const Globals& g, const std::string& path) {
  auto s = harness::LoadScenario(path);
  if (g.seed) {
    s.seed = *g.seed;
    s.load.seed = *g.seed;
  }
  return s;
}

void WriteOutputs(const Globals& g, const std::string& stem, const harness::ExperimentResult& r) {
  std::filesystem::create_directories(g.out);
  const auto base = (std::filesystem::path(g.out) / stem).string();
  harness::WriteReport(r.combined, base + ".csv", base + ".json");
  if (r.services.size() > 1) {
    for (size_t i = 0; i < r.services.size(); ++i) {
      const auto b = fmt::format("{}.service{}", base, i);
      harness::WriteReport(r.services[i].report, b + ".csv", b + ".json");
    }
  }
  if (g.trace) {
    std::ofstream(base + ".trace") << r.trace;
  }
}

void PrintSummary(const harness::Aggregates& a) {
  fmt::print(
      "{} policy={} seed={} offered={:.1f}rps achieved={:.1f}rps error={:.6f} "
      "mean={:.3f}ms p50={:.3f}ms p99={:.3f}ms overhead={:.3f} core_s={:.1f}\n",
      a.scenario, a.policy, a.seed, a.offered_rps, a.achieved_rps, a.error_ratio, a.mean_ms,
      a.p50_ms, a.p99_ms, a.overhead_share, a.core_seconds);
}

std::string Stem(std::string name) {
  for (auto& c : name) {
    if (c == '/') c = '.';
  }
  return name;
}

int Run(const Globals& g, const std::string& path) {
  bool violated = false;
  for (const auto& s : harness::ExpandVariants(LoadWithOverrides(g, path))) {
    if (s.sweep_services > 0) {
      const auto points = harness::RunSweep(s, s.sweep_services, {g.trace, false});
      const auto table = harness::FormatSweep(points, s.load.rps);
      std::filesystem::create_directories(g.out);
      std::ofstream((std::filesystem::path(g.out) / (Stem(s.name) + ".txt")).string()) << table;
      fmt::print("{}", table);
      for (const auto& p : points) {
        const bool bad =
            (s.thresholds.max_error_ratio && p.max_error_ratio > *s.thresholds.max_error_ratio) ||
            (s.thresholds.min_achieved_fraction &&
             p.min_achieved_fraction < *s.thresholds.min_achieved_fraction);
        if (bad) {
          fmt::print(stderr, "threshold violated with {} services\n", p.services);
          violated = true;
        }
      }
      continue;
    }
    const auto r = harness::RunExperiment(s, {g.trace, false});
    WriteOutputs(g, Stem(s.name), r);
    PrintSummary(r.combined.aggregates);
    for (const auto& v : harness::CheckThresholds(s, r)) {
      fmt::print(stderr, "threshold violated: {}\n", v);
      violated = true;
    }
  }
  return violated ? kThresholdViolation : kOk;
}

int Compare(const Globals& g, const std::string& path, const std::vector<std::string>& names) {
  std::vector<enforcement::PolicyKind> policies;
  for (const auto& n : names) policies.push_back(enforcement::ParsePolicy(n));
  for (const auto& s : harness::ExpandVariants(LoadWithOverrides(g, path))) {
    const auto runs = harness::ComparePolicies(s, policies, {g.trace, false});
    for (const auto& run : runs) {
      WriteOutputs(g, fmt::format("{}.{}", Stem(s.name), enforcement::PolicyName(run.policy)),
                   run.result);
    }
    fmt::print("{}\n{}", s.name, harness::FormatComparison(runs));
  }
  return kOk;
}

int Refine(const Globals& g, const std::string& path, double target) {
  const auto s = LoadWithOverrides(g, path);
  const auto r = harness::RunManualRefinement(s, target);
  fmt::print("{:>6} {:>5} {:>12} {:>12} {:>10}\n", "round", "pods", "concurrency", "achieved",
             "error");
  for (size_t i = 0; i < r.rounds.size(); ++i) {
    const auto& round = r.rounds[i];
    fmt::print("{:>6} {:>5} {:>12} {:>12.1f} {:>10.6f}\n", i + 1, round.pods, round.concurrency,
               round.achieved_rps, round.error_ratio);
  }
  fmt::print("rounds to target: {}\n", r.rounds_to_target);
  if (r.best) fmt::print("best: pods={} concurrency={}\n", r.best->first, r.best->second);
  return r.rounds_to_target > 0 ? kOk : kThresholdViolation;
}

int Report(const std::string& path) {
  const auto a = harness::ReadAggregates(path);
  std::cout << harness::AggregatesToJson(a).dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oaas: object-as-a-service simulator"};
  app.require_subcommand(1);
  Globals g;
  uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
  app.add_flag("--trace", g.trace, "Record and write the event trace");
  app.add_option("--out", g.out, "Output directory for reports")->capture_default_str();

  std::string manifest;
  auto* deploy = app.add_subcommand("deploy", "Validate a package and print its deployment plan");
  deploy->add_option("manifest", manifest)->required();

  std::string cls, object, fn;
  auto* invoke = app.add_subcommand("invoke", "Invoke one method on a fresh single-class cluster");
  invoke->add_option("class", cls)->required();
  invoke->add_option("object", object)->required();
  invoke->add_option("fn", fn)->required();
  invoke->add_option("--manifest", manifest, "Package manifest")->required();

  std::string scenario;
  auto* run = app.add_subcommand("run", "Run a scenario and write its metrics");
  run->add_option("scenario", scenario)->required();

  std::vector<std::string> policies;
  auto* compare = app.add_subcommand("compare", "Run a scenario under several policies");
  compare->add_option("scenario", scenario)->required();
  compare->add_option("--policies", policies)->required()->delimiter(',');

  double target = 0.0;
  auto* refine = app.add_subcommand("refine", "Replay the manual pod/concurrency tuning procedure");
  refine->add_option("scenario", scenario)->required();
  refine->add_option("--target", target, "Throughput goal in rps")->required();

  std::string metrics;
  auto* report = app.add_subcommand("report", "Print the aggregates of a metrics JSON file");
  report->add_option("metrics", metrics)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kScenarioError;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*deploy) return Deploy(manifest);
    if (*invoke) return Invoke(g, manifest, cls, object, fn);
    if (*run) return Run(g, scenario);
    if (*compare) return Compare(g, scenario, policies);
    if (*refine) return Refine(g, scenario, target);
    if (*report) return Report(metrics);
  } catch (const OaasError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kScenarioError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kScenarioError;
  }
  return kScenarioError;
}
