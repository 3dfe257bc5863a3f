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

#include "oaas/harness/experiment.h"

#include <algorithm>
#include <memory>

#include <fmt/format.h>

#include "oaas/common/errors.h"
#include "oaas/harness/load.h"
#include "oaas/package/manifest.h"
#include "oaas/package/resolve.h"
#include "oaas/runtime/class_runtime.h"
#include "oaas/sim/cluster.h"
#include "oaas/sim/event_loop.h"
#include "oaas/sim/failure.h"
#include "oaas/sim/network.h"
#include "oaas/sim/random.h"
#include "oaas/sim/trace.h"

namespace oaas::harness {
namespace {

using runtime::InvocationOutcome;
using runtime::InvocationStatus;

sim::NetworkModel BuildNetwork(const ScenarioConfig& s) {
  auto net = sim::NetworkModel::DefaultPreset();
  auto set = [&](sim::Tier tier, Duration one_way) {
    auto t = net.tier(tier);
    t.one_way = one_way;
    net.SetTier(tier, t);
  };
  set(sim::Tier::kLocal, s.local_one_way);
  set(sim::Tier::kDatacenter,
      Duration(static_cast<int64_t>(static_cast<double>(s.local_one_way.count()) *
                                    s.datacenter_factor)));
  set(sim::Tier::kInternet,
      Duration(static_cast<int64_t>(static_cast<double>(s.local_one_way.count()) *
                                    s.internet_factor)));
  net.SetPerByteNanos(s.per_byte_ns);
  for (const auto& l : s.links) net.Link(l.site_a, l.site_b, l.tier);
  if (!net.Monotone()) throw ConfigError("network tiers must satisfy Local <= DC <= Internet");
  return net;
}

package::ResolvedClass FindClass(const ScenarioConfig& s) {
  package::PackageManifest manifest;
  try {
    manifest = package::LoadManifestFile(s.manifest);
  } catch (const IoError&) {
    throw;
  } catch (const OaasError& e) {
    throw ConfigError(fmt::format("manifest {}: {}", s.manifest, e.what()));
  }
  for (auto& rc : package::ResolveInheritance(manifest)) {
    if (rc.name != s.class_name) continue;
    if (rc.FindFunction(s.function) == nullptr) {
      throw ConfigError(fmt::format("class {} has no function '{}'", s.class_name, s.function));
    }
    return rc;
  }
  throw ConfigError(fmt::format("manifest {} has no class '{}'", s.manifest, s.class_name));
}

store::Document InitialAttributes(const package::ResolvedClass& rc, int fields) {
  store::Document attrs = store::Document::object();
  for (const auto& key : rc.key_specs) {
    if (key.kind != package::KeyKind::kStructured) continue;
    store::Document value = store::Document::object();
    for (int i = 0; i < fields; ++i) value["k" + std::to_string(i)] = i;
    attrs[key.name] = value;
  }
  return attrs;
}

std::map<std::string, store::BlobRef> InitialBlobs(const package::ResolvedClass& rc,
                                                   int64_t bytes, uint64_t salt) {
  std::map<std::string, store::BlobRef> blobs;
  if (bytes <= 0) return blobs;
  for (const auto& key : rc.key_specs) {
    if (key.kind == package::KeyKind::kUnstructured) blobs[key.name] = {bytes, salt};
  }
  return blobs;
}

/// Everything one run owns, torn down in reverse declaration order.
struct World {
  sim::EventLoop loop;
  sim::Trace trace;
  sim::Cluster cluster;
  sim::NetworkModel net;
  sim::RandomSource random;
  std::unique_ptr<runtime::RuntimeManager> manager;
  std::unique_ptr<sim::FailureInjector> injector;

  World(const ScenarioConfig& s, const RunOptions& o)
      : trace(o.trace),
        cluster(loop, sim::ClusterConfig{s.cold_start, s.threads_per_core, o.audit}, &trace),
        net(BuildNetwork(s)),
        random(s.seed) {}
};

/// Collects one service's requests plus the merged view.
struct Sink {
  MetricsCollector* own;
  MetricsCollector* all;

  void Arrival(SimTime t) const {
    own->OnArrival(t);
    all->OnArrival(t);
  }
  void Outcome(const RequestRecord& r) const {
    own->OnOutcome(r);
    all->OnOutcome(r);
  }
};

}  // namespace

ExperimentResult RunExperiment(const ScenarioConfig& s, const RunOptions& options) {
  const auto base = FindClass(s);
  World w(s, options);

  runtime::RuntimeConfig rc = s.runtime;
  rc.policy = s.policy;
  rc.ring_seed = s.seed;
  for (const auto& n : s.nodes) {
    for (int i = 0; i < n.count; ++i) {
      const auto name = n.count == 1 ? n.name : fmt::format("{}-{}", n.name, i);
      const auto id = w.cluster.AddNode(name, n.cpu, n.site);
      if (n.role == NodeRole::kStorage || n.role == NodeRole::kBoth) {
        rc.storage_nodes.push_back(id);
      }
      if (n.role == NodeRole::kCompute || n.role == NodeRole::kBoth) {
        rc.compute_nodes.push_back(id);
      }
    }
  }
  if (rc.storage_nodes.empty()) throw ConfigError("the cluster needs at least one storage node");

  const runtime::Platform platform{&w.loop, &w.cluster, &w.net, &w.random, &w.trace};
  w.manager = std::make_unique<runtime::RuntimeManager>(platform);
  std::vector<runtime::ClassRuntime*> services;
  try {
    for (int i = 0; i < s.services; ++i) {
      auto rc_i = base;
      if (s.services > 1) rc_i.name = fmt::format("{}-{}", base.name, i);
      services.push_back(&w.manager->Deploy(rc_i, rc));
    }
  } catch (const InsufficientCapacityError& e) {
    throw ConfigError(fmt::format("deployment does not fit the cluster: {}", e.what()));
  }

  std::vector<std::vector<std::string>> objects(services.size());
  for (size_t i = 0; i < services.size(); ++i) {
    const auto attrs = InitialAttributes(services[i]->resolved(), s.state_fields);
    for (int k = 0; k < s.objects; ++k) {
      objects[i].push_back(services[i]->CreateObject(
          "", attrs, InitialBlobs(services[i]->resolved(), s.blob_bytes, static_cast<uint64_t>(k))));
    }
  }

  ExperimentResult result;
  result.scenario = s.name;
  result.replicas = services.front()->replicas();
  if (s.failure) {
    w.injector = std::make_unique<sim::FailureInjector>(w.loop, w.cluster, *s.failure, w.random);
    for (auto* rt : services) {
      for (auto id : rt->shard_containers()) w.injector->AddTarget(id);
    }
  }
  for (auto* rt : services) result.shards += static_cast<int>(rt->shard_containers().size());

  const SimTime start = s.warmup ? SimTime{0} + s.warmup->duration : SimTime{0};
  const Duration length = s.load.duration;
  MetricsCollector all(start, length);
  std::vector<std::unique_ptr<MetricsCollector>> own;
  for (size_t i = 0; i < services.size(); ++i) {
    own.push_back(std::make_unique<MetricsCollector>(start, length));
  }

  const std::vector<std::string> chain(static_cast<size_t>(s.chain), s.function);
  auto make_issue = [&](size_t i) -> IssueFn {
    auto* rt = services[i];
    auto rng = std::make_shared<sim::Rng>(w.random.Stream("harness.objects", i));
    const Sink sink{own[i].get(), &all};
    auto* loop = &w.loop;
    const auto* ids = &objects[i];
    return [rt, rng, sink, loop, ids, chain, fn = s.function](std::function<void()> done) {
      const SimTime arrival = loop->Now();
      sink.Arrival(arrival);
      const auto& object = (*ids)[static_cast<size_t>(rng->Below(ids->size()))];
      auto record = [sink, arrival, done](const InvocationOutcome& out) {
        sink.Outcome({arrival, out.end_time, out.status, out.breakdown});
        if (done) done();
      };
      try {
        if (chain.size() == 1) {
          runtime::InvocationRequest req;
          req.object_id = object;
          req.function = fn;
          rt->Invoke(std::move(req), record);
        } else {
          rt->InvokeChain(object, chain, [record, arrival](std::vector<InvocationOutcome> steps) {
            InvocationOutcome out;
            out.end_time = arrival;
            for (const auto& st : steps) {
              out.breakdown += st.breakdown;
              out.status = st.status;
              out.end_time = st.end_time;
            }
            out.breakdown.queue += (out.end_time - arrival) - out.breakdown.Total();
            record(out);
          });
        }
      } catch (const OaasError&) {
        InvocationOutcome out;
        out.status = InvocationStatus::kFailed;
        out.end_time = arrival;
        record(out);
      }
    };
  };

  std::vector<std::unique_ptr<LoadGenerator>> generators;
  for (size_t i = 0; i < services.size(); ++i) {
    if (s.warmup) {
      auto spec = *s.warmup;
      spec.seed = s.seed ^ (0x5eedULL + i);
      generators.push_back(
          std::make_unique<LoadGenerator>(w.loop, spec, SimTime{0}, make_issue(i)));
    }
    auto spec = s.load;
    spec.seed = s.seed + 1000003ULL * (i + 1);
    generators.push_back(std::make_unique<LoadGenerator>(w.loop, spec, start, make_issue(i)));
  }
  for (auto& g : generators) g->Start();

  double cost_at_start = 0.0;
  double cost_at_end = 0.0;
  w.loop.Schedule(start, [&] { cost_at_start = w.cluster.CoreSeconds(); });
  const auto seconds = static_cast<int64_t>(ToSeconds(length) + 0.999999);
  for (int64_t k = 1; k <= seconds; ++k) {
    const SimTime t = start + std::min<Duration>(FromSeconds(static_cast<double>(k)), length);
    w.loop.Schedule(t, [&, t] {
      int warm_total = 0;
      for (size_t i = 0; i < services.size(); ++i) {
        const int warm = services[i]->WarmContainers();
        warm_total += warm;
        own[i]->SampleGauges(t, warm, services[i]->replicas(), w.cluster.allocated_cores());
      }
      all.SampleGauges(t, warm_total, result.replicas, w.cluster.allocated_cores());
    });
  }

  // Scheduled after the last gauge sample, so it fires after it.
  bool window_closed = false;
  w.loop.Schedule(start + length, [&] {
    cost_at_end = w.cluster.CoreSeconds();
    window_closed = true;
  });

  bool cut = false;
  w.loop.Schedule(start + length + s.drain, [&] { cut = true; });
  w.loop.RunUntil([&] { return cut || (window_closed && all.finished() == all.offered()); });

  Aggregates header;
  header.scenario = s.name;
  header.policy = std::string(enforcement::PolicyName(s.policy));
  header.seed = s.seed;
  const double cost = cost_at_end - cost_at_start;
  uint64_t reconfigs = 0;
  uint64_t retries = 0;
  for (size_t i = 0; i < services.size(); ++i) {
    auto h = header;
    h.reconfigurations = services[i]->reconfigurations().size();
    h.retries = services[i]->counters().retries;
    reconfigs += h.reconfigurations;
    retries += h.retries;
    // Cost is shared infrastructure; each service is charged an equal part.
    result.services.push_back(
        {services[i]->name(), own[i]->Build(h, cost / static_cast<double>(services.size()))});
  }
  header.reconfigurations = reconfigs;
  header.retries = retries;
  result.combined = all.Build(header, cost);

  if (w.injector) {
    result.shard_uptime = w.injector->MeanUptimeFraction();
    for (const auto& [id, st] : w.injector->stats()) result.shard_kills += st.kills;
  }
  result.audits = w.cluster.audits();
  result.events = w.loop.dispatched();
  if (options.trace) result.trace = w.trace.Dump();
  return result;
}

std::vector<std::string> CheckThresholds(const ScenarioConfig& s, const ExperimentResult& r) {
  std::vector<std::string> violations;
  for (const auto& svc : r.services) {
    const auto& a = svc.report.aggregates;
    if (s.thresholds.min_achieved_fraction && a.offered_rps > 0) {
      const double fraction = a.achieved_rps / a.offered_rps;
      if (fraction < *s.thresholds.min_achieved_fraction) {
        violations.push_back(fmt::format("{}: achieved {:.1f} of {:.1f} rps ({:.4f} < {:.4f})",
                                         svc.class_name, a.achieved_rps, a.offered_rps, fraction,
                                         *s.thresholds.min_achieved_fraction));
      }
    }
    if (s.thresholds.max_error_ratio && a.error_ratio > *s.thresholds.max_error_ratio) {
      violations.push_back(fmt::format("{}: error ratio {:.6f} > {:.6f}", svc.class_name,
                                       a.error_ratio, *s.thresholds.max_error_ratio));
    }
  }
  return violations;
}

std::vector<PolicyRun> ComparePolicies(const ScenarioConfig& scenario,
                                       const std::vector<enforcement::PolicyKind>& policies,
                                       const RunOptions& options) {
  std::vector<PolicyRun> runs;
  for (auto p : policies) {
    auto s = scenario;
    s.policy = p;
    s.runtime.policy = p;
    runs.push_back({p, RunExperiment(s, options)});
  }
  return runs;
}

std::string FormatComparison(const std::vector<PolicyRun>& runs) {
  std::string out = fmt::format("{:<26} {:>10} {:>10} {:>10} {:>9} {:>9} {:>9} {:>8} {:>12}\n",
                                "policy", "offered", "achieved", "error", "p50_ms", "p95_ms",
                                "p99_ms", "warm", "core_s");
  for (const auto& r : runs) {
    const auto& a = r.result.combined.aggregates;
    out += fmt::format("{:<12} {:>10.1f} {:>10.1f} {:>10.6f} {:>9.3f} {:>9.3f} {:>9.3f} {:>8.1f} {:>12.1f}\n",
                       enforcement::PolicyName(r.policy), a.offered_rps, a.achieved_rps,
                       a.error_ratio, a.p50_ms, a.p95_ms, a.p99_ms, a.mean_warm_containers,
                       a.core_seconds);
  }
  return out;
}

RefinementResult RunManualRefinement(const ScenarioConfig& scenario, double target,
                                     const RefinementOptions& options) {
  if (!(target > 0) || !(options.probe_factor > 0)) {
    throw DomainError("refinement needs a positive target and probe factor");
  }
  enforcement::ManualRefinement::Config mc;
  mc.target = target;
  mc.meet_fraction = options.meet_fraction;
  mc.initial_pods = std::max(1, scenario.runtime.manual_pods);
  mc.initial_concurrency = std::max(1, scenario.runtime.manual_concurrency);
  mc.max_rounds = options.max_rounds;
  enforcement::ManualRefinement procedure(mc);

  RefinementResult result;
  result.target = target;
  while (!procedure.done() && static_cast<int>(result.rounds.size()) < options.max_rounds) {
    auto s = scenario;
    s.policy = enforcement::PolicyKind::kManualRefinement;
    s.runtime.policy = s.policy;
    s.runtime.manual_pods = procedure.pods();
    s.runtime.manual_concurrency = procedure.concurrency();
    s.load.rps = target * options.probe_factor;
    if (s.warmup) s.warmup->rps = s.load.rps;
    const auto run = RunExperiment(s);
    const auto& a = run.combined.aggregates;
    result.rounds.push_back(
        {procedure.pods(), procedure.concurrency(), a.achieved_rps, a.error_ratio, procedure.phase()});
    procedure.Record(a.achieved_rps);
    if (result.rounds_to_target == 0 && a.achieved_rps >= target * options.meet_fraction) {
      result.rounds_to_target = static_cast<int>(result.rounds.size());
      if (options.stop_at_target) break;
    }
  }
  result.best = procedure.best();
  return result;
}

std::vector<SweepPoint> RunSweep(const ScenarioConfig& scenario, int max_services,
                                 const RunOptions& options) {
  std::vector<SweepPoint> points;
  for (int n = 1; n <= max_services; ++n) {
    auto s = scenario;
    s.services = n;
    const auto run = RunExperiment(s, options);
    SweepPoint p;
    p.services = n;
    p.min_achieved_fraction = 1.0;
    for (const auto& svc : run.services) {
      const auto& a = svc.report.aggregates;
      p.per_service.push_back(a);
      p.max_error_ratio = std::max(p.max_error_ratio, a.error_ratio);
      if (a.offered_rps > 0) {
        p.min_achieved_fraction = std::min(p.min_achieved_fraction, a.achieved_rps / a.offered_rps);
      }
    }
    points.push_back(std::move(p));
  }
  return points;
}

std::string FormatSweep(const std::vector<SweepPoint>& points, double target_rps) {
  std::string out = fmt::format("{:>8} {:>8} {:>12} {:>12} {:>12}\n", "services", "service",
                                "achieved", "target", "error");
  for (const auto& p : points) {
    for (size_t i = 0; i < p.per_service.size(); ++i) {
      const auto& a = p.per_service[i];
      out += fmt::format("{:>8} {:>8} {:>12.1f} {:>12.1f} {:>12.6f}\n", p.services, i,
                         a.achieved_rps, target_rps, a.error_ratio);
    }
  }
  return out;
}

}  // namespace oaas::harness
