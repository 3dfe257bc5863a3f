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

// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails. Pass a criterion number to run only that one.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oaas/common/errors.h"
#include "oaas/enforcement/planning.h"
#include "oaas/harness/experiment.h"
#include "oaas/harness/metrics.h"
#include "oaas/harness/scenario.h"
#include "oaas/package/manifest.h"
#include "oaas/package/resolve.h"
#include "oaas/runtime/class_runtime.h"
#include "oaas/sim/failure.h"
#include "oaas/store/hash_ring.h"

namespace {

using namespace oaas;

const std::string kRoot = OAAS_SOURCE_DIR;

struct Verdict {
  bool pass = false;
  std::string detail;
};

harness::ScenarioConfig Preset(const std::string& name) {
  return harness::LoadScenario(kRoot + "/scenarios/" + name + ".yaml");
}

double Elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

// ---- 1 ----------------------------------------------------------------------

int OracleReplicas(double target, double stability) {
  double unavailable = 1.0;
  for (int n = 1; n < 1000; ++n) {
    unavailable *= 1.0 - stability;
    if (1.0 - unavailable >= target) return n;
  }
  return -1;
}

Verdict ReplicaOracle() {
  const auto t0 = std::chrono::steady_clock::now();
  int agree = 0;
  int total = 0;
  for (double a : {0.9, 0.99, 0.999, 0.9999, 0.99999}) {
    for (double p : {0.80, 0.90, 0.9436, 0.99}) {
      ++total;
      agree += enforcement::RequiredReplicas(a, p) == OracleReplicas(a, p);
    }
  }
  const int r2 = enforcement::RequiredReplicas(0.99, 0.9436);
  const int r5 = enforcement::RequiredReplicas(0.99999, 0.9436);
  const double secs = Elapsed(t0);
  return {agree == 20 && total == 20 && r2 == 2 && r5 == 5 && secs < 1.0,
          fmt::format("{}/{} agree, (0.99,0.9436)->{}, (0.99999,0.9436)->{}, {:.3f}s", agree,
                      total, r2, r5, secs)};
}

// ---- 2 ----------------------------------------------------------------------

Verdict Availability() {
  std::vector<std::string> parts;
  bool pass = true;
  std::vector<double> means;
  for (const auto& [name, target] :
       std::vector<std::pair<std::string, double>>{{"avail-99", 0.99}, {"avail-99.9", 0.999},
                                                   {"avail-99.99", 0.9999}}) {
    double sum = 0.0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      auto s = Preset(name);
      s.seed = seed;
      sum += harness::RunExperiment(s).combined.aggregates.error_ratio;
    }
    const double mean = sum / 5.0;
    const double bound = 1.2 * (1.0 - target);
    pass = pass && mean <= bound;
    means.push_back(mean);
    parts.push_back(fmt::format("{}: {:.3e}<={:.3e}", name, mean, bound));
  }
  const bool decreasing = means[0] > means[1] && means[1] > means[2];
  pass = pass && decreasing;
  double sum = 0.0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    auto s = Preset("avail-99.999");
    s.seed = seed;
    sum += harness::RunExperiment(s).combined.aggregates.error_ratio;
  }
  const double mean5 = sum / 10.0;
  pass = pass && mean5 <= 10.0 * 1e-5;
  parts.push_back(fmt::format("avail-99.999 (10 seeds): {:.3e}<=1e-4", mean5));
  parts.push_back(decreasing ? "strictly decreasing" : "NOT strictly decreasing");
  std::string detail;
  for (const auto& p : parts) detail += (detail.empty() ? "" : "; ") + p;
  return {pass, detail};
}

// ---- 3 ----------------------------------------------------------------------

Verdict Throughput() {
  bool pass = true;
  std::string detail;
  for (const auto& [name, target] : std::vector<std::pair<std::string, double>>{
           {"tp-chatty-10k", 10000}, {"tp-data-400", 400}, {"tp-compute-20", 20}}) {
    const auto a = harness::RunExperiment(Preset(name)).combined.aggregates;
    const bool ok = a.achieved_rps >= 0.95 * target && a.error_ratio < 0.01;
    pass = pass && ok;
    detail += fmt::format("{}: {:.1f}/{:.0f}rps err={:.4f}; ", name, a.achieved_rps, target,
                          a.error_ratio);
  }
  const auto runs = harness::ComparePolicies(
      Preset("tp-chatty-burst"),
      {enforcement::PolicyKind::kOprc, enforcement::PolicyKind::kKnativeLike});
  const double oprc = runs[0].result.combined.aggregates.error_ratio;
  const double knative = runs[1].result.combined.aggregates.error_ratio;
  pass = pass && knative > oprc;
  detail += fmt::format("burst err KnativeLike={:.4f} > Oprc={:.4f}", knative, oprc);
  return {pass, detail};
}

// ---- 4 ----------------------------------------------------------------------

Verdict Latency() {
  std::map<std::string, harness::Aggregates> by_variant;
  for (const auto& s : harness::ExpandVariants(Preset("latency-local-vs-remote"))) {
    by_variant[s.name.substr(s.name.find('/') + 1)] =
        harness::RunExperiment(s).combined.aggregates;
  }
  const auto& local = by_variant.at("local");
  const auto& dc = by_variant.at("remote-datacenter");
  const auto& wan = by_variant.at("remote-internet");
  const bool pass = wan.mean_ms > dc.mean_ms && dc.mean_ms > local.mean_ms &&
                    local.overhead_share <= 0.10 && local.cold_start_ms == 0.0;
  return {pass, fmt::format("mean None/Internet={:.3f}ms > None/DC={:.3f}ms > Local={:.3f}ms; "
                            "Local+warm overhead={:.3f}<=0.10",
                            wan.mean_ms, dc.mean_ms, local.mean_ms, local.overhead_share)};
}

// ---- 5 ----------------------------------------------------------------------

Verdict Refinement() {
  const auto scenario = Preset("refinement-manual-vs-auto");
  harness::RefinementOptions options;
  options.stop_at_target = true;
  const auto manual = harness::RunManualRefinement(scenario, 10000, options);
  std::string rounds;
  for (const auto& r : manual.rounds) rounds += fmt::format(" {}:{:.0f}", r.pods, r.achieved_rps);

  auto s = scenario;
  s.policy = enforcement::PolicyKind::kOprc;
  s.runtime.policy = s.policy;
  const auto oprc = harness::RunExperiment(s).combined.aggregates;
  const bool oprc_ok = oprc.achieved_rps >= 0.95 * 10000 && oprc.error_ratio < 0.01;
  const bool pass = manual.rounds_to_target >= 4 && oprc_ok;
  return {pass, fmt::format("manual phase one: {} rounds (pods:rps{}); Oprc: 1 deployment, "
                            "{:.1f}rps err={:.4f} after the warm-up round",
                            manual.rounds_to_target, rounds, oprc.achieved_rps, oprc.error_ratio)};
}

// ---- 6 ----------------------------------------------------------------------

Verdict Listing() {
  const auto classes = package::ResolveInheritance(
      package::LoadManifestFile(kRoot + "/manifests/listing1.yaml"));
  const package::ResolvedClass* li = nullptr;
  for (const auto& c : classes) {
    if (c.name == "LabelledImage") li = &c;
  }
  if (li == nullptr) return {false, "LabelledImage missing"};
  struct Row {
    std::string fn;
    std::optional<int64_t> throughput;
  };
  const std::vector<Row> expected = {
      {"resize", 100}, {"changeFormat", std::nullopt}, {"detectObject", 100}, {"analyze", 50}};
  bool pass = li->functions.size() == expected.size();
  std::string detail;
  for (const auto& row : expected) {
    const auto req = package::GetEffectiveRequirements(*li, row.fn);
    const bool ok = req.qos.throughput == row.throughput && req.qos.availability &&
                    *req.qos.availability == 99.9 && req.constraint.IsPersistent();
    pass = pass && ok;
    detail += fmt::format("{}(tp={},av={}) ", row.fn,
                          req.qos.throughput ? std::to_string(*req.qos.throughput) : "-",
                          req.qos.availability ? fmt::format("{}", *req.qos.availability) : "-");
  }
  std::set<std::string> keys;
  for (const auto& k : li->key_specs) keys.insert(k.name);
  pass = pass && keys == std::set<std::string>{"image", "labels"};
  return {pass, detail + fmt::format("keys={}", keys.size())};
}

// ---- 7 ----------------------------------------------------------------------

bool RingMinimalDisruption(std::string& why) {
  store::HashRing ring(store::kDefaultVirtualNodes, 11);
  for (int m = 0; m < 8; ++m) ring.Insert(m);
  std::vector<std::string> keys;
  for (int i = 0; i < 10000; ++i) keys.push_back(fmt::format("obj-{}", i));
  std::vector<store::MemberId> before;
  for (const auto& k : keys) before.push_back(ring.Lookup(k));
  for (int removed = 0; removed < 8; ++removed) {
    store::HashRing smaller = ring;
    smaller.Remove(removed);
    for (size_t i = 0; i < keys.size(); ++i) {
      const auto after = smaller.Lookup(keys[i]);
      if (before[i] != removed && after != before[i]) {
        why = fmt::format("key {} moved off surviving member {}", keys[i], before[i]);
        return false;
      }
    }
    store::HashRing larger = ring;
    larger.Insert(100 + removed);
    for (size_t i = 0; i < keys.size(); ++i) {
      const auto after = larger.Lookup(keys[i]);
      if (after != before[i] && after != 100 + removed) {
        why = fmt::format("key {} moved between existing members", keys[i]);
        return false;
      }
    }
  }
  return true;
}

constexpr const char* kPropertyManifest = R"(
classes:
  - name: Counter
    qos:
      availability: 99
    keySpecs:
      - name: state
        kind: Structured
    functions:
      - name: step
        qos:
          locality: Local
        x-sim:
          archetype: chatty
      - name: remote
        x-sim:
          archetype: chatty
)";

bool RuntimeProperties(std::string& why, std::string& stats) {
  sim::EventLoop loop;
  sim::Trace trace(true);
  sim::Cluster cluster(loop, sim::ClusterConfig{FromSeconds(1.0), 1.0, true}, &trace);
  auto net = sim::NetworkModel::DefaultPreset();
  sim::RandomSource random(2026);
  runtime::RuntimeConfig config;
  for (int i = 0; i < 3; ++i) {
    config.storage_nodes.push_back(cluster.AddNode(fmt::format("s{}", i), 16, "dc"));
  }
  const auto resolved =
      package::ResolveInheritance(package::ParseManifest(kPropertyManifest)).front();
  runtime::RuntimeManager manager({&loop, &cluster, &net, &random, &trace});
  auto& rt = manager.Deploy(resolved, config);
  sim::FailureConfig fc;
  fc.mtbf = FromSeconds(8);
  fc.jitter_stddev = FromSeconds(1);
  fc.recovery_time = FromSeconds(2);
  sim::FailureInjector injector(loop, cluster, fc, random);
  for (auto id : rt.shard_containers()) injector.AddTarget(id);
  std::vector<std::string> objects;
  for (int i = 0; i < 30; ++i) {
    objects.push_back(rt.CreateObject("", store::Document{{"state", store::Document::object()}}));
  }
  auto rng = random.Stream("acceptance", 0);
  std::vector<runtime::InvocationOutcome> outcomes;
  uint64_t issued = 0;
  for (int i = 0; i < 6000; ++i) {
    loop.Schedule(FromMillis(5.0 * i), [&, i] {
      runtime::InvocationRequest r;
      r.object_id = objects[rng.Below(objects.size())];
      r.function = i % 4 == 0 ? "remote" : "step";
      ++issued;
      rt.Invoke(r, [&](const runtime::InvocationOutcome& o) { outcomes.push_back(o); });
    });
  }
  try {
    loop.RunUntil(FromSeconds(90));
  } catch (const std::logic_error& e) {
    why = fmt::format("capacity audit: {}", e.what());
    return false;
  }

  // Conservation and breakdown identity.
  if (outcomes.size() != issued) {
    why = fmt::format("{} issued but {} outcomes", issued, outcomes.size());
    return false;
  }
  const auto& c = rt.counters();
  if (c.invoked != c.completed + c.failed + c.rejected) {
    why = "invoked != completed + failed + rejected";
    return false;
  }
  for (const auto& o : outcomes) {
    if (o.breakdown.Total() != o.Latency()) {
      why = fmt::format("breakdown of {} sums to {}ns, latency {}ns", o.object_id,
                        o.breakdown.Total().count(), o.Latency().count());
      return false;
    }
  }

  // Single primary and gap-free revisions, replayed from the trace.
  std::map<std::string, std::string> primary;
  std::map<std::string, uint64_t> last_rev;
  std::set<std::string> electing;
  uint64_t commits = 0;
  for (const auto& r : trace.records()) {
    const auto object = std::string(sim::DetailField(r.detail, "object"));
    if (r.kind == "store.primary") {
      primary[object] = std::string(sim::DetailField(r.detail, "member"));
      electing.erase(object);
    } else if (r.kind == "store.election") {
      electing.insert(object);
    } else if (r.kind == "store.lost") {
      last_rev.erase(object);
    } else if (r.kind == "store.commit") {
      ++commits;
      const auto member = std::string(sim::DetailField(r.detail, "member"));
      if (electing.contains(object) || primary[object] != member) {
        why = fmt::format("commit on {} by member {} while primary is '{}'", object, member,
                          electing.contains(object) ? "none" : primary[object]);
        return false;
      }
      const auto rev = std::stoull(std::string(sim::DetailField(r.detail, "rev")));
      const auto prev = last_rev.contains(object) ? last_rev[object] : 0;
      if (rev != prev + 1) {
        why = fmt::format("revision of {} jumped {} -> {}", object, prev, rev);
        return false;
      }
      last_rev[object] = rev;
    }
  }
  if (commits != c.completed) {
    why = fmt::format("{} commits for {} completed invocations", commits, c.completed);
    return false;
  }
  uint64_t kills = 0;
  for (const auto& [id, st] : injector.stats()) kills += st.kills;
  stats = fmt::format("{} invocations, {} kills, {} audits", issued, kills, cluster.audits());
  return kills > 0 && cluster.audits() > 0;
}

Verdict Properties() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string why;
  std::string stats;
  bool pass = RingMinimalDisruption(why);
  if (pass) pass = RuntimeProperties(why, stats);
  if (pass) {
    const auto s = Preset("smoke");
    const auto a = harness::FormatCsv(harness::RunExperiment(s).combined);
    const auto b = harness::FormatCsv(harness::RunExperiment(s).combined);
    if (a != b) {
      pass = false;
      why = "two runs with one seed produced different CSV";
    }
  }
  const double secs = Elapsed(t0);
  pass = pass && secs < 60.0;
  return {pass, pass ? fmt::format("ring, primary, revisions, conservation, determinism, "
                                   "capacity, breakdown hold ({}); {:.1f}s",
                                   stats, secs)
                     : fmt::format("{} ({:.1f}s)", why, secs)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"replica-count oracle equivalence", ReplicaOracle},
      {"availability enforcement", Availability},
      {"throughput enforcement", Throughput},
      {"locality latency decomposition", Latency},
      {"refinement productivity", Refinement},
      {"inheritance resolution golden", Listing},
      {"property suites", Properties},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, fmt::format("exception: {}", e.what())};
    }
    failures += !v.pass;
    fmt::print("{} {} {}: {} [{:.1f}s]\n", v.pass ? "PASS" : "FAIL", number, criteria[i].first,
               v.detail, Elapsed(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
