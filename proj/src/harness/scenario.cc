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

#include "oaas/harness/scenario.h"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "oaas/common/errors.h"

namespace oaas::harness {
namespace {

std::string Lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void AllowOnly(const YAML::Node& node, const std::string& where,
               const std::set<std::string>& keys) {
  if (!node.IsMap()) throw ConfigError(fmt::format("{} must be a mapping", where));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!keys.contains(key)) throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
  }
}

template <typename T>
T Get(const YAML::Node& node, const std::string& what) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(fmt::format("{} has the wrong type", what));
  }
}

double Positive(const YAML::Node& node, const std::string& what) {
  const auto v = Get<double>(node, what);
  if (!(v > 0)) throw ConfigError(fmt::format("{} must be positive", what));
  return v;
}

double NonNegative(const YAML::Node& node, const std::string& what) {
  const auto v = Get<double>(node, what);
  if (!(v >= 0)) throw ConfigError(fmt::format("{} must be >= 0", what));
  return v;
}

LoadSpec ParseLoad(const YAML::Node& n, const std::string& where, uint64_t seed) {
  AllowOnly(n, where, {"pattern", "rps", "poisson", "idle_s", "burst_s", "clients", "duration_s"});
  LoadSpec s;
  s.seed = seed;
  if (n["pattern"]) s.pattern = ParseLoadPattern(Get<std::string>(n["pattern"], where + ".pattern"));
  if (n["rps"]) s.rps = Positive(n["rps"], where + ".rps");
  if (n["poisson"]) s.poisson = Get<bool>(n["poisson"], where + ".poisson");
  if (n["idle_s"]) s.idle = FromSeconds(Positive(n["idle_s"], where + ".idle_s"));
  if (n["burst_s"]) s.burst = FromSeconds(Positive(n["burst_s"], where + ".burst_s"));
  if (n["clients"]) s.clients = Get<int>(n["clients"], where + ".clients");
  if (!n["duration_s"]) throw ConfigError(fmt::format("{}.duration_s is required", where));
  s.duration = FromSeconds(Positive(n["duration_s"], where + ".duration_s"));
  s.Validate();
  return s;
}

void ParseRuntime(const YAML::Node& n, runtime::RuntimeConfig& rc) {
  AllowOnly(n, "runtime",
            {"queue_timeout_s", "shards_per_node", "shard_cpu", "stability", "commit_apply_us",
             "scale_interval_s", "stable_window_s", "oprc_utilization", "controller_interval_s",
             "headroom", "knative_concurrency", "knative_target", "capped_target", "manual",
             "database", "failure_detection_s", "virtual_nodes"});
  if (n["queue_timeout_s"]) {
    rc.queue_timeout = FromSeconds(Positive(n["queue_timeout_s"], "runtime.queue_timeout_s"));
  }
  if (n["shards_per_node"]) rc.shards_per_node = Get<int>(n["shards_per_node"], "shards_per_node");
  if (n["shard_cpu"]) rc.shard_cpu = Positive(n["shard_cpu"], "runtime.shard_cpu");
  if (n["stability"]) {
    rc.resource_stability = Positive(n["stability"], "runtime.stability");
    if (rc.resource_stability >= 1.0) throw ConfigError("runtime.stability must be < 1");
  }
  if (n["commit_apply_us"]) {
    rc.commit_apply = FromMicros(NonNegative(n["commit_apply_us"], "runtime.commit_apply_us"));
  }
  if (n["scale_interval_s"]) {
    rc.scale_interval = FromSeconds(Positive(n["scale_interval_s"], "runtime.scale_interval_s"));
  }
  if (n["stable_window_s"]) {
    rc.stable_window = FromSeconds(Positive(n["stable_window_s"], "runtime.stable_window_s"));
  }
  if (n["oprc_utilization"]) {
    rc.oprc_target_utilization = Positive(n["oprc_utilization"], "runtime.oprc_utilization");
  }
  if (n["controller_interval_s"]) {
    rc.controller.interval =
        FromSeconds(Positive(n["controller_interval_s"], "runtime.controller_interval_s"));
  }
  if (n["headroom"]) rc.controller.headroom = NonNegative(n["headroom"], "runtime.headroom");
  if (n["knative_concurrency"]) {
    rc.knative_container_concurrency = Get<int>(n["knative_concurrency"], "knative_concurrency");
  }
  if (n["knative_target"]) rc.knative_target = Positive(n["knative_target"], "knative_target");
  if (n["capped_target"]) rc.capped_target = Positive(n["capped_target"], "capped_target");
  if (n["failure_detection_s"]) {
    rc.failure_detection =
        FromSeconds(NonNegative(n["failure_detection_s"], "runtime.failure_detection_s"));
  }
  if (n["virtual_nodes"]) rc.virtual_nodes = Get<int>(n["virtual_nodes"], "virtual_nodes");
  if (auto m = n["manual"]) {
    AllowOnly(m, "runtime.manual", {"pods", "concurrency"});
    if (m["pods"]) rc.manual_pods = Get<int>(m["pods"], "runtime.manual.pods");
    if (m["concurrency"]) {
      rc.manual_concurrency = Get<int>(m["concurrency"], "runtime.manual.concurrency");
    }
    if (rc.manual_pods < 0 || rc.manual_concurrency < 1) {
      throw ConfigError("runtime.manual needs pods >= 0 and concurrency >= 1");
    }
  }
  if (auto d = n["database"]) {
    AllowOnly(d, "runtime.database", {"servers", "op_us", "exponential", "tier"});
    runtime::ExternalDatabaseConfig db;
    if (d["servers"]) db.servers = Get<int>(d["servers"], "runtime.database.servers");
    if (db.servers < 1) throw ConfigError("runtime.database.servers must be >= 1");
    if (d["op_us"]) db.op_time = FromMicros(Positive(d["op_us"], "runtime.database.op_us"));
    if (d["exponential"]) db.exponential = Get<bool>(d["exponential"], "database.exponential");
    if (d["tier"]) {
      try {
        db.tier = sim::ParseTier(Get<std::string>(d["tier"], "runtime.database.tier"));
      } catch (const OaasError& e) {
        throw ConfigError(e.what());
      }
    }
    rc.database = db;
  }
}

}  // namespace

ScenarioConfig ParseScenario(const std::string& yaml, const std::string& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("scenario is not valid YAML: {}", e.what()));
  }
  AllowOnly(root, "scenario",
            {"name", "manifest", "class", "function", "services", "sweep_services", "objects", "state_fields",
             "blob_bytes", "chain", "policy", "seed", "cluster", "network", "runtime", "failure",
             "warmup", "load", "drain_s", "thresholds", "variants"});
  ScenarioConfig s;
  if (root["name"]) s.name = Get<std::string>(root["name"], "name");
  for (const char* key : {"manifest", "class", "function", "load", "cluster"}) {
    if (!root[key]) throw ConfigError(fmt::format("scenario needs '{}'", key));
  }
  std::filesystem::path manifest = Get<std::string>(root["manifest"], "manifest");
  if (manifest.is_relative()) manifest = std::filesystem::path(base_dir) / manifest;
  s.manifest = manifest.lexically_normal().string();
  s.class_name = Get<std::string>(root["class"], "class");
  s.function = Get<std::string>(root["function"], "function");
  if (root["services"]) s.services = Get<int>(root["services"], "services");
  if (root["sweep_services"]) {
    s.sweep_services = Get<int>(root["sweep_services"], "sweep_services");
    if (s.sweep_services < 0) throw ConfigError("sweep_services must be >= 0");
  }
  if (root["objects"]) s.objects = Get<int>(root["objects"], "objects");
  if (root["state_fields"]) s.state_fields = Get<int>(root["state_fields"], "state_fields");
  if (root["blob_bytes"]) s.blob_bytes = Get<int64_t>(root["blob_bytes"], "blob_bytes");
  if (root["chain"]) s.chain = Get<int>(root["chain"], "chain");
  if (s.services < 1 || s.objects < 1 || s.chain < 1 || s.state_fields < 0 || s.blob_bytes < 0) {
    throw ConfigError("services, objects and chain must be >= 1");
  }
  if (root["policy"]) s.policy = enforcement::ParsePolicy(Get<std::string>(root["policy"], "policy"));
  if (root["seed"]) s.seed = Get<uint64_t>(root["seed"], "seed");

  const auto& cl = root["cluster"];
  AllowOnly(cl, "cluster", {"nodes", "links", "cold_start_s", "threads_per_core"});
  if (!cl["nodes"] || !cl["nodes"].IsSequence() || cl["nodes"].size() == 0) {
    throw ConfigError("cluster.nodes must be a non-empty list");
  }
  std::set<std::string> names;
  for (const auto& n : cl["nodes"]) {
    AllowOnly(n, "cluster.nodes entry", {"name", "cpu", "site", "role", "count"});
    NodeSpec ns;
    if (!n["name"]) throw ConfigError("every node needs a name");
    ns.name = Get<std::string>(n["name"], "node name");
    if (!names.insert(ns.name).second) throw ConfigError(fmt::format("duplicate node {}", ns.name));
    if (n["cpu"]) ns.cpu = Positive(n["cpu"], "node cpu");
    if (n["site"]) ns.site = Get<std::string>(n["site"], "node site");
    if (n["count"]) ns.count = Get<int>(n["count"], "node count");
    if (ns.count < 1) throw ConfigError("node count must be >= 1");
    if (n["role"]) {
      const auto role = Lower(Get<std::string>(n["role"], "node role"));
      if (role == "storage") {
        ns.role = NodeRole::kStorage;
      } else if (role == "compute") {
        ns.role = NodeRole::kCompute;
      } else if (role == "both") {
        ns.role = NodeRole::kBoth;
      } else {
        throw ConfigError(fmt::format("unknown node role '{}'", role));
      }
    }
    s.nodes.push_back(ns);
  }
  if (auto links = cl["links"]) {
    for (const auto& l : links) {
      AllowOnly(l, "cluster.links entry", {"a", "b", "tier"});
      if (!l["a"] || !l["b"] || !l["tier"]) throw ConfigError("links need a, b and tier");
      LinkSpec ls;
      ls.site_a = Get<std::string>(l["a"], "link a");
      ls.site_b = Get<std::string>(l["b"], "link b");
      try {
        ls.tier = sim::ParseTier(Get<std::string>(l["tier"], "link tier"));
      } catch (const OaasError& e) {
        throw ConfigError(e.what());
      }
      s.links.push_back(ls);
    }
  }
  if (cl["cold_start_s"]) s.cold_start = FromSeconds(NonNegative(cl["cold_start_s"], "cold_start_s"));
  if (cl["threads_per_core"]) s.threads_per_core = Positive(cl["threads_per_core"], "threads_per_core");

  if (auto net = root["network"]) {
    AllowOnly(net, "network", {"local_us", "datacenter_factor", "internet_factor", "per_byte_ns"});
    if (net["local_us"]) s.local_one_way = FromMicros(Positive(net["local_us"], "network.local_us"));
    if (net["datacenter_factor"]) {
      s.datacenter_factor = Positive(net["datacenter_factor"], "network.datacenter_factor");
    }
    if (net["internet_factor"]) {
      s.internet_factor = Positive(net["internet_factor"], "network.internet_factor");
    }
    if (net["per_byte_ns"]) s.per_byte_ns = NonNegative(net["per_byte_ns"], "network.per_byte_ns");
  }
  if (auto rt = root["runtime"]) ParseRuntime(rt, s.runtime);
  s.runtime.policy = s.policy;
  if (auto f = root["failure"]) {
    AllowOnly(f, "failure", {"enabled", "mtbf_s", "jitter_s", "recovery_s", "random_phase"});
    if (!f["enabled"] || Get<bool>(f["enabled"], "failure.enabled")) {
      sim::FailureConfig fc;
      if (f["mtbf_s"]) fc.mtbf = FromSeconds(Positive(f["mtbf_s"], "failure.mtbf_s"));
      if (f["jitter_s"]) fc.jitter_stddev = FromSeconds(NonNegative(f["jitter_s"], "failure.jitter_s"));
      if (f["recovery_s"]) {
        fc.recovery_time = FromSeconds(Positive(f["recovery_s"], "failure.recovery_s"));
      }
      if (f["random_phase"]) fc.random_phase = Get<bool>(f["random_phase"], "failure.random_phase");
      s.failure = fc;
    }
  }
  s.load = ParseLoad(root["load"], "load", s.seed);
  if (auto w = root["warmup"]) s.warmup = ParseLoad(w, "warmup", s.seed ^ 0x5eedULL);
  if (root["drain_s"]) s.drain = FromSeconds(NonNegative(root["drain_s"], "drain_s"));
  if (auto t = root["thresholds"]) {
    AllowOnly(t, "thresholds", {"min_achieved_fraction", "max_error_ratio"});
    if (t["min_achieved_fraction"]) {
      s.thresholds.min_achieved_fraction = NonNegative(t["min_achieved_fraction"], "thresholds");
    }
    if (t["max_error_ratio"]) {
      s.thresholds.max_error_ratio = NonNegative(t["max_error_ratio"], "thresholds");
    }
  }
  if (auto vs = root["variants"]) {
    if (!vs.IsSequence()) throw ConfigError("variants must be a list");
    std::set<std::string> seen;
    for (const auto& v : vs) {
      AllowOnly(v, "variants entry", {"name", "function", "compute"});
      Variant variant;
      if (!v["name"]) throw ConfigError("every variant needs a name");
      variant.name = Get<std::string>(v["name"], "variant name");
      if (!seen.insert(variant.name).second) {
        throw ConfigError(fmt::format("duplicate variant {}", variant.name));
      }
      if (v["function"]) variant.function = Get<std::string>(v["function"], "variant function");
      if (auto c = v["compute"]) {
        for (const auto& n : c) {
          auto name = Get<std::string>(n, "variant compute node");
          if (!names.contains(name)) {
            throw ConfigError(fmt::format("variant {} names unknown node {}", variant.name, name));
          }
          variant.compute.push_back(std::move(name));
        }
      }
      s.variants.push_back(std::move(variant));
    }
  }
  return s;
}

std::vector<ScenarioConfig> ExpandVariants(const ScenarioConfig& scenario) {
  if (scenario.variants.empty()) return {scenario};
  std::vector<ScenarioConfig> out;
  for (const auto& v : scenario.variants) {
    auto s = scenario;
    s.variants.clear();
    s.name = scenario.name + "/" + v.name;
    if (v.function) s.function = *v.function;
    if (!v.compute.empty()) {
      const std::set<std::string> compute(v.compute.begin(), v.compute.end());
      for (auto& n : s.nodes) {
        const bool stores = n.role == NodeRole::kStorage || n.role == NodeRole::kBoth;
        if (compute.contains(n.name)) {
          n.role = stores ? NodeRole::kBoth : NodeRole::kCompute;
        } else {
          n.role = stores ? NodeRole::kStorage : NodeRole::kIdle;
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

ScenarioConfig LoadScenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read scenario {}", path));
  std::stringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return ParseScenario(buf.str(), dir.empty() ? "." : dir.string());
}

}  // namespace oaas::harness
