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
#include <vector>

#include "oaas/enforcement/planning.h"
#include "oaas/harness/load.h"
#include "oaas/runtime/class_runtime.h"
#include "oaas/sim/failure.h"
#include "oaas/sim/network.h"

namespace oaas::harness {

/// kIdle nodes exist in the cluster but host nothing.
enum class NodeRole { kStorage, kCompute, kBoth, kIdle };

struct NodeSpec {
  std::string name;
  double cpu = 16.0;
  std::string site = "dc";
  NodeRole role = NodeRole::kBoth;
  /// Expands into `count` nodes named name-0, name-1, ...
  int count = 1;
};

struct LinkSpec {
  std::string site_a;
  std::string site_b;
  sim::Tier tier = sim::Tier::kDatacenter;
};

struct Thresholds {
  std::optional<double> min_achieved_fraction;
  std::optional<double> max_error_ratio;
};

/// A named alternative of a scenario: another method, or another set of
/// nodes allowed to host containers of non-local methods.
struct Variant {
  std::string name;
  std::optional<std::string> function;
  /// Node names (before count expansion); empty keeps the roles as declared.
  std::vector<std::string> compute;
};

struct ScenarioConfig {
  std::string name = "scenario";
  /// Absolute or relative to the working directory after loading.
  std::string manifest;
  std::string class_name;
  std::string function;
  /// Copies of the class deployed side by side, each with its own load.
  int services = 1;
  /// When positive, the run is repeated with 1..sweep_services copies.
  int sweep_services = 0;
  int objects = 100;
  /// Fields per structured attribute of a fresh object.
  int state_fields = 10;
  /// Size of the blob attached under every unstructured key; 0 attaches none.
  int64_t blob_bytes = 0;
  /// Invocations of `function` per request.
  int chain = 1;
  enforcement::PolicyKind policy = enforcement::PolicyKind::kOprc;
  uint64_t seed = 1;

  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  Duration cold_start = FromSeconds(1.0);
  double threads_per_core = 1.0;
  Duration local_one_way = FromMicros(20);
  double datacenter_factor = 2.0;
  double internet_factor = 35.0;
  double per_byte_ns = 0.1;

  runtime::RuntimeConfig runtime;
  std::optional<sim::FailureConfig> failure;

  std::optional<LoadSpec> warmup;
  LoadSpec load;
  /// Time after the measured round for its requests to finish.
  Duration drain = FromSeconds(10.0);
  Thresholds thresholds;
  std::vector<Variant> variants;
};

/// Throws ConfigError (malformed scenario) or IoError (unreadable file).
/// Relative manifest paths resolve against the scenario file's directory.
ScenarioConfig LoadScenario(const std::string& path);
ScenarioConfig ParseScenario(const std::string& yaml, const std::string& base_dir = ".");

/// One scenario per variant, named `<scenario>/<variant>`; the scenario
/// itself when it declares none.
std::vector<ScenarioConfig> ExpandVariants(const ScenarioConfig& scenario);

}  // namespace oaas::harness
