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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace oaas::package {

enum class Locality { kLocal, kNone };

std::string_view LocalityName(Locality locality);

/// Quality-of-service requirements attachable to a class or a method. An
/// absent field means "not declared here"; inheritance fills it in.
struct QosSpec {
  /// Guaranteed invocations per second.
  std::optional<int64_t> throughput;
  /// Percent in the open interval (0, 100).
  std::optional<double> availability;
  std::optional<Locality> locality;

  /// Fields declared in `over` replace the ones in `*this`.
  QosSpec OverlaidWith(const QosSpec& over) const;
  bool Empty() const { return !throughput && !availability && !locality; }

  friend bool operator==(const QosSpec&, const QosSpec&) = default;
};

/// Deployment constraints. Only `persistent` and `runtime_req` are
/// enforced; the remaining vocabulary is retained and reported.
struct ConstraintSpec {
  std::optional<bool> persistent;
  std::map<std::string, std::string> runtime_req;
  /// budget / consistency / jurisdiction / encryption, as raw YAML text.
  std::map<std::string, std::string> unenforced;

  bool IsPersistent() const { return persistent.value_or(true); }
  ConstraintSpec OverlaidWith(const ConstraintSpec& over) const;

  friend bool operator==(const ConstraintSpec&, const ConstraintSpec&) = default;
};

/// Keys accepted under `constraint` that are parsed but never enforced.
const std::vector<std::string>& UnenforcedConstraintKeys();

enum class KeyKind { kStructured, kUnstructured };

struct KeySpec {
  std::string name;
  KeyKind kind = KeyKind::kUnstructured;

  friend bool operator==(const KeySpec&, const KeySpec&) = default;
};

enum class Archetype { kChatty, kDataIntensive, kComputeIntensive };

std::string_view ArchetypeName(Archetype archetype);

enum class ServiceDistribution { kConstant, kExponential };

/// Simulation-only stand-in for a container image: how long a method runs
/// and how much state it moves. Lives under the `x-sim` key of a function.
struct WorkloadProfile {
  Archetype archetype = Archetype::kChatty;
  double service_mean_ms = 1.0;
  ServiceDistribution distribution = ServiceDistribution::kExponential;
  int64_t bytes_in = 1024;
  int64_t bytes_out = 1024;
  /// Sequential invocations issued per request; chatty defaults to 10.
  int chain_length = 1;
  double cpu = 1.0;
  int concurrency = 1;
  /// Non-empty for workflow functions: the methods invoked in order.
  std::vector<std::string> chain;

  static WorkloadProfile ForArchetype(Archetype archetype);

  friend bool operator==(const WorkloadProfile&, const WorkloadProfile&) = default;
};

struct FunctionDefinition {
  std::string name;
  std::optional<std::string> image;
  QosSpec qos;
  std::optional<WorkloadProfile> workload_profile;

  friend bool operator==(const FunctionDefinition&, const FunctionDefinition&) = default;
};

struct ClassDefinition {
  std::string name;
  std::optional<std::string> parent;
  QosSpec qos;
  ConstraintSpec constraint;
  std::vector<KeySpec> key_specs;
  std::vector<FunctionDefinition> functions;

  friend bool operator==(const ClassDefinition&, const ClassDefinition&) = default;
};

struct PackageManifest {
  std::vector<ClassDefinition> classes;

  const ClassDefinition* Find(std::string_view name) const;

  friend bool operator==(const PackageManifest&, const PackageManifest&) = default;
};

/// Parses a YAML manifest. Throws SyntaxError, SchemaError or RangeError.
PackageManifest ParseManifest(std::string_view source);
PackageManifest LoadManifestFile(const std::string& path);

/// Emits YAML that ParseManifest maps back to an equal manifest.
std::string SerializeManifest(const PackageManifest& manifest);

}  // namespace oaas::package
