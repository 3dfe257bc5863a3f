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
#include <string_view>
#include <vector>

#include "oaas/package/manifest.h"

namespace oaas::package {

struct ResolvedFunction {
  FunctionDefinition definition;
  /// Class that supplied the winning definition (the class itself or an ancestor).
  std::string defined_in;
  /// Method QoS overlaid on the class's effective QoS.
  QosSpec effective_qos;

  const std::string& name() const { return definition.name; }

  friend bool operator==(const ResolvedFunction&, const ResolvedFunction&) = default;
};

/// A class with its ancestry folded in.
struct ResolvedClass {
  std::string name;
  std::optional<std::string> parent;
  /// Class-level QoS after overlaying the ancestor chain, root first.
  QosSpec qos;
  ConstraintSpec constraint;
  std::vector<KeySpec> key_specs;
  std::vector<ResolvedFunction> functions;

  const ResolvedFunction* FindFunction(std::string_view fn) const;
  const KeySpec* FindKey(std::string_view key) const;

  /// The parent-free definition whose resolution is this class.
  ClassDefinition Flatten() const;

  friend bool operator==(const ResolvedClass&, const ResolvedClass&) = default;
};

/// Effective requirement record for one method.
struct EffectiveRequirements {
  QosSpec qos;
  ConstraintSpec constraint;

  friend bool operator==(const EffectiveRequirements&, const EffectiveRequirements&) = default;
};

/// Resolves every class of the manifest. Output follows a topological order
/// of the inheritance forest (parents first, manifest order among peers).
std::vector<ResolvedClass> ResolveInheritance(const PackageManifest& manifest);

/// Pure lookup; throws UnknownFunctionError.
EffectiveRequirements GetEffectiveRequirements(const ResolvedClass& resolved,
                                               std::string_view function_name);

/// Human-readable notices for constraints that are retained but not enforced.
std::vector<std::string> DeploymentWarnings(const ResolvedClass& resolved);

}  // namespace oaas::package
