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

#include "oaas/package/resolve.h"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include <fmt/format.h>

#include "oaas/common/errors.h"

namespace oaas::package {

const ResolvedFunction* ResolvedClass::FindFunction(std::string_view fn) const {
  for (const auto& f : functions) {
    if (f.name() == fn) return &f;
  }
  return nullptr;
}

const KeySpec* ResolvedClass::FindKey(std::string_view key) const {
  for (const auto& k : key_specs) {
    if (k.name == key) return &k;
  }
  return nullptr;
}

ClassDefinition ResolvedClass::Flatten() const {
  ClassDefinition def;
  def.name = name;
  def.qos = qos;
  def.constraint = constraint;
  def.key_specs = key_specs;
  for (const auto& f : functions) {
    def.functions.push_back(f.definition);
  }
  return def;
}

namespace {

// Resolves `cls` given its already-resolved parent (if any).
ResolvedClass ResolveOne(const ClassDefinition& cls, const ResolvedClass* parent) {
  ResolvedClass out;
  out.name = cls.name;
  out.parent = cls.parent;
  out.qos = parent ? parent->qos.OverlaidWith(cls.qos) : cls.qos;
  out.constraint = parent ? parent->constraint.OverlaidWith(cls.constraint) : cls.constraint;

  if (parent) out.key_specs = parent->key_specs;
  std::set<std::string> own_keys;
  for (const auto& k : cls.key_specs) {
    if (!own_keys.insert(k.name).second) {
      throw DuplicateKeyError(
          fmt::format("class '{}' declares keySpec '{}' twice", cls.name, k.name));
    }
    auto it = std::find_if(out.key_specs.begin(), out.key_specs.end(),
                           [&](const KeySpec& e) { return e.name == k.name; });
    if (it == out.key_specs.end()) {
      out.key_specs.push_back(k);
    } else if (it->kind != k.kind) {
      throw DuplicateKeyError(fmt::format(
          "class '{}' redeclares inherited keySpec '{}' with a different kind", cls.name,
          k.name));
    }
  }

  // Inherited methods keep their position; overrides replace in place.
  std::vector<std::pair<FunctionDefinition, std::string>> fns;
  if (parent) {
    for (const auto& f : parent->functions) {
      // Re-derive from the parent's own declaration, not its effective QoS,
      // so a class-level override in the child can still apply.
      fns.emplace_back(f.definition, f.defined_in);
    }
  }
  std::set<std::string> own_fns;
  for (const auto& f : cls.functions) {
    if (!own_fns.insert(f.name).second) {
      throw DuplicateKeyError(
          fmt::format("class '{}' declares function '{}' twice", cls.name, f.name));
    }
    auto it = std::find_if(fns.begin(), fns.end(),
                           [&](const auto& e) { return e.first.name == f.name; });
    if (it == fns.end()) {
      fns.emplace_back(f, cls.name);
    } else {
      *it = {f, cls.name};
    }
  }
  for (auto& [def, origin] : fns) {
    ResolvedFunction rf;
    rf.effective_qos = out.qos.OverlaidWith(def.qos);
    rf.definition = std::move(def);
    rf.defined_in = std::move(origin);
    out.functions.push_back(std::move(rf));
  }
  return out;
}

}  // namespace

std::vector<ResolvedClass> ResolveInheritance(const PackageManifest& manifest) {
  std::map<std::string, const ClassDefinition*> by_name;
  for (const auto& c : manifest.classes) by_name[c.name] = &c;
  for (const auto& c : manifest.classes) {
    if (c.parent && !by_name.contains(*c.parent)) {
      throw UnknownParentError(
          fmt::format("class '{}' extends unknown class '{}'", c.name, *c.parent));
    }
  }

  std::map<std::string, ResolvedClass> done;
  std::vector<ResolvedClass> order;
  enum class Mark { kNone, kVisiting, kDone };
  std::map<std::string, Mark> marks;

  // Depth-first along the single parent chain; a revisit while visiting is a cycle.
  std::function<void(const ClassDefinition&)> visit = [&](const ClassDefinition& c) {
    auto& m = marks[c.name];
    if (m == Mark::kDone) return;
    if (m == Mark::kVisiting) {
      throw CycleError(fmt::format("inheritance cycle through class '{}'", c.name));
    }
    m = Mark::kVisiting;
    const ResolvedClass* parent = nullptr;
    if (c.parent) {
      visit(*by_name.at(*c.parent));
      parent = &done.at(*c.parent);
    }
    auto resolved = ResolveOne(c, parent);
    order.push_back(resolved);
    done.emplace(c.name, std::move(resolved));
    marks[c.name] = Mark::kDone;
  };
  for (const auto& c : manifest.classes) visit(c);
  return order;
}

EffectiveRequirements GetEffectiveRequirements(const ResolvedClass& resolved,
                                               std::string_view function_name) {
  const auto* fn = resolved.FindFunction(function_name);
  if (fn == nullptr) {
    throw UnknownFunctionError(
        fmt::format("class '{}' has no function '{}'", resolved.name, function_name));
  }
  return {fn->effective_qos, resolved.constraint};
}

std::vector<std::string> DeploymentWarnings(const ResolvedClass& resolved) {
  std::vector<std::string> warnings;
  for (const auto& [key, raw] : resolved.constraint.unenforced) {
    warnings.push_back(fmt::format("class '{}': constraint '{}' = {} is recorded but not enforced",
                                   resolved.name, key, raw));
  }
  return warnings;
}

}  // namespace oaas::package
