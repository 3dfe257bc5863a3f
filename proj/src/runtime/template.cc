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

#include "oaas/runtime/template.h"

#include <fmt/format.h>

#include "oaas/common/errors.h"

namespace oaas::runtime {

ClassRuntimeTemplate LtagTemplate() {
  ClassRuntimeTemplate t;
  t.template_id = "ltag";
  t.priority = 100;
  t.accepts = [](const package::QosSpec&, const package::ConstraintSpec&) { return true; };
  t.parameters = {{"invoker", "hash-ring"},
                  {"offloading", "pure-function"},
                  {"state", "dht"},
                  {"replication", "primary-follower"}};
  return t;
}

std::vector<ClassRuntimeTemplate> DefaultTemplateRegistry() { return {LtagTemplate()}; }

const ClassRuntimeTemplate& SelectTemplate(const package::ResolvedClass& resolved,
                                           const std::vector<ClassRuntimeTemplate>& registry) {
  const ClassRuntimeTemplate* best = nullptr;
  for (const auto& t : registry) {
    if (!t.accepts) continue;
    bool ok = t.accepts(resolved.qos, resolved.constraint);
    for (const auto& fn : resolved.functions) {
      if (!ok) break;
      ok = t.accepts(fn.effective_qos, resolved.constraint);
    }
    if (ok && (best == nullptr || t.priority > best->priority)) best = &t;
  }
  if (best == nullptr) {
    throw NoTemplateError(fmt::format("no class runtime template accepts the requirements of {}",
                                      resolved.name));
  }
  return *best;
}

}  // namespace oaas::runtime
