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

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "oaas/package/manifest.h"
#include "oaas/package/resolve.h"

namespace oaas::runtime {

/// A reusable runtime design and the requirement combinations it can realize.
struct ClassRuntimeTemplate {
  std::string template_id;
  /// Higher wins when several templates accept a class.
  int priority = 0;
  std::function<bool(const package::QosSpec&, const package::ConstraintSpec&)> accepts;
  std::map<std::string, std::string> parameters;
};

/// Latency, throughput and availability guarantee template. Every field of
/// the requirement interface is optional, so it accepts any combination;
/// constraints it cannot enforce surface as deployment warnings instead.
ClassRuntimeTemplate LtagTemplate();

std::vector<ClassRuntimeTemplate> DefaultTemplateRegistry();

/// Picks the highest-priority template accepting the class-level requirements
/// and those of every function. Throws NoTemplateError.
const ClassRuntimeTemplate& SelectTemplate(const package::ResolvedClass& resolved,
                                           const std::vector<ClassRuntimeTemplate>& registry);

}  // namespace oaas::runtime
