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

#include <stdexcept>
#include <string>

namespace oaas {

/// Root of every error raised by the platform. Each subclass corresponds to
/// one failure category that callers are expected to distinguish.
class OaasError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define OAAS_DEFINE_ERROR(Name)              \
  class Name : public OaasError {            \
   public:                                   \
    using OaasError::OaasError;              \
  }

// Manifest parsing and resolution.
OAAS_DEFINE_ERROR(SyntaxError);
OAAS_DEFINE_ERROR(SchemaError);
OAAS_DEFINE_ERROR(RangeError);
OAAS_DEFINE_ERROR(CycleError);
OAAS_DEFINE_ERROR(UnknownParentError);
OAAS_DEFINE_ERROR(DuplicateKeyError);
OAAS_DEFINE_ERROR(UnknownFunctionError);

// Simulation substrate.
OAAS_DEFINE_ERROR(PastTimestampError);
OAAS_DEFINE_ERROR(InsufficientCapacityError);
OAAS_DEFINE_ERROR(ContainerColdError);
OAAS_DEFINE_ERROR(ConcurrencyExceededError);
OAAS_DEFINE_ERROR(UnknownTierError);

// Object store.
OAAS_DEFINE_ERROR(DuplicateMemberError);
OAAS_DEFINE_ERROR(UnknownMemberError);
OAAS_DEFINE_ERROR(InsufficientMembersError);
OAAS_DEFINE_ERROR(NotFoundError);
OAAS_DEFINE_ERROR(StaleRevisionError);
OAAS_DEFINE_ERROR(NoPrimaryError);
OAAS_DEFINE_ERROR(AllReplicasDownError);

// Runtime and enforcement.
OAAS_DEFINE_ERROR(NoTemplateError);
OAAS_DEFINE_ERROR(DomainError);
OAAS_DEFINE_ERROR(InfeasiblePlanError);

// Harness.
OAAS_DEFINE_ERROR(ConfigError);
OAAS_DEFINE_ERROR(IoError);

#undef OAAS_DEFINE_ERROR

}  // namespace oaas
