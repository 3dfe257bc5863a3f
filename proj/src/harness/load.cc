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

#include "oaas/harness/load.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "oaas/common/errors.h"

namespace oaas::harness {

std::string_view LoadPatternName(LoadPattern pattern) {
  switch (pattern) {
    case LoadPattern::kConstantRate:
      return "constant";
    case LoadPattern::kBurst:
      return "burst";
    case LoadPattern::kClosedLoop:
      return "closed";
  }
  return "constant";
}

LoadPattern ParseLoadPattern(std::string_view name) {
  std::string v(name);
  for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (v == "constant" || v == "constantrate") return LoadPattern::kConstantRate;
  if (v == "burst") return LoadPattern::kBurst;
  if (v == "closed" || v == "closedloop") return LoadPattern::kClosedLoop;
  throw ConfigError(fmt::format("unknown load pattern '{}'", name));
}

void LoadSpec::Validate() const {
  if (duration.count() <= 0) throw ConfigError("load duration must be positive");
  switch (pattern) {
    case LoadPattern::kConstantRate:
      if (!(rps > 0)) throw ConfigError("load rps must be positive");
      break;
    case LoadPattern::kBurst:
      if (!(rps > 0)) throw ConfigError("burst rps must be positive");
      if (idle.count() <= 0 || burst.count() <= 0) {
        throw ConfigError("burst idle and burst durations must be positive");
      }
      break;
    case LoadPattern::kClosedLoop:
      if (clients < 1) throw ConfigError("closed-loop clients must be >= 1");
      break;
  }
}

LoadGenerator::LoadGenerator(sim::EventLoop& loop, LoadSpec spec, SimTime start, IssueFn issue)
    : loop_(loop), spec_(spec), start_(start), issue_(std::move(issue)), rng_(spec.seed) {
  spec_.Validate();
}

LoadGenerator::~LoadGenerator() { *alive_ = false; }

Duration LoadGenerator::Gap() { return FromSeconds(rng_.Exponential(1.0 / spec_.rps)); }

void LoadGenerator::Start() {
  switch (spec_.pattern) {
    case LoadPattern::kConstantRate:
      poisson_next_ = start_ + (spec_.poisson ? Gap() : Duration(0));
      ScheduleOpen(0);
      break;
    case LoadPattern::kBurst:
      ScheduleBurst(0, 0);
      break;
    case LoadPattern::kClosedLoop:
      loop_.Schedule(std::max(start_, loop_.Now()), [this, alive = alive_] {
        if (!*alive) return;
        for (int i = 0; i < spec_.clients; ++i) IssueOne(true);
      });
      break;
  }
}

void LoadGenerator::IssueOne(bool closed) {
  ++issued_;
  ++outstanding_;
  max_outstanding_ = std::max(max_outstanding_, outstanding_);
  issue_([this, alive = alive_, closed] {
    if (!*alive) return;
    --outstanding_;
    if (closed && loop_.Now() < end()) IssueOne(true);
  });
}

void LoadGenerator::ScheduleOpen(uint64_t k) {
  SimTime at;
  if (spec_.poisson) {
    at = poisson_next_;
  } else {
    at = start_ + FromSeconds(static_cast<double>(k) / spec_.rps);
  }
  if (at >= end()) return;
  loop_.Schedule(at, [this, alive = alive_, k] {
    if (!*alive) return;
    if (spec_.poisson) poisson_next_ += Gap();
    IssueOne(false);
    ScheduleOpen(k + 1);
  });
}

void LoadGenerator::ScheduleBurst(uint64_t cycle, uint64_t k) {
  const SimTime window = start_ + (spec_.idle + spec_.burst) * static_cast<int64_t>(cycle) + spec_.idle;
  if (window >= end()) return;
  const SimTime window_end = std::min(window + spec_.burst, end());
  const SimTime at = window + FromSeconds(static_cast<double>(k) / spec_.rps);
  if (at >= window_end) {
    ScheduleBurst(cycle + 1, 0);
    return;
  }
  loop_.Schedule(at, [this, alive = alive_, cycle, k] {
    if (!*alive) return;
    IssueOne(false);
    ScheduleBurst(cycle, k + 1);
  });
}

}  // namespace oaas::harness
