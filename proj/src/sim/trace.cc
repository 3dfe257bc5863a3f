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

#include "oaas/sim/trace.h"

#include <sstream>

#include <fmt/format.h>

namespace oaas::sim {

void Trace::Write(std::ostream& out) const {
  for (const auto& r : records_) {
    const auto ns = r.time.count();
    out << fmt::format("{}.{:09d} {} {} {}\n", ns / 1'000'000'000, ns % 1'000'000'000, r.kind,
                       r.entity, r.detail);
  }
}

std::string Trace::Dump() const {
  std::ostringstream out;
  Write(out);
  return out.str();
}

std::string_view DetailField(std::string_view detail, std::string_view key) {
  size_t pos = 0;
  while (pos < detail.size()) {
    size_t end = detail.find(' ', pos);
    if (end == std::string_view::npos) end = detail.size();
    auto token = detail.substr(pos, end - pos);
    if (token.size() > key.size() && token.substr(0, key.size()) == key &&
        token[key.size()] == '=') {
      return token.substr(key.size() + 1);
    }
    pos = end + 1;
  }
  return {};
}

}  // namespace oaas::sim
