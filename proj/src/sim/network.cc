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

#include "oaas/sim/network.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "oaas/common/errors.h"

namespace oaas::sim {

std::string_view TierName(Tier tier) {
  switch (tier) {
    case Tier::kLocal:
      return "Local";
    case Tier::kDatacenter:
      return "Datacenter";
    case Tier::kInternet:
      return "Internet";
  }
  return "Local";
}

Tier ParseTier(std::string_view name) {
  if (name == "Local" || name == "local") return Tier::kLocal;
  if (name == "Datacenter" || name == "datacenter") return Tier::kDatacenter;
  if (name == "Internet" || name == "internet") return Tier::kInternet;
  throw UnknownTierError(fmt::format("unknown network tier '{}'", name));
}

NetworkModel NetworkModel::DefaultPreset() {
  NetworkModel m;
  const Duration local = FromMicros(20);
  m.SetTier(Tier::kLocal, {local, Duration(0)});
  m.SetTier(Tier::kDatacenter, {2 * local, Duration(0)});
  m.SetTier(Tier::kInternet, {35 * local, Duration(0)});
  m.SetPerByteNanos(0.1);
  return m;
}

void NetworkModel::Link(const std::string& site_a, const std::string& site_b, Tier tier) {
  links_[{site_a, site_b}] = tier;
  links_[{site_b, site_a}] = tier;
}

Tier NetworkModel::Classify(int src_node, std::string_view src_site, int dst_node,
                            std::string_view dst_site) const {
  if (src_node == dst_node) return Tier::kLocal;
  auto it = links_.find({std::string(src_site), std::string(dst_site)});
  if (it != links_.end()) return it->second;
  if (src_site == dst_site) return Tier::kDatacenter;
  throw UnknownTierError(
      fmt::format("no network tier declared between sites '{}' and '{}'", src_site, dst_site));
}

Duration NetworkModel::TransferTime(int64_t bytes) const {
  return Duration(static_cast<int64_t>(std::floor(static_cast<double>(bytes) * per_byte_ns_ + 0.5)));
}

Duration NetworkModel::Delay(Tier t, int64_t bytes, Rng* rng) const {
  const auto& lat = tier(t);
  Duration one_way = lat.one_way;
  if (rng != nullptr && lat.jitter_stddev.count() > 0) {
    const double sampled = rng->Normal(static_cast<double>(lat.one_way.count()),
                                       static_cast<double>(lat.jitter_stddev.count()));
    one_way = Duration(static_cast<int64_t>(std::max(0.0, std::floor(sampled + 0.5))));
  }
  return one_way + TransferTime(bytes);
}

bool NetworkModel::Monotone() const {
  return tier(Tier::kLocal).one_way <= tier(Tier::kDatacenter).one_way &&
         tier(Tier::kDatacenter).one_way <= tier(Tier::kInternet).one_way;
}

}  // namespace oaas::sim
