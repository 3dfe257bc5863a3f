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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>

#include "oaas/common/time.h"
#include "oaas/sim/random.h"

namespace oaas::sim {

enum class Tier { kLocal = 0, kDatacenter = 1, kInternet = 2 };

std::string_view TierName(Tier tier);
Tier ParseTier(std::string_view name);

struct TierLatency {
  Duration one_way{0};
  Duration jitter_stddev{0};
};

/// Tiered latency model. Endpoints are identified by node id plus a site
/// label: the same node is Local, two nodes on one site are Datacenter, and
/// cross-site pairs are looked up in the link table.
class NetworkModel {
 public:
  /// Local 20us; Datacenter 2x Local; Internet 35x Local; 0.1 ns/byte.
  static NetworkModel DefaultPreset();

  void SetTier(Tier tier, TierLatency latency) { tiers_[static_cast<int>(tier)] = latency; }
  const TierLatency& tier(Tier t) const { return tiers_[static_cast<int>(t)]; }
  void SetPerByteNanos(double ns) { per_byte_ns_ = ns; }
  double per_byte_ns() const { return per_byte_ns_; }

  /// Declares the tier between two sites (symmetric).
  void Link(const std::string& site_a, const std::string& site_b, Tier tier);

  /// Throws UnknownTierError for unlinked cross-site pairs.
  Tier Classify(int src_node, std::string_view src_site, int dst_node,
                std::string_view dst_site) const;

  /// Sampled one-way latency plus the transfer component.
  Duration Delay(Tier tier, int64_t bytes, Rng* rng = nullptr) const;
  Duration TransferTime(int64_t bytes) const;

  /// Checks Local <= Datacenter <= Internet on mean one-way latency.
  bool Monotone() const;

 private:
  std::array<TierLatency, 3> tiers_{};
  double per_byte_ns_ = 0.0;
  std::map<std::pair<std::string, std::string>, Tier> links_;
};

}  // namespace oaas::sim
