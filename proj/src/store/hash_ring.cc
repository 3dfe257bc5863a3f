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

#include "oaas/store/hash_ring.h"

#include <algorithm>

#include <fmt/format.h>

#include "oaas/common/errors.h"
#include "oaas/common/hash.h"

namespace oaas::store {

HashRing::HashRing(int virtual_nodes, uint64_t seed)
    : virtual_nodes_(std::max(1, virtual_nodes)), seed_(seed) {}

uint64_t HashRing::KeyHash(std::string_view key) const { return HashKey(key, seed_); }

uint64_t HashRing::VirtualNodeHash(MemberId member, int index) const {
  const uint64_t base = SplitMix64(seed_ ^ SplitMix64(static_cast<uint64_t>(member)));
  return SplitMix64(base + static_cast<uint64_t>(index));
}

void HashRing::Insert(MemberId member) {
  if (members_.contains(member)) {
    throw DuplicateMemberError(fmt::format("member {} already on the ring", member));
  }
  members_.insert(member);
  auto& mine = member_positions_[member];
  for (int i = 0; i < virtual_nodes_; ++i) {
    uint64_t pos = VirtualNodeHash(member, i);
    // Linear probing on the (astronomically unlikely) collision keeps
    // existing owners untouched.
    while (positions_.contains(pos)) ++pos;
    positions_.emplace(pos, member);
    mine.push_back(pos);
  }
}

void HashRing::Remove(MemberId member) {
  auto it = member_positions_.find(member);
  if (it == member_positions_.end()) {
    throw UnknownMemberError(fmt::format("member {} is not on the ring", member));
  }
  for (uint64_t pos : it->second) positions_.erase(pos);
  member_positions_.erase(it);
  members_.erase(member);
}

MemberId HashRing::LookupHash(uint64_t hash) const {
  if (positions_.empty()) throw InsufficientMembersError("hash ring is empty");
  auto it = positions_.lower_bound(hash);
  if (it == positions_.end()) it = positions_.begin();
  return it->second;
}

MemberId HashRing::Lookup(std::string_view key) const { return LookupHash(KeyHash(key)); }

std::vector<MemberId> HashRing::WalkHash(uint64_t hash, size_t n) const {
  if (n > members_.size()) {
    throw InsufficientMembersError(
        fmt::format("need {} distinct members, ring has {}", n, members_.size()));
  }
  std::vector<MemberId> out;
  out.reserve(n);
  if (n == 0) return out;
  auto it = positions_.lower_bound(hash);
  for (size_t steps = 0; steps < positions_.size() && out.size() < n; ++steps) {
    if (it == positions_.end()) it = positions_.begin();
    if (std::find(out.begin(), out.end(), it->second) == out.end()) out.push_back(it->second);
    ++it;
  }
  return out;
}

std::vector<MemberId> HashRing::Walk(std::string_view key, size_t n) const {
  return WalkHash(KeyHash(key), n);
}

std::map<MemberId, double> HashRing::OwnershipFractions() const {
  std::map<MemberId, double> out;
  if (positions_.empty()) return out;
  for (MemberId m : members_) out[m] = 0.0;
  constexpr double kSpace = 18446744073709551616.0;  // 2^64
  uint64_t prev = positions_.rbegin()->first;
  for (const auto& [pos, member] : positions_) {
    // Arc (prev, pos] belongs to `member`; unsigned wrap handles the first arc.
    out[member] += static_cast<double>(pos - prev) / kSpace;
    prev = pos;
  }
  if (positions_.size() == 1) out[positions_.begin()->second] = 1.0;
  return out;
}

}  // namespace oaas::store
