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

#include <cstdint>
#include <map>
#include <set>
#include <string_view>
#include <vector>

namespace oaas::store {

using MemberId = int;

inline constexpr int kDefaultVirtualNodes = 128;

/**
 * Consistent-hash ring with virtual nodes.
 *
 * Each member occupies `virtual_nodes` positions derived from a fixed 64-bit
 * hash of (seed, member, index). A key belongs to the first position at or
 * clockwise after its hash. Removing a member only reassigns that member's
 * arcs.
 */
class HashRing {
 public:
  explicit HashRing(int virtual_nodes = kDefaultVirtualNodes, uint64_t seed = 0);

  /// Throws DuplicateMemberError.
  void Insert(MemberId member);
  /// Throws UnknownMemberError.
  void Remove(MemberId member);

  bool Contains(MemberId member) const { return members_.contains(member); }
  const std::set<MemberId>& members() const { return members_; }
  size_t size() const { return members_.size(); }
  int virtual_nodes() const { return virtual_nodes_; }
  const std::map<uint64_t, MemberId>& positions() const { return positions_; }

  uint64_t KeyHash(std::string_view key) const;
  uint64_t VirtualNodeHash(MemberId member, int index) const;

  /// Owner of `key`. Throws InsufficientMembersError on an empty ring.
  MemberId Lookup(std::string_view key) const;
  MemberId LookupHash(uint64_t hash) const;

  /// First `n` distinct members walking clockwise from hash(key).
  /// Throws InsufficientMembersError when fewer than `n` members exist.
  std::vector<MemberId> Walk(std::string_view key, size_t n) const;
  std::vector<MemberId> WalkHash(uint64_t hash, size_t n) const;

  /// Fraction of the 2^64 hash space owned by each member.
  std::map<MemberId, double> OwnershipFractions() const;

 private:
  int virtual_nodes_;
  uint64_t seed_;
  std::set<MemberId> members_;
  std::map<uint64_t, MemberId> positions_;
  std::map<MemberId, std::vector<uint64_t>> member_positions_;
};

}  // namespace oaas::store
