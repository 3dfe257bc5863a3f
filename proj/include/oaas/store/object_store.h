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
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "oaas/common/time.h"
#include "oaas/sim/cluster.h"
#include "oaas/sim/event_loop.h"
#include "oaas/sim/network.h"
#include "oaas/sim/random.h"
#include "oaas/sim/trace.h"
#include "oaas/store/hash_ring.h"

namespace oaas::store {

using Document = nlohmann::json;

/// Unstructured attribute; only its size and a content fingerprint are modeled.
struct BlobRef {
  int64_t bytes = 0;
  uint64_t content_hash = 0;

  friend bool operator==(const BlobRef&, const BlobRef&) = default;
};

/// Ordered replica members; the member at primary_index accepts writes.
struct ReplicaSet {
  std::string object_id;
  std::vector<MemberId> members;
  size_t primary_index = 0;

  MemberId primary() const { return members.at(primary_index); }
  bool Contains(MemberId m) const;

  friend bool operator==(const ReplicaSet&, const ReplicaSet&) = default;
};

/// First `n_replicas` distinct ring owners clockwise from hash(object_id).
/// Throws InsufficientMembersError.
ReplicaSet Place(const HashRing& ring, std::string_view object_id, size_t n_replicas);

/// Pure order rule used on member failure: the next member after the failed
/// primary (in set order) that `is_live` accepts becomes primary. Throws
/// AllReplicasDownError when no member qualifies.
ReplicaSet Failover(const ReplicaSet& set, MemberId failed_member,
                    const std::function<bool(MemberId)>& is_live);

struct ObjectRecord {
  std::string object_id;
  std::string class_name;
  Document attributes;
  std::map<std::string, BlobRef> blobs;
  uint64_t revision = 0;
  ReplicaSet replica_set;
};

struct StoreConfig {
  size_t replicas = 1;
  int virtual_nodes = kDefaultVirtualNodes;
  uint64_t ring_seed = 0;
  /// Time before a surviving replica takes over as primary.
  Duration failure_detection = FromSeconds(1.0);
  /// Objects are reloadable from durable storage after losing every replica.
  bool persistent = true;
};

enum class ReadMode { kNearest, kPrimary };

struct ReadResult {
  ObjectRecord record;
  MemberId served_by = 0;
  sim::Tier tier = sim::Tier::kLocal;
  Duration delay{0};
};

/**
 * In-memory DHT of one class runtime.
 *
 * Members are invoker shards hosted on cluster nodes. Every object has one
 * replica set; its primary applies writes (compare-and-set on revision) and
 * propagates them to followers asynchronously. A failed member loses its
 * in-memory copies: primaries fail over after the detection interval and
 * recovered members are back-filled from the primary (or from durable
 * storage when the object is persistent and no replica survived).
 */
class ObjectStore {
 public:
  ObjectStore(sim::EventLoop& loop, const sim::Cluster& cluster, const sim::NetworkModel& network,
              StoreConfig config, const sim::RandomSource& random, sim::Trace* trace = nullptr,
              std::string name = "store");

  /// Joins `member`, hosted on `node`, to the ring.
  void AddMember(MemberId member, sim::NodeId node);
  /// Leaves the ring permanently; affected objects recruit a replacement.
  void RemoveMember(MemberId member);
  sim::NodeId NodeOf(MemberId member) const { return members_.at(member).node; }
  bool MemberLive(MemberId member) const { return members_.at(member).live; }
  const HashRing& ring() const { return ring_; }

  /// Places a new object (revision 0) on `replicas` members.
  void Create(const std::string& object_id, const std::string& class_name, Document attributes,
              std::map<std::string, BlobRef> blobs);
  bool Contains(std::string_view object_id) const;

  /// Serves from a live replica on `caller` when one exists, else from the
  /// primary. Throws NotFoundError, AllReplicasDownError, NoPrimaryError.
  /// kPrimary skips the co-located shortcut (used by writers, whose commit
  /// must match the primary's revision).
  ReadResult Read(std::string_view object_id, sim::NodeId caller,
                  ReadMode mode = ReadMode::kNearest) const;

  /// Applies a write at the primary. Throws NotFoundError, NoPrimaryError,
  /// AllReplicasDownError, StaleRevisionError.
  uint64_t Commit(std::string_view object_id, Document attributes, uint64_t expected_revision,
                  std::optional<std::map<std::string, BlobRef>> blobs = std::nullopt);

  /// Whether the object has a primary able to take writes right now.
  bool HasPrimary(std::string_view object_id) const;
  /// End of the current election window, if one is open.
  std::optional<SimTime> ElectionEndsAt(std::string_view object_id) const;
  /// Node of the current primary, or nullopt during elections.
  std::optional<sim::NodeId> PrimaryNode(std::string_view object_id) const;

  const ReplicaSet& replica_set(std::string_view object_id) const;
  /// Copy held by `member`, for inspection; nullopt when it holds none.
  std::optional<ObjectRecord> CopyAt(std::string_view object_id, MemberId member) const;
  uint64_t LastCommitted(std::string_view object_id) const;
  std::vector<std::string> ObjectIds() const;

  /// Shard lifecycle hooks, driven by the failure injector.
  void OnMemberDown(MemberId member);
  void OnMemberUp(MemberId member);

  /// Bytes that a back-fill of this object transfers.
  int64_t ObjectBytes(std::string_view object_id) const;

  size_t object_count() const { return objects_.size(); }
  uint64_t commits() const { return commits_; }
  const StoreConfig& config() const { return config_; }

 private:
  struct Copy {
    bool present = false;
    Document attributes;
    std::map<std::string, BlobRef> blobs;
    uint64_t revision = 0;
  };
  struct Entry {
    std::string class_name;
    ReplicaSet set;
    std::vector<Copy> copies;  // parallel to set.members
    /// Durable image used for reload when persistent.
    Document durable_attributes;
    std::map<std::string, BlobRef> durable_blobs;
    uint64_t last_committed = 0;
    bool has_primary = true;
    SimTime election_ends{0};
    uint64_t election_epoch = 0;
    bool lost = false;
  };
  struct Member {
    sim::NodeId node = 0;
    bool live = true;
  };

  Entry& Lookup(std::string_view object_id);
  const Entry& Lookup(std::string_view object_id) const;
  size_t IndexOf(const Entry& e, MemberId m) const;
  bool AnyPresent(const Entry& e) const;
  void StartElection(const std::string& object_id, Entry& e);
  void Elect(const std::string& object_id, uint64_t epoch);
  void Promote(const std::string& object_id, Entry& e, size_t index);
  void Backfill(const std::string& object_id, MemberId member);
  void Propagate(const std::string& object_id, Entry& e);
  sim::Tier TierBetween(MemberId a, sim::NodeId b) const;
  int64_t DocumentBytes(const Document& d, const std::map<std::string, BlobRef>& blobs) const;
  void TracePrimary(const std::string& object_id, const Entry& e, std::string_view reason);

  sim::EventLoop& loop_;
  const sim::Cluster& cluster_;
  const sim::NetworkModel& network_;
  StoreConfig config_;
  mutable sim::Rng rng_;
  sim::Trace* trace_;
  std::string name_;
  HashRing ring_;
  std::map<MemberId, Member> members_;
  std::unordered_map<std::string, Entry> objects_;
  std::unordered_map<MemberId, std::set<std::string>> by_member_;
  uint64_t commits_ = 0;
};

}  // namespace oaas::store
