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

#include "oaas/store/object_store.h"

#include <algorithm>

#include <fmt/format.h>

#include "oaas/common/errors.h"

namespace oaas::store {

bool ReplicaSet::Contains(MemberId m) const {
  return std::find(members.begin(), members.end(), m) != members.end();
}

ReplicaSet Place(const HashRing& ring, std::string_view object_id, size_t n_replicas) {
  ReplicaSet set;
  set.object_id = std::string(object_id);
  set.members = ring.Walk(object_id, std::max<size_t>(1, n_replicas));
  set.primary_index = 0;
  return set;
}

ReplicaSet Failover(const ReplicaSet& set, MemberId failed_member,
                    const std::function<bool(MemberId)>& is_live) {
  auto it = std::find(set.members.begin(), set.members.end(), failed_member);
  if (it == set.members.end()) {
    throw UnknownMemberError(
        fmt::format("member {} does not hold object '{}'", failed_member, set.object_id));
  }
  const size_t failed = static_cast<size_t>(it - set.members.begin());
  if (failed != set.primary_index) return set;
  const size_t n = set.members.size();
  for (size_t step = 1; step < n; ++step) {
    const size_t candidate = (failed + step) % n;
    if (is_live(set.members[candidate])) {
      ReplicaSet out = set;
      out.primary_index = candidate;
      return out;
    }
  }
  throw AllReplicasDownError(fmt::format("no live replica of '{}'", set.object_id));
}

ObjectStore::ObjectStore(sim::EventLoop& loop, const sim::Cluster& cluster,
                         const sim::NetworkModel& network, StoreConfig config,
                         const sim::RandomSource& random, sim::Trace* trace, std::string name)
    : loop_(loop),
      cluster_(cluster),
      network_(network),
      config_(config),
      rng_(random.Stream("store:" + name)),
      trace_(trace),
      name_(std::move(name)),
      ring_(config.virtual_nodes, config.ring_seed) {}

void ObjectStore::AddMember(MemberId member, sim::NodeId node) {
  ring_.Insert(member);
  members_[member] = Member{node, true};
}

ObjectStore::Entry& ObjectStore::Lookup(std::string_view object_id) {
  auto it = objects_.find(std::string(object_id));
  if (it == objects_.end()) throw NotFoundError(fmt::format("no object '{}'", object_id));
  return it->second;
}

const ObjectStore::Entry& ObjectStore::Lookup(std::string_view object_id) const {
  auto it = objects_.find(std::string(object_id));
  if (it == objects_.end()) throw NotFoundError(fmt::format("no object '{}'", object_id));
  return it->second;
}

bool ObjectStore::Contains(std::string_view object_id) const {
  return objects_.contains(std::string(object_id));
}

size_t ObjectStore::IndexOf(const Entry& e, MemberId m) const {
  auto it = std::find(e.set.members.begin(), e.set.members.end(), m);
  return it == e.set.members.end() ? e.set.members.size()
                                   : static_cast<size_t>(it - e.set.members.begin());
}

bool ObjectStore::AnyPresent(const Entry& e) const {
  return std::any_of(e.copies.begin(), e.copies.end(), [](const Copy& c) { return c.present; });
}

int64_t ObjectStore::DocumentBytes(const Document& d,
                                   const std::map<std::string, BlobRef>& blobs) const {
  int64_t bytes = static_cast<int64_t>(d.dump().size());
  for (const auto& [name, blob] : blobs) bytes += blob.bytes;
  return bytes;
}

sim::Tier ObjectStore::TierBetween(MemberId a, sim::NodeId b) const {
  const auto& na = cluster_.node(members_.at(a).node);
  const auto& nb = cluster_.node(b);
  return network_.Classify(na.id, na.site, nb.id, nb.site);
}

void ObjectStore::TracePrimary(const std::string& object_id, const Entry& e,
                               std::string_view reason) {
  if (trace_ && trace_->enabled()) {
    trace_->Record(loop_.Now(), "store.primary", name_,
                   fmt::format("object={} member={} reason={}", object_id, e.set.primary(),
                               reason));
  }
}

void ObjectStore::Create(const std::string& object_id, const std::string& class_name,
                         Document attributes, std::map<std::string, BlobRef> blobs) {
  if (objects_.contains(object_id)) {
    throw SchemaError(fmt::format("object '{}' already exists", object_id));
  }
  Entry e;
  e.class_name = class_name;
  e.set = Place(ring_, object_id, config_.replicas);
  e.copies.resize(e.set.members.size());
  for (size_t i = 0; i < e.set.members.size(); ++i) {
    auto& c = e.copies[i];
    c.present = members_.at(e.set.members[i]).live;
    if (c.present) {
      c.attributes = attributes;
      c.blobs = blobs;
    }
    by_member_[e.set.members[i]].insert(object_id);
  }
  e.durable_attributes = std::move(attributes);
  e.durable_blobs = std::move(blobs);
  auto& placed = objects_.emplace(object_id, std::move(e)).first->second;
  if (!placed.copies[0].present) {
    auto live = [&](MemberId m) {
      return members_.at(m).live && placed.copies[IndexOf(placed, m)].present;
    };
    try {
      placed.set = Failover(placed.set, placed.set.primary(), live);
    } catch (const AllReplicasDownError&) {
      placed.has_primary = false;
    }
  }
  if (placed.has_primary) TracePrimary(object_id, placed, "create");
}

ReadResult ObjectStore::Read(std::string_view object_id, sim::NodeId caller,
                             ReadMode mode) const {
  const auto& e = Lookup(object_id);
  if (e.lost || !AnyPresent(e)) {
    throw AllReplicasDownError(fmt::format("object '{}' has no live replica", object_id));
  }
  auto make = [&](size_t index, sim::Tier tier) {
    const auto& c = e.copies[index];
    ReadResult r;
    r.record.object_id = std::string(object_id);
    r.record.class_name = e.class_name;
    r.record.attributes = c.attributes;
    r.record.blobs = c.blobs;
    r.record.revision = c.revision;
    r.record.replica_set = e.set;
    r.served_by = e.set.members[index];
    r.tier = tier;
    r.delay = network_.Delay(tier, static_cast<int64_t>(c.attributes.dump().size()), &rng_);
    if (trace_ && trace_->enabled()) {
      trace_->Record(loop_.Now(), "store.read", name_,
                     fmt::format("object={} member={} tier={} rev={}", object_id, r.served_by,
                                 sim::TierName(tier), c.revision));
    }
    return r;
  };
  for (size_t i = 0; mode == ReadMode::kNearest && i < e.set.members.size(); ++i) {
    const MemberId m = e.set.members[i];
    if (e.copies[i].present && members_.at(m).live && members_.at(m).node == caller) {
      return make(i, sim::Tier::kLocal);
    }
  }
  if (!e.has_primary) {
    throw NoPrimaryError(fmt::format("object '{}' is electing a primary", object_id));
  }
  const MemberId primary = e.set.primary();
  const auto tier = members_.at(primary).node == caller ? sim::Tier::kLocal
                                                         : TierBetween(primary, caller);
  return make(e.set.primary_index, tier);
}

uint64_t ObjectStore::Commit(std::string_view object_id, Document attributes,
                             uint64_t expected_revision,
                             std::optional<std::map<std::string, BlobRef>> blobs) {
  auto& e = Lookup(object_id);
  if (e.lost || !AnyPresent(e)) {
    throw AllReplicasDownError(fmt::format("object '{}' has no live replica", object_id));
  }
  if (!e.has_primary) {
    throw NoPrimaryError(fmt::format("object '{}' is electing a primary", object_id));
  }
  auto& primary = e.copies[e.set.primary_index];
  if (primary.revision != expected_revision) {
    throw StaleRevisionError(fmt::format("object '{}' is at revision {}, expected {}", object_id,
                                         primary.revision, expected_revision));
  }
  primary.attributes = std::move(attributes);
  if (blobs) primary.blobs = std::move(*blobs);
  primary.revision = expected_revision + 1;
  e.last_committed = primary.revision;
  if (config_.persistent) {
    e.durable_attributes = primary.attributes;
    e.durable_blobs = primary.blobs;
  }
  ++commits_;
  const std::string id(object_id);
  if (trace_ && trace_->enabled()) {
    trace_->Record(loop_.Now(), "store.commit", name_,
                   fmt::format("object={} rev={} member={}", id, primary.revision,
                               e.set.primary()));
  }
  Propagate(id, e);
  return e.last_committed;
}

void ObjectStore::Propagate(const std::string& object_id, Entry& e) {
  if (e.set.members.size() < 2) return;
  const auto& primary = e.copies[e.set.primary_index];
  const sim::NodeId from = members_.at(e.set.primary()).node;
  const int64_t bytes = static_cast<int64_t>(primary.attributes.dump().size());
  for (size_t i = 0; i < e.set.members.size(); ++i) {
    if (i == e.set.primary_index) continue;
    const MemberId follower = e.set.members[i];
    if (!members_.at(follower).live || !e.copies[i].present) continue;
    const auto delay = network_.Delay(TierBetween(follower, from), bytes, &rng_);
    loop_.ScheduleAfter(delay, [this, object_id, follower, rev = primary.revision,
                                attrs = primary.attributes, blobs = primary.blobs]() mutable {
      auto it = objects_.find(object_id);
      if (it == objects_.end()) return;
      auto& entry = it->second;
      const size_t idx = IndexOf(entry, follower);
      if (idx >= entry.copies.size()) return;
      auto& copy = entry.copies[idx];
      if (!copy.present || copy.revision >= rev) return;
      copy.attributes = std::move(attrs);
      copy.blobs = std::move(blobs);
      copy.revision = rev;
      if (trace_ && trace_->enabled()) {
        trace_->Record(loop_.Now(), "store.apply", name_,
                       fmt::format("object={} member={} rev={}", object_id, follower, rev));
      }
    });
  }
}

bool ObjectStore::HasPrimary(std::string_view object_id) const {
  const auto& e = Lookup(object_id);
  return !e.lost && e.has_primary;
}

std::optional<SimTime> ObjectStore::ElectionEndsAt(std::string_view object_id) const {
  const auto& e = Lookup(object_id);
  if (e.has_primary || e.lost || e.election_ends < loop_.Now()) return std::nullopt;
  return e.election_ends;
}

std::optional<sim::NodeId> ObjectStore::PrimaryNode(std::string_view object_id) const {
  const auto& e = Lookup(object_id);
  if (e.lost || !e.has_primary) return std::nullopt;
  return members_.at(e.set.primary()).node;
}

const ReplicaSet& ObjectStore::replica_set(std::string_view object_id) const {
  return Lookup(object_id).set;
}

std::optional<ObjectRecord> ObjectStore::CopyAt(std::string_view object_id,
                                                MemberId member) const {
  const auto& e = Lookup(object_id);
  const size_t idx = IndexOf(e, member);
  if (idx >= e.copies.size() || !e.copies[idx].present) return std::nullopt;
  ObjectRecord r;
  r.object_id = std::string(object_id);
  r.class_name = e.class_name;
  r.attributes = e.copies[idx].attributes;
  r.blobs = e.copies[idx].blobs;
  r.revision = e.copies[idx].revision;
  r.replica_set = e.set;
  return r;
}

uint64_t ObjectStore::LastCommitted(std::string_view object_id) const {
  return Lookup(object_id).last_committed;
}

std::vector<std::string> ObjectStore::ObjectIds() const {
  std::vector<std::string> ids;
  ids.reserve(objects_.size());
  for (const auto& [id, e] : objects_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

int64_t ObjectStore::ObjectBytes(std::string_view object_id) const {
  const auto& e = Lookup(object_id);
  if (e.has_primary && !e.lost) {
    const auto& c = e.copies[e.set.primary_index];
    return DocumentBytes(c.attributes, c.blobs);
  }
  return DocumentBytes(e.durable_attributes, e.durable_blobs);
}

void ObjectStore::StartElection(const std::string& object_id, Entry& e) {
  e.has_primary = false;
  e.election_ends = loop_.Now() + config_.failure_detection;
  const uint64_t epoch = ++e.election_epoch;
  if (trace_ && trace_->enabled()) {
    trace_->Record(loop_.Now(), "store.election", name_,
                   fmt::format("object={} failed={} until={}", object_id, e.set.primary(),
                               e.election_ends.count()));
  }
  loop_.Schedule(e.election_ends, [this, object_id, epoch] { Elect(object_id, epoch); });
}

void ObjectStore::Elect(const std::string& object_id, uint64_t epoch) {
  auto it = objects_.find(object_id);
  if (it == objects_.end()) return;
  auto& e = it->second;
  if (e.election_epoch != epoch || e.has_primary || e.lost) return;
  auto live = [&](MemberId m) { return members_.at(m).live && e.copies[IndexOf(e, m)].present; };
  if (live(e.set.primary())) {
    Promote(object_id, e, e.set.primary_index);
    return;
  }
  try {
    const auto next = Failover(e.set, e.set.primary(), live);
    Promote(object_id, e, next.primary_index);
  } catch (const AllReplicasDownError&) {
    // Stays without a primary until a member recovers.
  }
}

void ObjectStore::Promote(const std::string& object_id, Entry& e, size_t index) {
  e.set.primary_index = index;
  e.has_primary = true;
  auto& c = e.copies[index];
  if (c.revision < e.last_committed) {
    if (config_.persistent) {
      c.attributes = e.durable_attributes;
      c.blobs = e.durable_blobs;
    } else if (trace_ && trace_->enabled()) {
      trace_->Record(loop_.Now(), "store.lost_write", name_,
                     fmt::format("object={} from={} to={}", object_id, c.revision,
                                 e.last_committed));
    }
    // The revision counter is authoritative even when data was lost.
    c.revision = e.last_committed;
  }
  TracePrimary(object_id, e, "elected");
}

void ObjectStore::OnMemberDown(MemberId member) {
  auto& m = members_.at(member);
  if (!m.live) return;
  m.live = false;
  auto it = by_member_.find(member);
  if (it == by_member_.end()) return;
  for (const auto& object_id : it->second) {
    auto& e = objects_.at(object_id);
    const size_t idx = IndexOf(e, member);
    if (idx >= e.copies.size()) continue;
    e.copies[idx].present = false;
    if (e.has_primary && idx == e.set.primary_index) StartElection(object_id, e);
  }
}

void ObjectStore::OnMemberUp(MemberId member) {
  auto& m = members_.at(member);
  if (m.live) return;
  m.live = true;
  auto it = by_member_.find(member);
  if (it == by_member_.end()) return;
  for (const auto& object_id : it->second) Backfill(object_id, member);
}

void ObjectStore::Backfill(const std::string& object_id, MemberId member) {
  auto& e = objects_.at(object_id);
  if (e.lost) return;
  const size_t idx = IndexOf(e, member);
  if (idx >= e.copies.size() || e.copies[idx].present) return;
  const bool reload = !AnyPresent(e);
  if (reload && !config_.persistent) {
    e.lost = true;
    if (trace_ && trace_->enabled()) {
      trace_->Record(loop_.Now(), "store.lost", name_, fmt::format("object={}", object_id));
    }
    return;
  }
  if (!reload && !e.has_primary) {
    // Survivors exist but are mid-election: copy from the winner afterwards.
    loop_.Schedule(std::max(loop_.Now(), e.election_ends),
                   [this, object_id, member] { Backfill(object_id, member); });
    return;
  }
  const auto delay = network_.TransferTime(ObjectBytes(object_id));
  loop_.ScheduleAfter(delay, [this, object_id, member, reload] {
    auto& entry = objects_.at(object_id);
    if (entry.lost || !members_.at(member).live) return;
    const size_t i = IndexOf(entry, member);
    if (i >= entry.copies.size() || entry.copies[i].present) return;
    auto& copy = entry.copies[i];
    if (entry.has_primary) {
      const auto& src = entry.copies[entry.set.primary_index];
      copy.attributes = src.attributes;
      copy.blobs = src.blobs;
      copy.revision = src.revision;
    } else if (!AnyPresent(entry)) {
      copy.attributes = entry.durable_attributes;
      copy.blobs = entry.durable_blobs;
      copy.revision = entry.last_committed;
    } else {
      // Another member reloaded first and an election is pending.
      Backfill(object_id, member);
      return;
    }
    copy.present = true;
    if (trace_ && trace_->enabled()) {
      trace_->Record(loop_.Now(), "store.backfill", name_,
                     fmt::format("object={} member={} rev={} reload={}", object_id, member,
                                 copy.revision, reload ? 1 : 0));
    }
    if (!entry.has_primary) Promote(object_id, entry, i);
  });
}

void ObjectStore::RemoveMember(MemberId member) {
  ring_.Remove(member);
  auto node_it = members_.find(member);
  if (node_it == members_.end()) return;
  auto objs = std::move(by_member_[member]);
  by_member_.erase(member);
  for (const auto& object_id : objs) {
    auto& e = objects_.at(object_id);
    const size_t idx = IndexOf(e, member);
    if (idx >= e.copies.size()) continue;
    const bool was_primary = e.has_primary && idx == e.set.primary_index;
    e.set.members.erase(e.set.members.begin() + static_cast<std::ptrdiff_t>(idx));
    e.copies.erase(e.copies.begin() + static_cast<std::ptrdiff_t>(idx));
    if (e.set.members.empty()) {
      e.set.primary_index = 0;
    } else if (was_primary) {
      // The member that followed the departed primary is first in line.
      e.set.primary_index = idx % e.set.members.size();
    } else if (e.set.primary_index > idx) {
      --e.set.primary_index;
    }
    // Recruit the next clockwise member not already holding a copy.
    for (MemberId candidate : ring_.Walk(object_id, ring_.size())) {
      if (e.set.Contains(candidate)) continue;
      e.set.members.push_back(candidate);
      e.copies.emplace_back();
      by_member_[candidate].insert(object_id);
      if (members_.at(candidate).live && (e.has_primary || AnyPresent(e))) {
        Backfill(object_id, candidate);
      }
      break;
    }
    if (was_primary) {
      if (e.set.members.empty()) {
        e.has_primary = false;
      } else {
        StartElection(object_id, e);
      }
    }
  }
  members_.erase(node_it);
}

}  // namespace oaas::store
