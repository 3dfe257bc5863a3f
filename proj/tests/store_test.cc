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


#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "oaas/common/errors.h"
#include "oaas/sim/cluster.h"
#include "oaas/sim/event_loop.h"
#include "oaas/sim/network.h"
#include "oaas/sim/random.h"
#include "oaas/sim/trace.h"
#include "oaas/store/hash_ring.h"
#include "oaas/store/object_store.h"

namespace oaas::store {
namespace {

std::vector<std::string> Keys(int n) {
  std::vector<std::string> keys;
  for (int i = 0; i < n; ++i) keys.push_back(fmt::format("key-{}", i));
  return keys;
}

TEST(HashRing, SingleMemberOwnsEverything) {
  HashRing ring;
  ring.Insert(7);
  for (const auto& k : Keys(1000)) EXPECT_EQ(ring.Lookup(k), 7);
}

TEST(HashRing, MembershipErrors) {
  HashRing ring;
  EXPECT_THROW(ring.Lookup("x"), InsufficientMembersError);
  ring.Insert(1);
  EXPECT_THROW(ring.Insert(1), DuplicateMemberError);
  EXPECT_THROW(ring.Remove(2), UnknownMemberError);
  EXPECT_THROW(ring.Walk("x", 2), InsufficientMembersError);
}

TEST(HashRing, LookupIsFirstPositionClockwise) {
  HashRing ring(16, 3);
  for (int m = 0; m < 5; ++m) ring.Insert(m);
  for (const auto& k : Keys(2000)) {
    const uint64_t h = ring.KeyHash(k);
    // Oracle: smallest clockwise distance over every virtual node.
    MemberId best = -1;
    uint64_t best_d = ~0ULL;
    for (int m = 0; m < 5; ++m) {
      for (int i = 0; i < 16; ++i) {
        const uint64_t d = ring.VirtualNodeHash(m, i) - h;
        if (d < best_d) best_d = d, best = m;
      }
    }
    EXPECT_EQ(ring.Lookup(k), best);
  }
}

TEST(HashRing, RemovalMovesOnlyTheRemovedMembersKeys) {
  const auto keys = Keys(10'000);
  for (MemberId victim = 0; victim < 5; ++victim) {
    HashRing ring;
    for (int m = 0; m < 5; ++m) ring.Insert(m);
    std::vector<MemberId> before;
    for (const auto& k : keys) before.push_back(ring.Lookup(k));
    ring.Remove(victim);
    for (size_t i = 0; i < keys.size(); ++i) {
      const MemberId after = ring.Lookup(keys[i]);
      if (before[i] == victim) {
        EXPECT_NE(after, victim);
      } else {
        EXPECT_EQ(after, before[i]) << keys[i];
      }
    }
  }
}

TEST(HashRing, InsertThenRemoveRestoresOwnership) {
  const auto keys = Keys(10'000);
  HashRing ring;
  for (int m = 0; m < 4; ++m) ring.Insert(m);
  std::vector<MemberId> before;
  for (const auto& k : keys) before.push_back(ring.Lookup(k));
  ring.Insert(99);
  for (size_t i = 0; i < keys.size(); ++i) {
    const auto now = ring.Lookup(keys[i]);
    EXPECT_TRUE(now == before[i] || now == 99);
  }
  ring.Remove(99);
  for (size_t i = 0; i < keys.size(); ++i) EXPECT_EQ(ring.Lookup(keys[i]), before[i]);
}

TEST(HashRing, FourMembersShareKeysEvenly) {
  HashRing ring(kDefaultVirtualNodes, 0);
  for (int m = 0; m < 4; ++m) ring.Insert(m);
  std::map<MemberId, int> owned;
  sim::Rng rng(11);
  for (int i = 0; i < 10'000; ++i) ++owned[ring.LookupHash(rng.Next())];
  for (int m = 0; m < 4; ++m) EXPECT_NEAR(owned[m] / 10'000.0, 0.25, 0.05);
  double sum = 0;
  for (const auto& [m, f] : ring.OwnershipFractions()) {
    sum += f;
    EXPECT_NEAR(f, owned[m] / 10'000.0, 0.02);
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

std::vector<MemberId> ClockwiseOracle(const HashRing& ring, std::string_view key, size_t n) {
  const uint64_t h = ring.KeyHash(key);
  std::vector<std::pair<uint64_t, MemberId>> dist;
  for (MemberId m : ring.members()) {
    uint64_t best = ~0ULL;
    for (int i = 0; i < ring.virtual_nodes(); ++i) {
      best = std::min(best, ring.VirtualNodeHash(m, i) - h);
    }
    dist.emplace_back(best, m);
  }
  std::sort(dist.begin(), dist.end());
  std::vector<MemberId> out;
  for (size_t i = 0; i < n; ++i) out.push_back(dist[i].second);
  return out;
}

TEST(Place, MatchesClockwiseOracle) {
  HashRing ring;
  for (int m = 10; m < 15; ++m) ring.Insert(m);
  for (const auto& k : Keys(500)) {
    const auto set = Place(ring, k, 3);
    EXPECT_EQ(set.members, ClockwiseOracle(ring, k, 3));
    EXPECT_EQ(set.primary_index, 0u);
    EXPECT_EQ(set.primary(), ring.Lookup(k));
  }
}

TEST(Place, SingletonAndExhaustion) {
  HashRing ring;
  for (int m = 0; m < 5; ++m) ring.Insert(m);
  EXPECT_EQ(Place(ring, "o", 1).members, std::vector<MemberId>{ring.Lookup("o")});
  const auto all = Place(ring, "o", 5);
  EXPECT_EQ(all.members, ClockwiseOracle(ring, "o", 5));
  EXPECT_EQ(std::set<MemberId>(all.members.begin(), all.members.end()).size(), 5u);
  EXPECT_THROW(Place(ring, "o", 6), InsufficientMembersError);
}

TEST(Failover, OrderRule) {
  ReplicaSet set{"o", {1, 2, 3}, 0};
  auto all_live = [](MemberId) { return true; };
  EXPECT_EQ(Failover(set, 1, all_live).primary(), 2);
  EXPECT_EQ(Failover(set, 3, all_live), set);
  EXPECT_EQ(Failover(set, 1, [](MemberId m) { return m == 3; }).primary(), 3);
  EXPECT_THROW(Failover(set, 1, [](MemberId) { return false; }), AllReplicasDownError);
  EXPECT_THROW(Failover(set, 9, all_live), UnknownMemberError);
  ReplicaSet wrapped{"o", {1, 2, 3}, 2};
  EXPECT_EQ(Failover(wrapped, 3, all_live).primary(), 1);
}

// Three nodes in one datacenter; member i lives on node i.
struct StoreFixture : ::testing::Test {
  sim::EventLoop loop;
  sim::Trace trace{true};
  sim::Cluster cluster{loop, sim::ClusterConfig{}, &trace};
  sim::NetworkModel net = sim::NetworkModel::DefaultPreset();
  sim::RandomSource random{5};
  std::unique_ptr<ObjectStore> store;

  void Build(size_t replicas, int members = 3, bool persistent = true) {
    for (int i = 0; i < members; ++i) cluster.AddNode(fmt::format("n{}", i), 8, "dc");
    StoreConfig cfg;
    cfg.replicas = replicas;
    cfg.persistent = persistent;
    store = std::make_unique<ObjectStore>(loop, cluster, net, cfg, random, &trace);
    for (int i = 0; i < members; ++i) store->AddMember(i, i);
  }
  void Write(const std::string& id, int value) {
    const auto r = store->Read(id, store->NodeOf(store->replica_set(id).primary()),
                               ReadMode::kPrimary);
    Document d = r.record.attributes;
    d["v"] = value;
    store->Commit(id, d, r.record.revision);
  }
  void Quiesce() { loop.RunUntil(loop.Now() + FromSeconds(1)); }
};

TEST_F(StoreFixture, CommitIncrementsAndCompareAndSet) {
  Build(3);
  store->Create("o", "C", Document{{"v", 0}}, {});
  EXPECT_EQ(store->Commit("o", Document{{"v", 1}}, 0), 1u);
  EXPECT_THROW(store->Commit("o", Document{{"v", 2}}, 0), StaleRevisionError);
  EXPECT_EQ(store->Commit("o", Document{{"v", 2}}, 1), 2u);
  EXPECT_THROW(store->Read("missing", 0), NotFoundError);
  EXPECT_THROW(store->Commit("missing", {}, 0), NotFoundError);
}

TEST_F(StoreFixture, QuiescedReadsAgreeEverywhere) {
  Build(3);
  store->Create("o", "C", Document{{"v", 0}}, {});
  for (int i = 1; i <= 7; ++i) Write("o", i);
  Quiesce();
  for (MemberId m : store->replica_set("o").members) {
    const auto copy = store->CopyAt("o", m);
    ASSERT_TRUE(copy.has_value());
    EXPECT_EQ(copy->revision, 7u);
    EXPECT_EQ(copy->attributes["v"], 7);
    const auto r = store->Read("o", store->NodeOf(m));
    EXPECT_EQ(r.record.revision, 7u);
    EXPECT_EQ(r.tier, sim::Tier::kLocal);
    EXPECT_EQ(r.served_by, m);
  }
}

TEST_F(StoreFixture, CoLocatedReadCrossesNoTier) {
  Build(1);
  store->Create("o", "C", Document{{"v", 0}}, {});
  const auto primary_node = store->NodeOf(store->replica_set("o").primary());
  trace.Clear();
  const auto r = store->Read("o", primary_node);
  EXPECT_EQ(r.tier, sim::Tier::kLocal);
  ASSERT_EQ(trace.records().size(), 1u);
  EXPECT_EQ(sim::DetailField(trace.records()[0].detail, "tier"), "Local");
  const auto other = (primary_node + 1) % 3;
  EXPECT_EQ(store->Read("o", other).tier, sim::Tier::kDatacenter);
}

TEST_F(StoreFixture, FollowerLagsDuringPropagationButNeverLeads) {
  Build(2);
  store->Create("o", "C", Document{{"v", 0}}, {});
  for (int i = 1; i <= 6; ++i) Write("o", i);
  Quiesce();
  Write("o", 7);
  const auto& set = store->replica_set("o");
  const MemberId follower = set.members[1];
  const auto during = store->Read("o", store->NodeOf(follower));
  EXPECT_EQ(during.served_by, follower);
  EXPECT_EQ(during.record.revision, 6u);
  EXPECT_EQ(store->LastCommitted("o"), 7u);
  Quiesce();
  EXPECT_EQ(store->Read("o", store->NodeOf(follower)).record.revision, 7u);
  // Trace audit: no follower ever applied a revision before the primary committed it.
  std::map<std::string, uint64_t> committed;
  for (const auto& r : trace.records()) {
    if (r.kind == "store.commit") committed["o"] = std::stoull(std::string(sim::DetailField(r.detail, "rev")));
    if (r.kind == "store.apply" || r.kind == "store.read") {
      EXPECT_LE(std::stoull(std::string(sim::DetailField(r.detail, "rev"))), committed["o"]);
    }
  }
}

TEST_F(StoreFixture, FollowersConvergeWithinMaxPropagationDelay) {
  Build(3);
  store->Create("o", "C", Document{{"v", 0}}, {});
  const SimTime t0 = loop.Now();
  Write("o", 1);
  const auto bytes = static_cast<int64_t>(Document{{"v", 1}}.dump().size());
  const auto bound = net.Delay(sim::Tier::kDatacenter, bytes);
  loop.RunUntil(t0 + bound - Duration(1));
  int behind = 0;
  for (MemberId m : store->replica_set("o").members) behind += store->CopyAt("o", m)->revision < 1;
  EXPECT_EQ(behind, 2);
  loop.RunUntil(t0 + bound);
  for (MemberId m : store->replica_set("o").members) EXPECT_EQ(store->CopyAt("o", m)->revision, 1u);
}

TEST_F(StoreFixture, PrimaryFailureElectsNextAfterDetectionWindow) {
  Build(3);
  store->Create("o", "C", Document{{"v", 0}}, {});
  Write("o", 1);
  Quiesce();
  const auto set = store->replica_set("o");
  store->OnMemberDown(set.members[0]);
  EXPECT_FALSE(store->HasPrimary("o"));
  EXPECT_THROW(store->Commit("o", Document{{"v", 2}}, 1), NoPrimaryError);
  EXPECT_EQ(store->ElectionEndsAt("o"), loop.Now() + FromSeconds(1));
  loop.RunUntil(loop.Now() + FromSeconds(1));
  EXPECT_TRUE(store->HasPrimary("o"));
  EXPECT_EQ(store->replica_set("o").primary(), set.members[1]);
  EXPECT_EQ(store->Commit("o", Document{{"v", 2}}, 1), 2u);
  store->OnMemberUp(set.members[0]);
  Quiesce();
  EXPECT_EQ(store->CopyAt("o", set.members[0])->revision, 2u);
  EXPECT_EQ(store->replica_set("o").primary(), set.members[1]);
}

TEST_F(StoreFixture, FollowerFailureKeepsPrimaryAndBackfills) {
  Build(3);
  store->Create("o", "C", Document{{"v", 0}}, {});
  const auto set = store->replica_set("o");
  store->OnMemberDown(set.members[2]);
  EXPECT_TRUE(store->HasPrimary("o"));
  EXPECT_FALSE(store->CopyAt("o", set.members[2]).has_value());
  Write("o", 1);
  Write("o", 2);
  store->OnMemberUp(set.members[2]);
  Quiesce();
  EXPECT_EQ(store->CopyAt("o", set.members[2])->revision, 2u);
  EXPECT_EQ(store->replica_set("o").primary(), set.members[0]);
}

TEST_F(StoreFixture, AllReplicasDownUntilFirstRecovery) {
  Build(2);
  store->Create("o", "C", Document{{"v", 0}}, {});
  Write("o", 1);
  Quiesce();
  const auto set = store->replica_set("o");
  store->OnMemberDown(set.members[0]);
  store->OnMemberDown(set.members[1]);
  EXPECT_THROW(store->Read("o", 0), AllReplicasDownError);
  EXPECT_THROW(store->Commit("o", Document{{"v", 2}}, 1), AllReplicasDownError);
  loop.RunUntil(loop.Now() + FromSeconds(5));
  EXPECT_THROW(store->Read("o", 0), AllReplicasDownError);
  store->OnMemberUp(set.members[1]);
  Quiesce();
  ASSERT_TRUE(store->HasPrimary("o"));
  const auto r = store->Read("o", 0, ReadMode::kPrimary);
  EXPECT_EQ(r.record.revision, 1u);
  EXPECT_EQ(r.record.attributes["v"], 1);
  EXPECT_EQ(store->Commit("o", Document{{"v", 2}}, 1), 2u);
}

TEST_F(StoreFixture, NonPersistentObjectIsLostWithItsLastReplica) {
  Build(1, 3, false);
  store->Create("o", "C", Document{{"v", 0}}, {});
  const auto m = store->replica_set("o").primary();
  store->OnMemberDown(m);
  store->OnMemberUp(m);
  Quiesce();
  EXPECT_THROW(store->Read("o", 0), AllReplicasDownError);
}

TEST_F(StoreFixture, PermanentRemovalRecruitsReplacement) {
  Build(2, 4);
  store->Create("o", "C", Document{{"v", 0}}, {});
  Write("o", 1);
  Quiesce();
  const auto before = store->replica_set("o");
  store->RemoveMember(before.members[0]);
  loop.RunUntil(loop.Now() + FromSeconds(2));
  const auto after = store->replica_set("o");
  ASSERT_EQ(after.members.size(), 2u);
  EXPECT_FALSE(after.Contains(before.members[0]));
  EXPECT_EQ(after.primary(), before.members[1]);
  for (MemberId m : after.members) EXPECT_EQ(store->CopyAt("o", m)->revision, 1u);
}

// Random failures and writes over many objects: checks single primary,
// gap-free revisions, convergence and durability.
TEST_F(StoreFixture, RandomFailurePatternsKeepStoreInvariants) {
  Build(3, 6);
  const int kObjects = 40;
  for (int i = 0; i < kObjects; ++i) store->Create(fmt::format("o{}", i), "C", Document{{"v", 0}}, {});
  sim::Rng rng(99);
  std::set<MemberId> down;
  for (int step = 0; step < 4000; ++step) {
    const auto op = rng.Below(10);
    if (op == 0 && down.size() < 2) {
      const MemberId m = static_cast<MemberId>(rng.Below(6));
      if (down.insert(m).second) store->OnMemberDown(m);
    } else if (op == 1 && !down.empty()) {
      auto it = down.begin();
      std::advance(it, static_cast<long>(rng.Below(down.size())));
      store->OnMemberUp(*it);
      down.erase(it);
    } else {
      const auto id = fmt::format("o{}", rng.Below(kObjects));
      if (store->HasPrimary(id)) Write(id, step);
    }
    loop.RunUntil(loop.Now() + FromMillis(static_cast<double>(rng.Below(300))));
  }
  for (MemberId m : down) store->OnMemberUp(m);
  loop.RunUntil(loop.Now() + FromSeconds(5));

  // Every live replica byte-equal to the primary; revisions preserved.
  for (int i = 0; i < kObjects; ++i) {
    const auto id = fmt::format("o{}", i);
    ASSERT_TRUE(store->HasPrimary(id));
    const auto primary = store->CopyAt(id, store->replica_set(id).primary());
    EXPECT_EQ(primary->revision, store->LastCommitted(id));
    for (MemberId m : store->replica_set(id).members) {
      const auto copy = store->CopyAt(id, m);
      ASSERT_TRUE(copy.has_value());
      EXPECT_EQ(copy->revision, primary->revision);
      EXPECT_EQ(copy->attributes.dump(), primary->attributes.dump());
    }
  }
  // Trace audit: commits per object are 1, 2, 3, ... and at most one primary
  // is ever announced between elections.
  std::map<std::string, uint64_t> last_rev;
  std::map<std::string, int> primaries;
  for (const auto& r : trace.records()) {
    const std::string object(sim::DetailField(r.detail, "object"));
    if (r.kind == "store.commit") {
      const auto rev = std::stoull(std::string(sim::DetailField(r.detail, "rev")));
      EXPECT_EQ(rev, last_rev[object] + 1) << object;
      last_rev[object] = rev;
    } else if (r.kind == "store.primary") {
      EXPECT_EQ(primaries[object], 0) << object << " got a second primary";
      primaries[object] = 1;
    } else if (r.kind == "store.election") {
      primaries[object] = 0;
    }
  }
  EXPECT_GT(store->commits(), 1000u);
}

}  // namespace
}  // namespace oaas::store
