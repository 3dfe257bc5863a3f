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
#include <deque>
#include <functional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "oaas/common/time.h"
#include "oaas/sim/event_loop.h"
#include "oaas/sim/network.h"
#include "oaas/sim/trace.h"

namespace oaas::sim {

using NodeId = int;
using ContainerId = int64_t;

inline constexpr NodeId kAnyNode = -1;

/// Which method a container serves.
struct FunctionRef {
  std::string class_name;
  std::string function;

  std::string ToString() const { return class_name + "." + function; }
  friend bool operator==(const FunctionRef&, const FunctionRef&) = default;
};

enum class ContainerState { kCold, kWarming, kWarm, kBusy };

std::string_view ContainerStateName(ContainerState state);

enum class ContainerEvent { kReady, kKilled, kRemoved };

struct Node {
  NodeId id = 0;
  std::string name;
  double cpu_capacity = 0.0;
  /// Site label used by the network model.
  std::string site;
  double allocated = 0.0;
  std::set<ContainerId> containers;

  double Free() const { return cpu_capacity - allocated; }
};

/// Execution request handed to a container. The completion fires at
/// now + prelude + base_service * contention.
struct WorkDescriptor {
  Duration base_service{0};
  /// Time before execution starts (input shipping); the slot is held throughout.
  Duration prelude{0};
};

/// `ok` is false when the container was killed mid-flight.
using CompletionFn = std::function<void(bool ok)>;
using ContainerListener = std::function<void(ContainerId, ContainerEvent)>;

struct Container {
  ContainerId id = 0;
  NodeId node = 0;
  FunctionRef function;
  ContainerState state = ContainerState::kCold;
  double cpu = 1.0;
  int concurrency_limit = 1;
  int in_flight = 0;
  SimTime created_at{0};
  /// Last instant the container became Warm.
  SimTime ready_at{0};
  bool draining = false;
  bool removed = false;
  uint64_t epoch = 0;
  uint64_t next_ticket = 0;
  std::unordered_map<uint64_t, CompletionFn> work;
  ContainerListener listener;

  bool Ready() const { return state == ContainerState::kWarm || state == ContainerState::kBusy; }
  bool Accepting() const { return Ready() && !draining && in_flight < concurrency_limit; }
};

struct ClusterConfig {
  Duration cold_start_delay = FromSeconds(1.0);
  double threads_per_core = 1.0;
  /// Re-check capacity and container invariants on every transition.
  bool audit = false;
};

/// Nodes, containers and their lifecycle on top of the event loop.
class Cluster {
 public:
  Cluster(EventLoop& loop, ClusterConfig config, Trace* trace = nullptr);

  NodeId AddNode(std::string name, double cpu_capacity, std::string site);
  const Node& node(NodeId id) const { return nodes_.at(static_cast<size_t>(id)); }
  const std::vector<Node>& nodes() const { return nodes_; }

  /// Starts a container in Warming; it turns Warm after the cold-start delay.
  /// Throws InsufficientCapacityError.
  ContainerId StartContainer(const FunctionRef& fn, NodeId node, double cpu,
                             int concurrency_limit, ContainerListener listener = {});

  /// Throws ContainerColdError (not Warm/Busy or draining) and
  /// ConcurrencyExceededError (no free slot).
  void Execute(ContainerId id, const WorkDescriptor& work, CompletionFn done);

  /// Service time a new invocation would get right now on `id`.
  Duration ServiceTime(ContainerId id, Duration base) const;

  /// Drops in-flight work (reported as failed) and leaves the container Cold.
  /// Capacity stays reserved for the restart.
  void Kill(ContainerId id);
  /// Cold -> Warming -> Warm after `warmup` (immediately Warm when zero).
  void Recover(ContainerId id, Duration warmup);
  /// Removes the container once idle; new work is refused meanwhile.
  void Retire(ContainerId id);

  const Container& container(ContainerId id) const;
  bool Exists(ContainerId id) const;

  double allocated_cores() const { return allocated_; }
  /// Integral of allocated cores over simulated time, up to now.
  double CoreSeconds() const;
  /// Throws std::logic_error if any capacity or container invariant fails.
  void Audit() const;
  uint64_t audits() const { return audits_; }

  const ClusterConfig& config() const { return config_; }
  EventLoop& loop() { return loop_; }

 private:
  Container& Mutable(ContainerId id);
  void OnCompletion(ContainerId id, uint64_t epoch, uint64_t ticket);
  void Remove(Container& c);
  void Allocate(Node& node, double cpu);
  void AccrueCost();
  void MaybeAudit();

  EventLoop& loop_;
  ClusterConfig config_;
  Trace* trace_;
  std::vector<Node> nodes_;
  std::deque<Container> containers_;  // stable addresses, indexed by id
  double allocated_ = 0.0;
  double core_ns_ = 0.0;
  SimTime cost_mark_{0};
  mutable uint64_t audits_ = 0;
};

}  // namespace oaas::sim
