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
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "oaas/common/time.h"
#include "oaas/enforcement/controller.h"
#include "oaas/enforcement/planning.h"
#include "oaas/package/resolve.h"
#include "oaas/runtime/template.h"
#include "oaas/sim/cluster.h"
#include "oaas/sim/event_loop.h"
#include "oaas/sim/network.h"
#include "oaas/sim/random.h"
#include "oaas/sim/trace.h"
#include "oaas/store/object_store.h"

namespace oaas::runtime {

enum class InvocationStatus { kCompleted, kFailed, kRejected };
std::string_view StatusName(InvocationStatus status);

struct Breakdown {
  Duration queue{0};
  Duration cold_start{0};
  Duration data_access{0};
  Duration execution{0};
  Duration commit{0};

  Duration Total() const { return queue + cold_start + data_access + execution + commit; }
  Breakdown& operator+=(const Breakdown& o);
};

struct InvocationRequest {
  std::string object_id;
  std::string function;
  /// An optional "update" object sets top-level attributes; otherwise the
  /// simulated method rewrites one random field of a structured attribute.
  store::Document args = store::Document::object();
  /// Tier the caller reaches the invoker over; recorded, not charged.
  sim::Tier origin = sim::Tier::kLocal;
};

struct InvocationOutcome {
  InvocationStatus status = InvocationStatus::kCompleted;
  std::string object_id;
  std::string function;
  SimTime start_time{0};
  SimTime end_time{0};
  store::Document output;
  uint64_t revision = 0;
  Breakdown breakdown;
  /// Error class name for Failed and Rejected outcomes.
  std::string error;
  sim::NodeId exec_node = -1;
  bool retried = false;

  Duration Latency() const { return end_time - start_time; }
};

using OutcomeFn = std::function<void(const InvocationOutcome&)>;
using ChainFn = std::function<void(std::vector<InvocationOutcome>)>;

/// The simulated substrate a runtime is deployed on.
struct Platform {
  sim::EventLoop* loop = nullptr;
  sim::Cluster* cluster = nullptr;
  const sim::NetworkModel* network = nullptr;
  const sim::RandomSource* random = nullptr;
  sim::Trace* trace = nullptr;
};

/// Remote document database used as the state backend of the Knative-style
/// baselines: a FIFO station with `servers` parallel workers.
struct ExternalDatabaseConfig {
  int servers = 8;
  Duration op_time = FromMicros(250);
  bool exponential = true;
  /// Tier between any compute node and the database.
  sim::Tier tier = sim::Tier::kDatacenter;
};

class ExternalDatabase {
 public:
  ExternalDatabase(ExternalDatabaseConfig config, sim::Rng rng);

  /// Time from issuing an operation at `now` until it completes.
  Duration Access(SimTime now);
  const ExternalDatabaseConfig& config() const { return config_; }
  uint64_t operations() const { return operations_; }

 private:
  ExternalDatabaseConfig config_;
  sim::Rng rng_;
  std::priority_queue<SimTime, std::vector<SimTime>, std::greater<>> free_at_;
  uint64_t operations_ = 0;
};

struct RuntimeConfig {
  enforcement::PolicyKind policy = enforcement::PolicyKind::kOprc;
  /// Fraction of time a single container is operational.
  double resource_stability = 0.9436;
  /// Nodes hosting invoker shards (and Local-locality containers).
  std::vector<sim::NodeId> storage_nodes;
  /// Nodes for containers without a locality requirement; empty means the
  /// storage nodes.
  std::vector<sim::NodeId> compute_nodes;
  int shards_per_node = 1;
  double shard_cpu = 0.5;
  int virtual_nodes = store::kDefaultVirtualNodes;
  uint64_t ring_seed = 0;
  Duration failure_detection = FromSeconds(1.0);
  Duration queue_timeout = FromSeconds(30.0);
  Duration commit_apply = FromMicros(5);

  enforcement::ControllerConfig controller;
  Duration scale_interval = FromSeconds(2.0);
  Duration stable_window = FromSeconds(60.0);
  /// Target in-flight share of a container's slots for the Oprc autoscaler
  /// running above the guaranteed floor.
  double oprc_target_utilization = 0.7;
  int knative_container_concurrency = 1000;
  double knative_target = 100.0;
  double capped_target = 0.7;
  int manual_pods = 1;
  int manual_concurrency = 1;
  /// Backend for the Knative-family and manual policies; Oprc ignores it.
  std::optional<ExternalDatabaseConfig> database;
};

struct PoolStatus {
  std::string function;
  package::Locality locality = package::Locality::kNone;
  int containers = 0;
  int warm = 0;
  double cores = 0.0;
  int floor = 0;
  int concurrency = 1;
};

struct InvocationCounters {
  uint64_t invoked = 0;
  uint64_t completed = 0;
  uint64_t failed = 0;
  uint64_t rejected = 0;
  uint64_t retries = 0;
};

/// Store, invoker shards and per-object serialization of one class; survives
/// redeployment of the class.
struct StateLayer {
  std::unique_ptr<store::ObjectStore> store;
  std::vector<sim::ContainerId> shards;
  std::vector<sim::NodeId> shard_nodes;
  std::vector<bool> shard_down;
  /// Objects with an invocation in progress, with the callbacks waiting for
  /// them. A waiter returns false when its call is gone, passing the turn.
  std::unordered_map<std::string, std::deque<std::function<bool()>>> locks;
  uint64_t next_object = 0;
};

/**
 * One deployed class: invoker shards on a hash ring, a container pool per
 * function, the object store, and the enforcement state bound to the policy.
 *
 * An invocation is serialized per object, queued FIFO per function (per
 * node under Local locality), and executed as a pure function: the invoker
 * reads the primary copy, ships it to the container, receives the modified
 * attributes and commits them at the primary.
 */
class ClassRuntime {
 public:
  /// Throws InsufficientCapacityError when the initial allocation does not fit.
  ClassRuntime(Platform platform, package::ResolvedClass resolved, RuntimeConfig config,
               ClassRuntimeTemplate runtime_template,
               std::shared_ptr<StateLayer> adopt = nullptr);
  ~ClassRuntime();
  ClassRuntime(const ClassRuntime&) = delete;
  ClassRuntime& operator=(const ClassRuntime&) = delete;

  const package::ResolvedClass& resolved() const { return resolved_; }
  const std::string& name() const { return resolved_.name; }
  const ClassRuntimeTemplate& runtime_template() const { return template_; }
  const RuntimeConfig& config() const { return config_; }
  const Platform& platform() const { return p_; }
  store::ObjectStore& store() { return *state_->store; }
  const store::ObjectStore& store() const { return *state_->store; }
  std::shared_ptr<StateLayer> state() const { return state_; }
  int replicas() const { return static_cast<int>(state_->store->config().replicas); }
  const std::vector<sim::ContainerId>& shard_containers() const { return state_->shards; }

  /// Validates against the class keySpecs (SchemaError) and places the
  /// object. An empty id draws a fresh one.
  std::string CreateObject(std::string object_id, store::Document attributes,
                           std::map<std::string, store::BlobRef> blobs = {});

  /// Throws UnknownFunctionError, NotFoundError and SchemaError up front;
  /// everything later is reported through the outcome.
  void Invoke(InvocationRequest request, OutcomeFn done);
  /// Sequential invocations on one object; stops after the first outcome
  /// that is not Completed. Throws UnknownFunctionError before starting.
  void InvokeChain(const std::string& object_id, const std::vector<std::string>& functions,
                   ChainFn done);

  /// Retires every pool container and stops periodic work. In-flight
  /// invocations finish normally.
  void Drain();
  bool draining() const { return draining_; }

  std::vector<PoolStatus> Pools() const;
  int WarmContainers() const;
  int PoolContainers() const;
  double PoolCores() const;
  double ShardCores() const;
  const InvocationCounters& counters() const { return counters_; }
  const std::vector<enforcement::ReconfigurationAction>& reconfigurations() const {
    return reconfigurations_;
  }
  uint64_t infeasible_plans() const { return infeasible_plans_; }
  const enforcement::ControllerState* controller(std::string_view function) const;
  const ExternalDatabase* database() const { return database_.get(); }

 private:
  struct Lane {
    sim::NodeId key = sim::kAnyNode;
    std::vector<sim::ContainerId> containers;  // live, oldest first
    std::deque<uint64_t> queue;
    int floor = 0;
    int load = 0;  // queued plus executing
    double load_integral = 0.0;
    SimTime load_mark{0};
    std::deque<std::pair<SimTime, int>> desired;
  };

  struct Pool {
    const package::ResolvedFunction* function = nullptr;
    package::WorkloadProfile profile;
    package::Locality locality = package::Locality::kNone;
    int concurrency = 1;
    double cpu = 1.0;
    /// Per-container in-flight target for reactive scaling; zero disables it.
    double scale_target = 0.0;
    bool scale_from_zero = true;
    int floor = 0;
    std::map<sim::NodeId, Lane> lanes;
    std::optional<enforcement::ControllerState> controller;
    enforcement::MetricWindow window;
    sim::Rng rng{0};
  };

  enum class CallState { kLockWait, kQueued, kRetryWait, kRunning, kCommitting };

  struct Call {
    uint64_t id = 0;
    InvocationRequest request;
    Pool* pool = nullptr;
    CallState state = CallState::kLockWait;
    InvocationOutcome outcome;
    SimTime mark{0};
    SimTime queued_at{0};
    SimTime deadline{0};
    bool retried = false;
    bool holds_lock = false;
    bool in_lane = false;
    sim::NodeId lane = sim::kAnyNode;
    sim::ContainerId container = -1;
    SimTime dispatched_at{0};
    Duration fetch{0};
    Duration ret{0};
    Duration busy{0};
    uint64_t base_revision = 0;
    store::Document attributes;
    OutcomeFn done;
  };

  void BuildStateLayer();
  void BuildPools();
  void StartPeriodicWork();
  double ReplicaTarget() const;

  Pool& PoolFor(const std::string& function);
  Lane& LaneFor(Pool& pool, sim::NodeId key);
  void ChangeLoad(Lane& lane, int delta);

  void InvokeSingle(InvocationRequest request, OutcomeFn done);
  void AcquireLock(uint64_t call_id);
  void ReleaseLock(const std::string& object_id);
  void Enqueue(Call& call);
  void TryDispatch(Pool& pool, Lane& lane);
  bool StartExecution(Call& call, sim::ContainerId container);
  void OnExecuted(uint64_t call_id, bool ok);
  void OnCommit(uint64_t call_id);
  void RetryOrFail(Call& call, const std::string& error);
  void Finish(Call& call, InvocationStatus status, const std::string& error);
  void LeaveLane(Call& call);
  store::Document ApplyUpdate(const Call& call, sim::Rng& rng) const;
  Duration SampleService(Pool& pool);

  std::optional<sim::ContainerId> PickContainer(Lane& lane) const;
  std::optional<sim::NodeId> PlacementNode(const Pool& pool, const Lane& lane) const;
  bool Spawn(Pool& pool, Lane& lane);
  void Shrink(Pool& pool, Lane& lane, int target);
  void OnContainerEvent(sim::ContainerId id, sim::ContainerEvent event);

  void ApplyFloors(Pool& pool);
  std::map<sim::NodeId, double> NodeShares() const;
  void ScaleTick();
  void ControlTick();
  void TimeoutSweep();
  int DesiredMax(const Lane& lane) const;
  double EligibleFreeCores(const Pool& pool) const;
  sim::Tier TierBetween(sim::NodeId a, sim::NodeId b) const;
  /// Error class name a primary read of `object_id` raises right now.
  std::string StoreFault(const std::string& object_id) const;

  Platform p_;
  package::ResolvedClass resolved_;
  RuntimeConfig config_;
  ClassRuntimeTemplate template_;
  std::shared_ptr<StateLayer> state_;
  std::unique_ptr<ExternalDatabase> database_;
  sim::Rng net_rng_{0};
  std::map<std::string, Pool> pools_;
  std::unordered_map<sim::ContainerId, std::pair<Pool*, sim::NodeId>> container_lane_;
  std::unordered_map<uint64_t, Call> calls_;
  uint64_t next_call_ = 1;
  InvocationCounters counters_;
  std::vector<enforcement::ReconfigurationAction> reconfigurations_;
  uint64_t infeasible_plans_ = 0;
  bool draining_ = false;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

/// Keeps one runtime per class name and fronts them with a hash-aware load
/// balancer that forwards (class, object) to the class's invoker ring.
class RuntimeManager {
 public:
  explicit RuntimeManager(Platform platform,
                          std::vector<ClassRuntimeTemplate> registry = DefaultTemplateRegistry());

  /// Selects a template and instantiates the class. Redeploying a name swaps
  /// in a new instance over the same objects; the old one drains.
  ClassRuntime& Deploy(const package::ResolvedClass& resolved, RuntimeConfig config);
  ClassRuntime* Find(std::string_view class_name);
  /// Throws NotFoundError.
  ClassRuntime& Get(std::string_view class_name);
  /// Load-balancer entry point. Throws NotFoundError.
  ClassRuntime& Route(std::string_view class_name, std::string_view object_id);
  uint64_t routed() const { return routed_; }
  std::vector<ClassRuntime*> runtimes();

 private:
  Platform p_;
  std::vector<ClassRuntimeTemplate> registry_;
  std::map<std::string, std::unique_ptr<ClassRuntime>, std::less<>> active_;
  std::vector<std::unique_ptr<ClassRuntime>> retired_;
  uint64_t routed_ = 0;
};

/// Drives the event loop until the outcome arrives.
InvocationOutcome InvokeAndWait(ClassRuntime& runtime, InvocationRequest request);

}  // namespace oaas::runtime
