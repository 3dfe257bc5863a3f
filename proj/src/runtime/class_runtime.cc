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

#include "oaas/runtime/class_runtime.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "oaas/common/errors.h"

namespace oaas::runtime {
namespace {

constexpr double kCoreEpsilon = 1e-9;

int CeilShare(double x) { return static_cast<int>(std::ceil(x - 1e-9)); }

// Hands an object's lock to the first waiter whose call is still alive.
void HandOff(const std::shared_ptr<StateLayer>& state, const std::string& object_id) {
  auto it = state->locks.find(object_id);
  if (it == state->locks.end()) return;
  while (!it->second.empty()) {
    auto waiter = std::move(it->second.front());
    it->second.pop_front();
    if (waiter()) return;
    it = state->locks.find(object_id);
    if (it == state->locks.end()) return;
  }
  state->locks.erase(it);
}

}  // namespace

std::string_view StatusName(InvocationStatus status) {
  switch (status) {
    case InvocationStatus::kCompleted:
      return "Completed";
    case InvocationStatus::kFailed:
      return "Failed";
    case InvocationStatus::kRejected:
      return "Rejected";
  }
  return "Completed";
}

Breakdown& Breakdown::operator+=(const Breakdown& o) {
  queue += o.queue;
  cold_start += o.cold_start;
  data_access += o.data_access;
  execution += o.execution;
  commit += o.commit;
  return *this;
}

ExternalDatabase::ExternalDatabase(ExternalDatabaseConfig config, sim::Rng rng)
    : config_(config), rng_(std::move(rng)) {
  for (int i = 0; i < std::max(1, config_.servers); ++i) free_at_.push(SimTime(0));
}

Duration ExternalDatabase::Access(SimTime now) {
  const SimTime free = free_at_.top();
  free_at_.pop();
  const SimTime start = std::max(now, free);
  const Duration service =
      config_.exponential
          ? FromSeconds(rng_.Exponential(ToSeconds(config_.op_time)))
          : config_.op_time;
  free_at_.push(start + service);
  ++operations_;
  return start + service - now;
}

// ---------------------------------------------------------------------------
// Deployment

ClassRuntime::ClassRuntime(Platform platform, package::ResolvedClass resolved,
                           RuntimeConfig config, ClassRuntimeTemplate runtime_template,
                           std::shared_ptr<StateLayer> adopt)
    : p_(platform),
      resolved_(std::move(resolved)),
      config_(std::move(config)),
      template_(std::move(runtime_template)),
      state_(std::move(adopt)) {
  if (config_.storage_nodes.empty()) {
    throw ConfigError(fmt::format("class {} has no storage nodes", resolved_.name));
  }
  if (config_.compute_nodes.empty()) config_.compute_nodes = config_.storage_nodes;
  net_rng_ = p_.random->Stream("runtime.net:" + resolved_.name);
  if (config_.policy != enforcement::PolicyKind::kOprc && config_.database) {
    database_ = std::make_unique<ExternalDatabase>(
        *config_.database, p_.random->Stream("runtime.db:" + resolved_.name));
  }
  const bool own_state = state_ == nullptr;
  try {
    if (own_state) BuildStateLayer();
    BuildPools();
  } catch (...) {
    *alive_ = false;
    std::vector<sim::ContainerId> spawned;
    for (const auto& [id, where] : container_lane_) spawned.push_back(id);
    for (auto id : spawned) p_.cluster->Retire(id);
    if (own_state && state_) {
      for (auto id : state_->shards) p_.cluster->Retire(id);
    }
    throw;
  }
  StartPeriodicWork();
}

ClassRuntime::~ClassRuntime() { *alive_ = false; }

double ClassRuntime::ReplicaTarget() const {
  double target = resolved_.qos.availability.value_or(0.0);
  for (const auto& fn : resolved_.functions) {
    target = std::max(target, fn.effective_qos.availability.value_or(0.0));
  }
  return target / 100.0;
}

void ClassRuntime::BuildStateLayer() {
  state_ = std::make_shared<StateLayer>();
  const double target = ReplicaTarget();
  const int replicas =
      target > 0.0 ? enforcement::RequiredReplicas(target, config_.resource_stability) : 1;
  const int shards =
      std::max(static_cast<int>(config_.storage_nodes.size()) * std::max(1, config_.shards_per_node),
               replicas + 1);
  store::StoreConfig sc;
  sc.replicas = static_cast<size_t>(replicas);
  sc.virtual_nodes = config_.virtual_nodes;
  sc.ring_seed = config_.ring_seed;
  sc.failure_detection = config_.failure_detection;
  sc.persistent = resolved_.constraint.IsPersistent();
  state_->store = std::make_unique<store::ObjectStore>(*p_.loop, *p_.cluster, *p_.network, sc,
                                                       *p_.random, p_.trace, resolved_.name);
  std::weak_ptr<StateLayer> weak = state_;
  for (int i = 0; i < shards; ++i) {
    const sim::NodeId node = config_.storage_nodes[static_cast<size_t>(i) % config_.storage_nodes.size()];
    auto listener = [weak, i](sim::ContainerId, sim::ContainerEvent event) {
      auto s = weak.lock();
      if (!s) return;
      const auto idx = static_cast<size_t>(i);
      if (event == sim::ContainerEvent::kKilled && !s->shard_down[idx]) {
        s->shard_down[idx] = true;
        s->store->OnMemberDown(i);
      } else if (event == sim::ContainerEvent::kReady && s->shard_down[idx]) {
        s->shard_down[idx] = false;
        s->store->OnMemberUp(i);
      }
    };
    const auto id = p_.cluster->StartContainer({resolved_.name, "invoker"}, node,
                                               config_.shard_cpu, 1 << 20, listener);
    state_->shards.push_back(id);
    state_->shard_nodes.push_back(node);
    state_->shard_down.push_back(false);
    state_->store->AddMember(i, node);
  }
}

void ClassRuntime::BuildPools() {
  using enforcement::PolicyKind;
  for (const auto& fn : resolved_.functions) {
    Pool pool;
    pool.function = &fn;
    pool.profile = fn.definition.workload_profile.value_or(package::WorkloadProfile{});
    pool.cpu = pool.profile.cpu;
    pool.rng = p_.random->Stream("runtime.svc:" + resolved_.name + "." + fn.name());
    const double rate = static_cast<double>(fn.effective_qos.throughput.value_or(0));
    const double service_s = pool.profile.service_mean_ms / 1e3;
    const bool workflow = !pool.profile.chain.empty();
    switch (config_.policy) {
      case PolicyKind::kOprc: {
        pool.locality = fn.effective_qos.locality.value_or(package::Locality::kNone);
        pool.concurrency = pool.profile.concurrency;
        pool.scale_target = config_.oprc_target_utilization * pool.concurrency;
        if (rate > 0 && !workflow) {
          auto cc = config_.controller;
          cc.estimator.prior = pool.concurrency / service_s;
          pool.controller = enforcement::ControllerState::Create(
              resolved_.name, fn.name(), cc, rate, pool.cpu, pool.concurrency);
          pool.floor = pool.controller->plan.warm_containers;
        }
        break;
      }
      case PolicyKind::kKnativeLike:
        pool.concurrency = config_.knative_container_concurrency;
        pool.scale_target = config_.knative_target;
        break;
      case PolicyKind::kKnativeConcurrencyCapped:
        pool.concurrency = 1;
        pool.scale_target = config_.capped_target;
        break;
      case PolicyKind::kKnativeRts:
        pool.concurrency = pool.profile.concurrency;
        pool.scale_target = config_.capped_target * pool.concurrency;
        if (rate > 0 && !workflow) {
          pool.floor = enforcement::PlanThroughput(rate, pool.concurrency / service_s, 0.0,
                                                   pool.cpu, pool.concurrency)
                           .warm_containers;
        }
        break;
      case PolicyKind::kManualRefinement:
        pool.concurrency = std::max(1, config_.manual_concurrency);
        pool.scale_target = 0.0;
        pool.scale_from_zero = false;
        if (!workflow) pool.floor = std::max(0, config_.manual_pods);
        break;
    }
    auto [it, inserted] = pools_.emplace(fn.name(), std::move(pool));
    ApplyFloors(it->second);
    // A floor the cluster cannot host fails the deployment.
    for (auto& [key, lane] : it->second.lanes) {
      if (static_cast<int>(lane.containers.size()) < lane.floor) {
        throw InsufficientCapacityError(fmt::format(
            "{}.{} needs {} containers of {} cores{}, cluster has room for {}", resolved_.name,
            fn.name(), lane.floor, it->second.cpu,
            key == sim::kAnyNode ? "" : fmt::format(" on node {}", key), lane.containers.size()));
      }
    }
  }
}

void ClassRuntime::StartPeriodicWork() {
  std::weak_ptr<bool> alive = alive_;
  auto every = [this, alive](Duration period, auto self, void (ClassRuntime::*tick)()) -> void {
    p_.loop->ScheduleAfter(period, [this, alive, period, self, tick] {
      auto a = alive.lock();
      if (!a || !*a) return;
      (this->*tick)();
      if (!draining_ || (tick == &ClassRuntime::TimeoutSweep && !calls_.empty())) {
        self(period, self, tick);
      }
    });
  };
  auto schedule = [every](Duration period, void (ClassRuntime::*tick)()) {
    every(period, every, tick);
  };
  schedule(config_.scale_interval, &ClassRuntime::ScaleTick);
  bool any_controller = false;
  for (const auto& [name, pool] : pools_) any_controller |= pool.controller.has_value();
  if (any_controller) schedule(config_.controller.interval, &ClassRuntime::ControlTick);
  const Duration sweep = std::min(config_.queue_timeout / 10, Duration(FromMillis(100)));
  schedule(std::max(sweep, Duration(FromMillis(1))), &ClassRuntime::TimeoutSweep);
}

// ---------------------------------------------------------------------------
// Objects

std::string ClassRuntime::CreateObject(std::string object_id, store::Document attributes,
                                       std::map<std::string, store::BlobRef> blobs) {
  if (attributes.is_null()) attributes = store::Document::object();
  if (!attributes.is_object()) {
    throw SchemaError(fmt::format("attributes of a {} object must be a mapping", resolved_.name));
  }
  for (const auto& [key, value] : attributes.items()) {
    const auto* spec = resolved_.FindKey(key);
    if (spec == nullptr || spec->kind != package::KeyKind::kStructured) {
      throw SchemaError(
          fmt::format("'{}' is not a structured key of class {}", key, resolved_.name));
    }
  }
  for (const auto& [key, blob] : blobs) {
    const auto* spec = resolved_.FindKey(key);
    if (spec == nullptr || spec->kind != package::KeyKind::kUnstructured) {
      throw SchemaError(
          fmt::format("'{}' is not an unstructured key of class {}", key, resolved_.name));
    }
  }
  if (object_id.empty()) {
    do {
      object_id = fmt::format("{}-{}", resolved_.name, state_->next_object++);
    } while (state_->store->Contains(object_id));
  }
  state_->store->Create(object_id, resolved_.name, std::move(attributes), std::move(blobs));
  return object_id;
}

// ---------------------------------------------------------------------------
// Invocation

ClassRuntime::Pool& ClassRuntime::PoolFor(const std::string& function) {
  auto it = pools_.find(function);
  if (it == pools_.end()) {
    throw UnknownFunctionError(
        fmt::format("class {} has no function '{}'", resolved_.name, function));
  }
  return it->second;
}

ClassRuntime::Lane& ClassRuntime::LaneFor(Pool& pool, sim::NodeId key) {
  auto [it, inserted] = pool.lanes.try_emplace(key);
  if (inserted) {
    it->second.key = key;
    it->second.load_mark = p_.loop->Now();
  }
  return it->second;
}

void ClassRuntime::ChangeLoad(Lane& lane, int delta) {
  const SimTime now = p_.loop->Now();
  lane.load_integral += lane.load * ToSeconds(now - lane.load_mark);
  lane.load_mark = now;
  lane.load += delta;
}

void ClassRuntime::Invoke(InvocationRequest request, OutcomeFn done) {
  const auto* fn = resolved_.FindFunction(request.function);
  if (fn == nullptr) {
    throw UnknownFunctionError(
        fmt::format("class {} has no function '{}'", resolved_.name, request.function));
  }
  if (!state_->store->Contains(request.object_id)) {
    throw NotFoundError(fmt::format("object '{}' does not exist", request.object_id));
  }
  if (request.args.contains("update")) {
    const auto& update = request.args["update"];
    if (!update.is_object()) throw SchemaError("'update' must be a mapping");
    for (const auto& [key, value] : update.items()) {
      const auto* spec = resolved_.FindKey(key);
      if (spec == nullptr || spec->kind != package::KeyKind::kStructured) {
        throw SchemaError(
            fmt::format("'{}' is not a structured key of class {}", key, resolved_.name));
      }
    }
  }
  const auto& chain = pools_.at(request.function).profile.chain;
  if (chain.empty()) {
    InvokeSingle(std::move(request), std::move(done));
    return;
  }
  // Workflow: the declared methods in order, reported as one outcome.
  const SimTime start = p_.loop->Now();
  InvokeChain(request.object_id, chain,
              [request, start, done = std::move(done)](std::vector<InvocationOutcome> steps) {
                InvocationOutcome out;
                out.object_id = request.object_id;
                out.function = request.function;
                out.start_time = start;
                out.end_time = start;
                for (const auto& s : steps) {
                  out.breakdown += s.breakdown;
                  out.status = s.status;
                  out.error = s.error;
                  out.output = s.output;
                  out.revision = s.revision;
                  out.exec_node = s.exec_node;
                  out.retried |= s.retried;
                  out.end_time = s.end_time;
                }
                // Hand-offs between steps are queueing from the caller's view.
                out.breakdown.queue += out.Latency() - out.breakdown.Total();
                if (done) done(out);
              });
}

void ClassRuntime::InvokeSingle(InvocationRequest request, OutcomeFn done) {
  const SimTime now = p_.loop->Now();
  const uint64_t id = next_call_++;
  Call& c = calls_[id];
  c.id = id;
  c.pool = &PoolFor(request.function);
  c.outcome.object_id = request.object_id;
  c.outcome.function = request.function;
  c.outcome.start_time = now;
  c.request = std::move(request);
  c.mark = now;
  c.deadline = now + config_.queue_timeout;
  c.done = std::move(done);
  ++counters_.invoked;
  ++c.pool->window.arrivals;
  AcquireLock(id);
}

void ClassRuntime::AcquireLock(uint64_t call_id) {
  Call& c = calls_.at(call_id);
  auto [it, inserted] = state_->locks.try_emplace(c.request.object_id);
  if (inserted) {
    c.holds_lock = true;
    Enqueue(c);
    return;
  }
  std::weak_ptr<bool> alive = alive_;
  it->second.push_back([this, alive, call_id]() -> bool {
    auto a = alive.lock();
    if (!a || !*a) return false;
    auto found = calls_.find(call_id);
    if (found == calls_.end()) return false;
    Call& waiting = found->second;
    if (p_.loop->Now() >= waiting.deadline) {
      Finish(waiting, InvocationStatus::kRejected, "QueueTimeout");
      return false;
    }
    waiting.holds_lock = true;
    Enqueue(waiting);
    return true;
  });
}

void ClassRuntime::ReleaseLock(const std::string& object_id) {
  auto it = state_->locks.find(object_id);
  if (it == state_->locks.end()) return;
  if (it->second.empty()) {
    state_->locks.erase(it);
    return;
  }
  p_.loop->ScheduleAfter(Duration(0), [state = state_, object_id] { HandOff(state, object_id); });
}

std::string ClassRuntime::StoreFault(const std::string& object_id) const {
  try {
    state_->store->Read(object_id, sim::kAnyNode, store::ReadMode::kPrimary);
  } catch (const NoPrimaryError&) {
    return "NoPrimaryError";
  } catch (const AllReplicasDownError&) {
    return "AllReplicasDownError";
  }
  return "";
}

void ClassRuntime::Enqueue(Call& c) {
  Pool& pool = *c.pool;
  sim::NodeId key = sim::kAnyNode;
  if (pool.locality == package::Locality::kLocal) {
    const auto primary = state_->store->PrimaryNode(c.request.object_id);
    if (!primary) {
      const auto fault = StoreFault(c.request.object_id);
      if (fault == "NoPrimaryError") {
        RetryOrFail(c, fault);
      } else {
        Finish(c, InvocationStatus::kFailed, fault.empty() ? "NoPrimaryError" : fault);
      }
      return;
    }
    key = *primary;
  }
  const SimTime now = p_.loop->Now();
  c.outcome.breakdown.queue += now - c.mark;
  c.mark = now;
  c.state = CallState::kQueued;
  c.queued_at = now;
  c.lane = key;
  c.in_lane = true;
  Lane& lane = LaneFor(pool, key);
  lane.queue.push_back(c.id);
  ChangeLoad(lane, +1);
  TryDispatch(pool, lane);
}

void ClassRuntime::LeaveLane(Call& c) {
  if (!c.in_lane) return;
  c.in_lane = false;
  ChangeLoad(LaneFor(*c.pool, c.lane), -1);
}

std::optional<sim::ContainerId> ClassRuntime::PickContainer(Lane& lane) const {
  std::optional<sim::ContainerId> best;
  int best_load = std::numeric_limits<int>::max();
  for (auto id : lane.containers) {
    const auto& ct = p_.cluster->container(id);
    if (!ct.Accepting()) continue;
    if (ct.in_flight < best_load) {
      best = id;
      best_load = ct.in_flight;
      if (best_load == 0) break;
    }
  }
  return best;
}

void ClassRuntime::TryDispatch(Pool& pool, Lane& lane) {
  const SimTime now = p_.loop->Now();
  while (!lane.queue.empty()) {
    const uint64_t id = lane.queue.front();
    auto it = calls_.find(id);
    if (it == calls_.end() || it->second.state != CallState::kQueued ||
        it->second.lane != lane.key || it->second.pool != &pool) {
      lane.queue.pop_front();
      continue;
    }
    const auto container = PickContainer(lane);
    if (!container) break;
    lane.queue.pop_front();
    Call& c = it->second;
    if (now >= c.deadline) {
      Finish(c, InvocationStatus::kRejected, "QueueTimeout");
      continue;
    }
    StartExecution(c, *container);
  }
  if (draining_) {
    if (lane.queue.empty()) Shrink(pool, lane, 0);
    return;
  }
  if (!lane.queue.empty() && pool.scale_from_zero && lane.containers.empty()) Spawn(pool, lane);
}

bool ClassRuntime::StartExecution(Call& c, sim::ContainerId container) {
  Pool& pool = *c.pool;
  const auto& ct = p_.cluster->container(container);
  const sim::NodeId node = ct.node;
  const SimTime now = p_.loop->Now();
  auto& st = *state_->store;
  store::ReadResult read;
  try {
    read = st.Read(c.request.object_id, node, store::ReadMode::kPrimary);
  } catch (const NoPrimaryError&) {
    LeaveLane(c);
    RetryOrFail(c, "NoPrimaryError");
    return false;
  } catch (const AllReplicasDownError&) {
    LeaveLane(c);
    Finish(c, InvocationStatus::kFailed, "AllReplicasDownError");
    return false;
  }
  const auto primary = st.PrimaryNode(c.request.object_id);
  if (pool.locality == package::Locality::kLocal && primary && *primary != node) {
    // The primary moved while the call was queued; follow it.
    LeaveLane(c);
    Enqueue(c);
    return false;
  }
  const Duration wait = now - c.mark;
  Duration cold{0};
  if (ct.ready_at > c.queued_at) cold = std::min(wait, ct.ready_at - c.queued_at);
  c.outcome.breakdown.queue += wait - cold;
  c.outcome.breakdown.cold_start += cold;
  c.mark = now;

  Duration fetch;
  if (database_) {
    const int64_t bytes = st.ObjectBytes(c.request.object_id) + pool.profile.bytes_in;
    fetch = database_->Access(now) + p_.network->Delay(database_->config().tier, bytes, &net_rng_);
  } else {
    fetch = read.delay + p_.network->TransferTime(pool.profile.bytes_in);
  }
  const Duration base = SampleService(pool);
  c.state = CallState::kRunning;
  c.container = container;
  c.dispatched_at = now;
  c.fetch = fetch;
  c.base_revision = read.record.revision;
  c.attributes = std::move(read.record.attributes);
  c.outcome.exec_node = node;
  if (p_.trace && p_.trace->enabled()) {
    p_.trace->Record(now, "invoke.dispatch", c.request.object_id,
                     fmt::format("fn={} node={} primary={} container=c{} locality={}",
                                 c.request.function, node, primary.value_or(-1), container,
                                 package::LocalityName(pool.locality)));
  }
  std::weak_ptr<bool> alive = alive_;
  p_.cluster->Execute(container, {base, fetch}, [this, alive, id = c.id](bool ok) {
    auto a = alive.lock();
    if (a && *a) OnExecuted(id, ok);
  });
  return true;
}

Duration ClassRuntime::SampleService(Pool& pool) {
  const double mean_s = pool.profile.service_mean_ms / 1e3;
  if (pool.profile.distribution == package::ServiceDistribution::kConstant) {
    return FromSeconds(mean_s);
  }
  return FromSeconds(pool.rng.Exponential(mean_s));
}

sim::Tier ClassRuntime::TierBetween(sim::NodeId a, sim::NodeId b) const {
  if (a == b) return sim::Tier::kLocal;
  const auto& na = p_.cluster->node(a);
  const auto& nb = p_.cluster->node(b);
  return p_.network->Classify(a, na.site, b, nb.site);
}

store::Document ClassRuntime::ApplyUpdate(const Call& c, sim::Rng& rng) const {
  store::Document attrs = c.attributes;
  const auto& args = c.request.args;
  if (args.contains("update")) {
    for (const auto& [key, value] : args["update"].items()) attrs[key] = value;
    return attrs;
  }
  for (const auto& spec : resolved_.key_specs) {
    if (spec.kind != package::KeyKind::kStructured) continue;
    auto it = attrs.find(spec.name);
    if (it == attrs.end() || !it->is_object() || it->empty()) continue;
    auto field = it->begin();
    std::advance(field, static_cast<long>(rng.Below(it->size())));
    *field = static_cast<int64_t>(rng.Below(1000000));
    break;
  }
  return attrs;
}

void ClassRuntime::OnExecuted(uint64_t call_id, bool ok) {
  auto it = calls_.find(call_id);
  if (it == calls_.end()) return;
  Call& c = it->second;
  Pool& pool = *c.pool;
  const sim::NodeId lane_key = c.lane;
  const SimTime now = p_.loop->Now();
  LeaveLane(c);
  const Duration elapsed = now - c.mark;
  c.mark = now;
  if (!ok) {
    const Duration in_fetch = std::min(elapsed, c.fetch);
    c.outcome.breakdown.data_access += in_fetch;
    c.outcome.breakdown.execution += elapsed - in_fetch;
    Finish(c, InvocationStatus::kFailed, "ContainerKilled");
    TryDispatch(pool, LaneFor(pool, lane_key));
    return;
  }
  c.outcome.breakdown.data_access += c.fetch;
  c.outcome.breakdown.execution += elapsed - c.fetch;
  c.busy = elapsed;
  c.attributes = ApplyUpdate(c, pool.rng);
  const sim::NodeId exec_node = c.outcome.exec_node;
  auto& st = *state_->store;
  const int64_t bytes = st.ObjectBytes(c.request.object_id) + pool.profile.bytes_out;
  if (database_) {
    c.ret = database_->Access(now) + p_.network->Delay(database_->config().tier, bytes, &net_rng_);
  } else {
    const auto primary = st.PrimaryNode(c.request.object_id).value_or(exec_node);
    c.ret = p_.network->Delay(TierBetween(exec_node, primary), bytes, &net_rng_);
  }
  c.state = CallState::kCommitting;
  std::weak_ptr<bool> alive = alive_;
  p_.loop->ScheduleAfter(c.ret + config_.commit_apply, [this, alive, call_id] {
    auto a = alive.lock();
    if (a && *a) OnCommit(call_id);
  });
  TryDispatch(pool, LaneFor(pool, lane_key));
}

void ClassRuntime::OnCommit(uint64_t call_id) {
  auto it = calls_.find(call_id);
  if (it == calls_.end()) return;
  Call& c = it->second;
  const SimTime now = p_.loop->Now();
  const Duration total = now - c.mark;
  c.outcome.breakdown.data_access += c.ret;
  c.outcome.breakdown.commit += total - c.ret;
  c.mark = now;
  try {
    c.outcome.revision =
        state_->store->Commit(c.request.object_id, c.attributes, c.base_revision);
  } catch (const NoPrimaryError&) {
    RetryOrFail(c, "NoPrimaryError");
    return;
  } catch (const AllReplicasDownError&) {
    Finish(c, InvocationStatus::kFailed, "AllReplicasDownError");
    return;
  } catch (const StaleRevisionError&) {
    Finish(c, InvocationStatus::kFailed, "StaleRevisionError");
    return;
  }
  c.outcome.output = std::move(c.attributes);
  Finish(c, InvocationStatus::kCompleted, "");
}

void ClassRuntime::RetryOrFail(Call& c, const std::string& error) {
  if (c.retried) {
    Finish(c, InvocationStatus::kFailed, error);
    return;
  }
  c.retried = true;
  c.outcome.retried = true;
  ++counters_.retries;
  const SimTime now = p_.loop->Now();
  SimTime at = state_->store->ElectionEndsAt(c.request.object_id)
                   .value_or(now + config_.failure_detection);
  at = std::max(at, now);
  c.state = CallState::kRetryWait;
  std::weak_ptr<bool> alive = alive_;
  p_.loop->Schedule(at, [this, alive, id = c.id] {
    auto a = alive.lock();
    if (!a || !*a) return;
    auto found = calls_.find(id);
    if (found == calls_.end()) return;
    found->second.deadline = p_.loop->Now() + config_.queue_timeout;
    Enqueue(found->second);
  });
}

void ClassRuntime::Finish(Call& c, InvocationStatus status, const std::string& error) {
  const SimTime now = p_.loop->Now();
  LeaveLane(c);
  c.outcome.breakdown.queue += now - c.mark;
  c.outcome.status = status;
  c.outcome.error = error;
  c.outcome.end_time = now;
  auto& w = c.pool->window;
  switch (status) {
    case InvocationStatus::kCompleted:
      ++counters_.completed;
      ++w.completed;
      w.busy_seconds += ToSeconds(c.busy);
      break;
    case InvocationStatus::kFailed:
      ++counters_.failed;
      ++w.failed;
      break;
    case InvocationStatus::kRejected:
      ++counters_.rejected;
      ++w.rejected;
      break;
  }
  if (p_.trace && p_.trace->enabled()) {
    p_.trace->Record(now, "invoke.done", c.request.object_id,
                     fmt::format("fn={} status={} rev={}{}", c.request.function,
                                 StatusName(status), c.outcome.revision,
                                 error.empty() ? "" : " error=" + error));
  }
  OutcomeFn done = std::move(c.done);
  InvocationOutcome out = std::move(c.outcome);
  const bool held = c.holds_lock;
  std::string object_id = std::move(c.request.object_id);
  calls_.erase(c.id);
  if (held) ReleaseLock(object_id);
  if (done) done(out);
}

void ClassRuntime::InvokeChain(const std::string& object_id,
                               const std::vector<std::string>& functions, ChainFn done) {
  for (const auto& fn : functions) {
    if (resolved_.FindFunction(fn) == nullptr) {
      throw UnknownFunctionError(
          fmt::format("class {} has no function '{}'", resolved_.name, fn));
    }
  }
  if (functions.empty()) {
    if (done) done({});
    return;
  }
  struct Runner : std::enable_shared_from_this<Runner> {
    ClassRuntime* runtime;
    std::string object_id;
    std::vector<std::string> functions;
    ChainFn done;
    std::vector<InvocationOutcome> results;
    void Step(size_t i) {
      InvocationRequest req;
      req.object_id = object_id;
      req.function = functions[i];
      runtime->Invoke(std::move(req), [self = shared_from_this(), i](const InvocationOutcome& o) {
        self->results.push_back(o);
        if (o.status != InvocationStatus::kCompleted || i + 1 == self->functions.size()) {
          if (self->done) self->done(std::move(self->results));
          return;
        }
        self->Step(i + 1);
      });
    }
  };
  auto runner = std::make_shared<Runner>();
  runner->runtime = this;
  runner->object_id = object_id;
  runner->functions = functions;
  runner->done = std::move(done);
  runner->Step(0);
}

// ---------------------------------------------------------------------------
// Pools and scaling

std::optional<sim::NodeId> ClassRuntime::PlacementNode(const Pool& pool, const Lane& lane) const {
  if (lane.key != sim::kAnyNode) {
    if (p_.cluster->node(lane.key).Free() + kCoreEpsilon >= pool.cpu) return lane.key;
    return std::nullopt;
  }
  std::optional<sim::NodeId> best;
  double best_free = 0.0;
  for (auto n : config_.compute_nodes) {
    const double free = p_.cluster->node(n).Free();
    if (free + kCoreEpsilon < pool.cpu) continue;
    if (!best || free > best_free + kCoreEpsilon) {
      best = n;
      best_free = free;
    }
  }
  return best;
}

bool ClassRuntime::Spawn(Pool& pool, Lane& lane) {
  const auto node = PlacementNode(pool, lane);
  if (!node) return false;
  std::weak_ptr<bool> alive = alive_;
  const auto id = p_.cluster->StartContainer(
      {resolved_.name, pool.function->name()}, *node, pool.cpu, pool.concurrency,
      [this, alive](sim::ContainerId cid, sim::ContainerEvent event) {
        auto a = alive.lock();
        if (a && *a) OnContainerEvent(cid, event);
      });
  lane.containers.push_back(id);
  container_lane_[id] = {&pool, lane.key};
  return true;
}

void ClassRuntime::Shrink(Pool& pool, Lane& lane, int target) {
  (void)pool;
  while (static_cast<int>(lane.containers.size()) > std::max(0, target)) {
    const auto id = lane.containers.back();
    lane.containers.pop_back();
    p_.cluster->Retire(id);
  }
}

void ClassRuntime::OnContainerEvent(sim::ContainerId id, sim::ContainerEvent event) {
  auto it = container_lane_.find(id);
  if (it == container_lane_.end()) return;
  auto [pool, key] = it->second;
  if (event == sim::ContainerEvent::kRemoved) {
    auto& lane = LaneFor(*pool, key);
    auto pos = std::find(lane.containers.begin(), lane.containers.end(), id);
    if (pos != lane.containers.end()) lane.containers.erase(pos);
    container_lane_.erase(it);
    return;
  }
  if (event == sim::ContainerEvent::kReady) TryDispatch(*pool, LaneFor(*pool, key));
}

int ClassRuntime::DesiredMax(const Lane& lane) const {
  int m = 0;
  for (const auto& [t, d] : lane.desired) m = std::max(m, d);
  return m;
}

std::map<sim::NodeId, double> ClassRuntime::NodeShares() const {
  std::map<sim::NodeId, double> shares;
  const auto& st = *state_->store;
  double total = 0.0;
  if (st.object_count() > 0) {
    for (const auto& id : st.ObjectIds()) {
      if (auto node = st.PrimaryNode(id)) {
        shares[*node] += 1.0;
        total += 1.0;
      }
    }
  }
  if (total == 0.0) {
    for (const auto& [member, fraction] : st.ring().OwnershipFractions()) {
      shares[st.NodeOf(member)] += fraction;
      total += fraction;
    }
  }
  if (total > 0.0) {
    for (auto& [node, s] : shares) s /= total;
  }
  return shares;
}

void ClassRuntime::ApplyFloors(Pool& pool) {
  if (pool.locality == package::Locality::kLocal) {
    for (auto& [key, lane] : pool.lanes) lane.floor = 0;
    if (pool.floor > 0) {
      for (const auto& [node, share] : NodeShares()) {
        LaneFor(pool, node).floor = CeilShare(pool.floor * share);
      }
    }
  } else {
    LaneFor(pool, sim::kAnyNode).floor = pool.floor;
  }
  for (auto& [key, lane] : pool.lanes) {
    while (static_cast<int>(lane.containers.size()) < lane.floor) {
      if (!Spawn(pool, lane)) break;
    }
    const int keep = std::max(lane.floor, DesiredMax(lane));
    if (static_cast<int>(lane.containers.size()) > keep) Shrink(pool, lane, keep);
  }
}

void ClassRuntime::ScaleTick() {
  if (draining_) return;
  const SimTime now = p_.loop->Now();
  const double interval = ToSeconds(config_.scale_interval);
  for (auto& [name, pool] : pools_) {
    for (auto& [key, lane] : pool.lanes) {
      ChangeLoad(lane, 0);
      const double observed = lane.load_integral / interval;
      lane.load_integral = 0.0;
      int desired = pool.scale_target > 0.0
                        ? enforcement::AutoscaleKnativeLike(observed, pool.scale_target)
                        : 0;
      desired = std::max(desired, lane.floor);
      lane.desired.emplace_back(now, desired);
      while (!lane.desired.empty() && lane.desired.front().first <= now - config_.stable_window) {
        lane.desired.pop_front();
      }
      const int live = static_cast<int>(lane.containers.size());
      if (desired > live) {
        for (int i = live; i < desired; ++i) {
          if (!Spawn(pool, lane)) break;
        }
      } else {
        const int keep = std::max(lane.floor, DesiredMax(lane));
        if (live > keep) Shrink(pool, lane, keep);
      }
    }
  }
}

double ClassRuntime::EligibleFreeCores(const Pool& pool) const {
  const auto& nodes = pool.locality == package::Locality::kLocal ? config_.storage_nodes
                                                                  : config_.compute_nodes;
  double free = 0.0;
  for (auto n : nodes) free += std::max(0.0, p_.cluster->node(n).Free());
  return free;
}

void ClassRuntime::ControlTick() {
  if (draining_) return;
  const SimTime now = p_.loop->Now();
  for (auto& [name, pool] : pools_) {
    if (!pool.controller) continue;
    pool.window.length_seconds = ToSeconds(config_.controller.interval);
    double pool_cores = 0.0;
    for (const auto& [key, lane] : pool.lanes) pool_cores += lane.containers.size() * pool.cpu;
    try {
      auto action = enforcement::ControlStep(*pool.controller, pool.window,
                                             pool_cores + EligibleFreeCores(pool), p_.trace, now);
      if (action) {
        pool.floor = action->to;
        reconfigurations_.push_back(*action);
      }
    } catch (const InfeasiblePlanError&) {
      ++infeasible_plans_;
    }
    pool.window = {};
    ApplyFloors(pool);
  }
}

void ClassRuntime::TimeoutSweep() {
  const SimTime now = p_.loop->Now();
  for (auto& [name, pool] : pools_) {
    for (auto& [key, lane] : pool.lanes) {
      while (!lane.queue.empty()) {
        auto it = calls_.find(lane.queue.front());
        if (it == calls_.end() || it->second.state != CallState::kQueued ||
            it->second.lane != lane.key || it->second.pool != &pool) {
          lane.queue.pop_front();
          continue;
        }
        if (now < it->second.deadline) break;
        lane.queue.pop_front();
        Finish(it->second, InvocationStatus::kRejected, "QueueTimeout");
      }
    }
  }
}

void ClassRuntime::Drain() {
  draining_ = true;
  for (auto& [name, pool] : pools_) {
    for (auto& [key, lane] : pool.lanes) {
      if (lane.queue.empty()) Shrink(pool, lane, 0);
    }
  }
}

// ---------------------------------------------------------------------------
// Introspection

std::vector<PoolStatus> ClassRuntime::Pools() const {
  std::vector<PoolStatus> out;
  for (const auto& [name, pool] : pools_) {
    PoolStatus s;
    s.function = name;
    s.locality = pool.locality;
    s.floor = pool.floor;
    s.concurrency = pool.concurrency;
    for (const auto& [key, lane] : pool.lanes) {
      for (auto id : lane.containers) {
        ++s.containers;
        s.cores += pool.cpu;
        if (p_.cluster->container(id).Ready()) ++s.warm;
      }
    }
    out.push_back(s);
  }
  return out;
}

int ClassRuntime::WarmContainers() const {
  int n = 0;
  for (const auto& s : Pools()) n += s.warm;
  return n;
}

int ClassRuntime::PoolContainers() const {
  int n = 0;
  for (const auto& s : Pools()) n += s.containers;
  return n;
}

double ClassRuntime::PoolCores() const {
  double c = 0.0;
  for (const auto& s : Pools()) c += s.cores;
  return c;
}

double ClassRuntime::ShardCores() const {
  return static_cast<double>(state_->shards.size()) * config_.shard_cpu;
}

const enforcement::ControllerState* ClassRuntime::controller(std::string_view function) const {
  auto it = pools_.find(std::string(function));
  if (it == pools_.end() || !it->second.controller) return nullptr;
  return &*it->second.controller;
}

// ---------------------------------------------------------------------------
// Manager

RuntimeManager::RuntimeManager(Platform platform, std::vector<ClassRuntimeTemplate> registry)
    : p_(platform), registry_(std::move(registry)) {}

ClassRuntime& RuntimeManager::Deploy(const package::ResolvedClass& resolved,
                                     RuntimeConfig config) {
  const auto& tmpl = SelectTemplate(resolved, registry_);
  auto it = active_.find(resolved.name);
  std::shared_ptr<StateLayer> adopt;
  if (it != active_.end()) adopt = it->second->state();
  auto fresh = std::make_unique<ClassRuntime>(p_, resolved, std::move(config), tmpl, adopt);
  if (it != active_.end()) {
    it->second->Drain();
    retired_.push_back(std::move(it->second));
    it->second = std::move(fresh);
    return *it->second;
  }
  auto [pos, inserted] = active_.emplace(resolved.name, std::move(fresh));
  return *pos->second;
}

ClassRuntime* RuntimeManager::Find(std::string_view class_name) {
  auto it = active_.find(class_name);
  return it == active_.end() ? nullptr : it->second.get();
}

ClassRuntime& RuntimeManager::Get(std::string_view class_name) {
  auto* rt = Find(class_name);
  if (rt == nullptr) throw NotFoundError(fmt::format("class {} is not deployed", class_name));
  return *rt;
}

ClassRuntime& RuntimeManager::Route(std::string_view class_name, std::string_view object_id) {
  (void)object_id;  // the class's invoker ring owns placement
  ++routed_;
  return Get(class_name);
}

std::vector<ClassRuntime*> RuntimeManager::runtimes() {
  std::vector<ClassRuntime*> out;
  for (auto& [name, rt] : active_) out.push_back(rt.get());
  return out;
}

InvocationOutcome InvokeAndWait(ClassRuntime& runtime, InvocationRequest request) {
  std::optional<InvocationOutcome> out;
  runtime.Invoke(std::move(request), [&out](const InvocationOutcome& o) { out = o; });
  runtime.platform().loop->RunUntil([&out] { return out.has_value(); });
  if (!out) throw std::logic_error("event queue drained before the invocation finished");
  return *out;
}

}  // namespace oaas::runtime
