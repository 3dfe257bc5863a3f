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

#include "oaas/sim/cluster.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "oaas/common/errors.h"

namespace oaas::sim {

namespace {
constexpr double kCpuEpsilon = 1e-9;
}  // namespace

std::string_view ContainerStateName(ContainerState state) {
  switch (state) {
    case ContainerState::kCold:
      return "Cold";
    case ContainerState::kWarming:
      return "Warming";
    case ContainerState::kWarm:
      return "Warm";
    case ContainerState::kBusy:
      return "Busy";
  }
  return "Cold";
}

Cluster::Cluster(EventLoop& loop, ClusterConfig config, Trace* trace)
    : loop_(loop), config_(config), trace_(trace), cost_mark_(loop.Now()) {}

NodeId Cluster::AddNode(std::string name, double cpu_capacity, std::string site) {
  Node n;
  n.id = static_cast<NodeId>(nodes_.size());
  n.name = std::move(name);
  n.cpu_capacity = cpu_capacity;
  n.site = std::move(site);
  nodes_.push_back(std::move(n));
  return nodes_.back().id;
}

Container& Cluster::Mutable(ContainerId id) {
  if (id < 0 || static_cast<size_t>(id) >= containers_.size()) {
    throw std::out_of_range(fmt::format("no container {}", id));
  }
  return containers_[static_cast<size_t>(id)];
}

const Container& Cluster::container(ContainerId id) const {
  if (id < 0 || static_cast<size_t>(id) >= containers_.size()) {
    throw std::out_of_range(fmt::format("no container {}", id));
  }
  return containers_[static_cast<size_t>(id)];
}

bool Cluster::Exists(ContainerId id) const {
  return id >= 0 && static_cast<size_t>(id) < containers_.size() &&
         !containers_[static_cast<size_t>(id)].removed;
}

void Cluster::AccrueCost() {
  const auto now = loop_.Now();
  core_ns_ += allocated_ * static_cast<double>((now - cost_mark_).count());
  cost_mark_ = now;
}

double Cluster::CoreSeconds() const {
  const auto pending = allocated_ * static_cast<double>((loop_.Now() - cost_mark_).count());
  return (core_ns_ + pending) / 1e9;
}

void Cluster::Allocate(Node& node, double cpu) {
  AccrueCost();
  node.allocated += cpu;
  allocated_ += cpu;
  if (std::abs(node.allocated) < kCpuEpsilon) node.allocated = 0.0;
  if (std::abs(allocated_) < kCpuEpsilon) allocated_ = 0.0;
}

ContainerId Cluster::StartContainer(const FunctionRef& fn, NodeId node_id, double cpu,
                                    int concurrency_limit, ContainerListener listener) {
  auto& node = nodes_.at(static_cast<size_t>(node_id));
  if (node.Free() + kCpuEpsilon < cpu) {
    throw InsufficientCapacityError(fmt::format(
        "node {} has {:.3f} free cores, {} requested", node.name, node.Free(), cpu));
  }
  Container c;
  c.id = static_cast<ContainerId>(containers_.size());
  c.node = node_id;
  c.function = fn;
  c.state = ContainerState::kWarming;
  c.cpu = cpu;
  c.concurrency_limit = std::max(1, concurrency_limit);
  c.created_at = loop_.Now();
  c.listener = std::move(listener);
  containers_.push_back(std::move(c));
  const ContainerId id = containers_.back().id;
  node.containers.insert(id);
  Allocate(node, cpu);
  if (trace_ && trace_->enabled()) {
    trace_->Record(loop_.Now(), "container.start", fmt::format("c{}", id),
                   fmt::format("node={} fn={} cpu={} limit={}", node.name, fn.ToString(), cpu,
                               concurrency_limit));
  }
  const uint64_t epoch = containers_.back().epoch;
  loop_.ScheduleAfter(config_.cold_start_delay, [this, id, epoch] {
    auto& ct = Mutable(id);
    if (ct.removed || ct.epoch != epoch || ct.state != ContainerState::kWarming) return;
    ct.state = ContainerState::kWarm;
    ct.ready_at = loop_.Now();
    if (trace_ && trace_->enabled()) {
      trace_->Record(loop_.Now(), "container.ready", fmt::format("c{}", id), "");
    }
    MaybeAudit();
    if (ct.listener) ct.listener(id, ContainerEvent::kReady);
  });
  MaybeAudit();
  return id;
}

Duration Cluster::ServiceTime(ContainerId id, Duration base) const {
  const auto& c = container(id);
  const double threads = c.cpu * config_.threads_per_core;
  const double factor = std::max(1.0, static_cast<double>(c.in_flight + 1) / threads);
  return Duration(static_cast<int64_t>(std::floor(static_cast<double>(base.count()) * factor + 0.5)));
}

void Cluster::Execute(ContainerId id, const WorkDescriptor& work, CompletionFn done) {
  auto& c = Mutable(id);
  if (c.removed || !c.Ready() || c.draining) {
    throw ContainerColdError(
        fmt::format("container {} is {}", id, c.draining ? "draining" : ContainerStateName(c.state)));
  }
  if (c.in_flight >= c.concurrency_limit) {
    throw ConcurrencyExceededError(
        fmt::format("container {} already runs {} invocations", id, c.in_flight));
  }
  const Duration service = ServiceTime(id, work.base_service);
  ++c.in_flight;
  c.state = ContainerState::kBusy;
  const uint64_t ticket = c.next_ticket++;
  c.work.emplace(ticket, std::move(done));
  const uint64_t epoch = c.epoch;
  loop_.ScheduleAfter(work.prelude + service,
                      [this, id, epoch, ticket] { OnCompletion(id, epoch, ticket); });
  MaybeAudit();
}

void Cluster::OnCompletion(ContainerId id, uint64_t epoch, uint64_t ticket) {
  auto& c = Mutable(id);
  if (c.removed || c.epoch != epoch) return;
  auto it = c.work.find(ticket);
  if (it == c.work.end()) return;
  CompletionFn done = std::move(it->second);
  c.work.erase(it);
  --c.in_flight;
  if (c.in_flight == 0) c.state = ContainerState::kWarm;
  MaybeAudit();
  if (done) done(true);
  // The callback may have retired this container or queued more work.
  auto& after = Mutable(id);
  if (!after.removed && after.draining && after.in_flight == 0) Remove(after);
}

void Cluster::Kill(ContainerId id) {
  auto& c = Mutable(id);
  if (c.removed) return;
  c.state = ContainerState::kCold;
  ++c.epoch;
  c.in_flight = 0;
  auto dropped = std::move(c.work);
  c.work.clear();
  if (trace_ && trace_->enabled()) {
    trace_->Record(loop_.Now(), "container.kill", fmt::format("c{}", id),
                   fmt::format("dropped={}", dropped.size()));
  }
  MaybeAudit();
  // Deterministic order: by ticket.
  std::vector<std::pair<uint64_t, CompletionFn>> ordered(dropped.begin(), dropped.end());
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [ticket, done] : ordered) {
    if (done) done(false);
  }
  auto& after = Mutable(id);
  if (after.listener) after.listener(id, ContainerEvent::kKilled);
  auto& again = Mutable(id);
  if (!again.removed && again.draining) Remove(again);
}

void Cluster::Recover(ContainerId id, Duration warmup) {
  auto& c = Mutable(id);
  if (c.removed || c.state != ContainerState::kCold) return;
  c.state = ContainerState::kWarming;
  if (trace_ && trace_->enabled()) {
    trace_->Record(loop_.Now(), "container.recover", fmt::format("c{}", id), "");
  }
  auto finish = [this, id, epoch = c.epoch] {
    auto& ct = Mutable(id);
    if (ct.removed || ct.epoch != epoch || ct.state != ContainerState::kWarming) return;
    ct.state = ContainerState::kWarm;
    ct.ready_at = loop_.Now();
    MaybeAudit();
    if (ct.listener) ct.listener(id, ContainerEvent::kReady);
  };
  if (warmup.count() <= 0) {
    finish();
  } else {
    loop_.ScheduleAfter(warmup, std::move(finish));
  }
}

void Cluster::Retire(ContainerId id) {
  auto& c = Mutable(id);
  if (c.removed) return;
  c.draining = true;
  if (c.in_flight == 0) Remove(c);
}

void Cluster::Remove(Container& c) {
  c.removed = true;
  ++c.epoch;
  auto& node = nodes_.at(static_cast<size_t>(c.node));
  node.containers.erase(c.id);
  Allocate(node, -c.cpu);
  if (trace_ && trace_->enabled()) {
    trace_->Record(loop_.Now(), "container.remove", fmt::format("c{}", c.id), "");
  }
  MaybeAudit();
  if (c.listener) {
    auto listener = c.listener;
    listener(c.id, ContainerEvent::kRemoved);
  }
}

void Cluster::MaybeAudit() {
  if (config_.audit) Audit();
}

void Cluster::Audit() const {
  ++audits_;
  for (const auto& n : nodes_) {
    if (n.allocated > n.cpu_capacity + kCpuEpsilon) {
      throw std::logic_error(fmt::format("node {} over-allocated: {} > {}", n.name, n.allocated,
                                         n.cpu_capacity));
    }
  }
  for (const auto& c : containers_) {
    if (c.removed) continue;
    if (c.in_flight > c.concurrency_limit) {
      throw std::logic_error(fmt::format("container {} exceeds its concurrency limit", c.id));
    }
    if ((c.state == ContainerState::kBusy) != (c.in_flight >= 1)) {
      throw std::logic_error(fmt::format("container {} busy flag disagrees with in-flight", c.id));
    }
    if (c.state == ContainerState::kCold && c.in_flight != 0) {
      throw std::logic_error(fmt::format("cold container {} holds work", c.id));
    }
  }
}

}  // namespace oaas::sim
