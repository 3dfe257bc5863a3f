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

#include "oaas/harness/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "oaas/common/errors.h"

namespace oaas::harness {

const std::vector<std::string>& CsvColumns() {
  static const std::vector<std::string> cols = {
      "t_s",    "offered_rps",     "achieved_rps", "error_ratio",    "p50_ms",
      "p95_ms", "p99_ms",          "warm_containers", "replicas",    "cores_allocated"};
  return cols;
}

double NearestRank(std::vector<double> sample, double q) {
  if (sample.empty()) return 0.0;
  const auto n = sample.size();
  auto rank = static_cast<size_t>(std::ceil(q / 100.0 * static_cast<double>(n)));
  rank = std::clamp<size_t>(rank, 1, n);
  std::nth_element(sample.begin(), sample.begin() + static_cast<long>(rank - 1), sample.end());
  return sample[rank - 1];
}

MetricsCollector::MetricsCollector(SimTime start, Duration length)
    : start_(start), length_(length) {
  const auto seconds = static_cast<size_t>(std::ceil(ToSeconds(length) - 1e-9));
  buckets_.resize(seconds);
}

size_t MetricsCollector::Index(SimTime t) const {
  const auto i = static_cast<size_t>((t - start_).count() / 1000000000LL);
  return std::min(i, buckets_.empty() ? 0 : buckets_.size() - 1);
}

void MetricsCollector::OnArrival(SimTime arrival) {
  if (!InWindow(arrival) || buckets_.empty()) return;
  ++offered_;
  ++buckets_[Index(arrival)].offered;
}

void MetricsCollector::OnOutcome(const RequestRecord& r) {
  if (!InWindow(r.arrival) || buckets_.empty()) return;
  ++finished_;
  auto& b = buckets_[Index(r.arrival)];
  switch (r.status) {
    case runtime::InvocationStatus::kCompleted:
      ++b.completed;
      b.latencies_ms.push_back(ToMillis(r.end - r.arrival));
      sum_ += r.breakdown;
      break;
    case runtime::InvocationStatus::kFailed:
      ++b.failed;
      break;
    case runtime::InvocationStatus::kRejected:
      ++b.rejected;
      break;
  }
}

void MetricsCollector::SampleGauges(SimTime t, int warm, int replicas, double cores) {
  if (buckets_.empty() || t <= start_) return;
  auto& b = buckets_[Index(t - Duration(1))];
  b.warm = warm;
  b.replicas = replicas;
  b.cores = cores;
}

MetricsReport MetricsCollector::Build(Aggregates a, double core_seconds) const {
  MetricsReport report;
  std::vector<double> all;
  double warm_sum = 0.0;
  a.offered = a.completed = a.failed = a.rejected = 0;
  for (size_t i = 0; i < buckets_.size(); ++i) {
    const auto& b = buckets_[i];
    SecondRow row;
    row.t_s = static_cast<double>(i);
    row.offered_rps = static_cast<double>(b.offered);
    row.achieved_rps = static_cast<double>(b.completed);
    const auto finished = b.completed + b.failed + b.rejected;
    row.error_ratio =
        finished > 0 ? static_cast<double>(b.failed + b.rejected) / static_cast<double>(finished)
                     : 0.0;
    row.p50_ms = NearestRank(b.latencies_ms, 50);
    row.p95_ms = NearestRank(b.latencies_ms, 95);
    row.p99_ms = NearestRank(b.latencies_ms, 99);
    row.warm_containers = b.warm;
    row.replicas = b.replicas;
    row.cores_allocated = b.cores;
    report.series.push_back(row);
    all.insert(all.end(), b.latencies_ms.begin(), b.latencies_ms.end());
    a.offered += b.offered;
    a.completed += b.completed;
    a.failed += b.failed;
    a.rejected += b.rejected;
    warm_sum += b.warm;
    a.max_replicas = std::max(a.max_replicas, b.replicas);
  }
  a.duration_s = ToSeconds(length_);
  a.unfinished = a.offered - (a.completed + a.failed + a.rejected);
  if (a.duration_s > 0) {
    a.offered_rps = static_cast<double>(a.offered) / a.duration_s;
    a.achieved_rps = static_cast<double>(a.completed) / a.duration_s;
  }
  const auto finished = a.completed + a.failed + a.rejected;
  a.error_ratio = finished > 0 ? static_cast<double>(a.failed + a.rejected) /
                                     static_cast<double>(finished)
                               : 0.0;
  a.p50_ms = NearestRank(all, 50);
  a.p95_ms = NearestRank(all, 95);
  a.p99_ms = NearestRank(all, 99);
  if (a.completed > 0) {
    const double n = static_cast<double>(a.completed);
    double total = 0.0;
    for (double v : all) total += v;
    a.mean_ms = total / n;
    a.queue_ms = ToMillis(sum_.queue) / n;
    a.cold_start_ms = ToMillis(sum_.cold_start) / n;
    a.data_access_ms = ToMillis(sum_.data_access) / n;
    a.execution_ms = ToMillis(sum_.execution) / n;
    a.commit_ms = ToMillis(sum_.commit) / n;
    a.overhead_share = a.mean_ms > 0 ? 1.0 - a.execution_ms / a.mean_ms : 0.0;
  } else {
    a.mean_ms = a.queue_ms = a.cold_start_ms = a.data_access_ms = a.execution_ms = a.commit_ms =
        a.overhead_share = 0.0;
  }
  a.core_seconds = core_seconds;
  a.mean_warm_containers =
      buckets_.empty() ? 0.0 : warm_sum / static_cast<double>(buckets_.size());
  report.aggregates = a;
  return report;
}

nlohmann::ordered_json AggregatesToJson(const Aggregates& a) {
  nlohmann::ordered_json j;
  j["schema_version"] = a.schema_version;
  j["scenario"] = a.scenario;
  j["policy"] = a.policy;
  j["seed"] = a.seed;
  j["duration_s"] = a.duration_s;
  j["offered"] = a.offered;
  j["completed"] = a.completed;
  j["failed"] = a.failed;
  j["rejected"] = a.rejected;
  j["unfinished"] = a.unfinished;
  j["offered_rps"] = a.offered_rps;
  j["achieved_rps"] = a.achieved_rps;
  j["error_ratio"] = a.error_ratio;
  j["mean_ms"] = a.mean_ms;
  j["p50_ms"] = a.p50_ms;
  j["p95_ms"] = a.p95_ms;
  j["p99_ms"] = a.p99_ms;
  j["breakdown_ms"] = {{"queue", a.queue_ms},
                       {"cold_start", a.cold_start_ms},
                       {"data_access", a.data_access_ms},
                       {"execution", a.execution_ms},
                       {"commit", a.commit_ms}};
  j["overhead_share"] = a.overhead_share;
  j["core_seconds"] = a.core_seconds;
  j["mean_warm_containers"] = a.mean_warm_containers;
  j["max_replicas"] = a.max_replicas;
  j["reconfigurations"] = a.reconfigurations;
  j["retries"] = a.retries;
  return j;
}

Aggregates AggregatesFromJson(const nlohmann::json& j) {
  try {
    Aggregates a;
    a.schema_version = j.at("schema_version").get<int>();
    if (a.schema_version != kMetricsSchemaVersion) {
      throw ConfigError(fmt::format("unsupported metrics schema version {}", a.schema_version));
    }
    a.scenario = j.at("scenario").get<std::string>();
    a.policy = j.at("policy").get<std::string>();
    a.seed = j.at("seed").get<uint64_t>();
    a.duration_s = j.at("duration_s").get<double>();
    a.offered = j.at("offered").get<uint64_t>();
    a.completed = j.at("completed").get<uint64_t>();
    a.failed = j.at("failed").get<uint64_t>();
    a.rejected = j.at("rejected").get<uint64_t>();
    a.unfinished = j.at("unfinished").get<uint64_t>();
    a.offered_rps = j.at("offered_rps").get<double>();
    a.achieved_rps = j.at("achieved_rps").get<double>();
    a.error_ratio = j.at("error_ratio").get<double>();
    a.mean_ms = j.at("mean_ms").get<double>();
    a.p50_ms = j.at("p50_ms").get<double>();
    a.p95_ms = j.at("p95_ms").get<double>();
    a.p99_ms = j.at("p99_ms").get<double>();
    const auto& b = j.at("breakdown_ms");
    a.queue_ms = b.at("queue").get<double>();
    a.cold_start_ms = b.at("cold_start").get<double>();
    a.data_access_ms = b.at("data_access").get<double>();
    a.execution_ms = b.at("execution").get<double>();
    a.commit_ms = b.at("commit").get<double>();
    a.overhead_share = j.at("overhead_share").get<double>();
    a.core_seconds = j.at("core_seconds").get<double>();
    a.mean_warm_containers = j.at("mean_warm_containers").get<double>();
    a.max_replicas = j.at("max_replicas").get<int>();
    a.reconfigurations = j.at("reconfigurations").get<uint64_t>();
    a.retries = j.at("retries").get<uint64_t>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("malformed metrics aggregates: {}", e.what()));
  }
}

std::string FormatCsv(const MetricsReport& report) {
  std::string out;
  const auto& cols = CsvColumns();
  for (size_t i = 0; i < cols.size(); ++i) {
    out += cols[i];
    out += i + 1 < cols.size() ? "," : "\n";
  }
  for (const auto& r : report.series) {
    out += fmt::format("{:.0f},{:.0f},{:.0f},{:.6f},{:.3f},{:.3f},{:.3f},{},{},{:.3f}\n", r.t_s,
                       r.offered_rps, r.achieved_rps, r.error_ratio, r.p50_ms, r.p95_ms,
                       r.p99_ms, r.warm_containers, r.replicas, r.cores_allocated);
  }
  return out;
}

void WriteReport(const MetricsReport& report, const std::string& csv_path,
                 const std::string& json_path) {
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw IoError(fmt::format("cannot write {}", csv_path));
    csv << FormatCsv(report);
    if (!csv) throw IoError(fmt::format("write to {} failed", csv_path));
  }
  if (!json_path.empty()) {
    std::ofstream js(json_path, std::ios::binary);
    if (!js) throw IoError(fmt::format("cannot write {}", json_path));
    js << AggregatesToJson(report.aggregates).dump(2) << "\n";
    if (!js) throw IoError(fmt::format("write to {} failed", json_path));
  }
}

Aggregates ReadAggregates(const std::string& json_path) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", json_path));
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{} is not valid JSON: {}", json_path, e.what()));
  }
  return AggregatesFromJson(j);
}

}  // namespace oaas::harness
