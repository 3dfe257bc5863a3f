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
#include <string>
#include <vector>

#include <json.hpp>

#include "oaas/common/time.h"
#include "oaas/runtime/class_runtime.h"

namespace oaas::harness {

inline constexpr int kMetricsSchemaVersion = 1;

/// Column order of the time-series CSV.
const std::vector<std::string>& CsvColumns();

struct SecondRow {
  double t_s = 0.0;
  double offered_rps = 0.0;
  double achieved_rps = 0.0;
  double error_ratio = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
  int warm_containers = 0;
  int replicas = 0;
  double cores_allocated = 0.0;
};

struct Aggregates {
  int schema_version = kMetricsSchemaVersion;
  std::string scenario;
  std::string policy;
  uint64_t seed = 0;
  double duration_s = 0.0;
  uint64_t offered = 0;
  uint64_t completed = 0;
  uint64_t failed = 0;
  uint64_t rejected = 0;
  /// Requests of the measured round without an outcome at the cutoff.
  uint64_t unfinished = 0;
  double offered_rps = 0.0;
  double achieved_rps = 0.0;
  double error_ratio = 0.0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
  double queue_ms = 0.0;
  double cold_start_ms = 0.0;
  double data_access_ms = 0.0;
  double execution_ms = 0.0;
  double commit_ms = 0.0;
  /// Share of mean end-to-end latency not spent executing the method.
  double overhead_share = 0.0;
  double core_seconds = 0.0;
  double mean_warm_containers = 0.0;
  int max_replicas = 0;
  uint64_t reconfigurations = 0;
  uint64_t retries = 0;

  friend bool operator==(const Aggregates&, const Aggregates&) = default;
};

nlohmann::ordered_json AggregatesToJson(const Aggregates& a);
/// Throws ConfigError on a missing field or a schema version mismatch.
Aggregates AggregatesFromJson(const nlohmann::json& j);

struct MetricsReport {
  std::vector<SecondRow> series;
  Aggregates aggregates;
};

/// The outcome of one request as the load generator sees it.
struct RequestRecord {
  SimTime arrival{0};
  SimTime end{0};
  runtime::InvocationStatus status = runtime::InvocationStatus::kCompleted;
  runtime::Breakdown breakdown;
};

/**
 * Buckets requests of a measured round by arrival second. Latency
 * percentiles use the nearest-rank method over completed requests.
 */
class MetricsCollector {
 public:
  MetricsCollector(SimTime start, Duration length);

  bool InWindow(SimTime arrival) const { return arrival >= start_ && arrival < start_ + length_; }
  void OnArrival(SimTime arrival);
  void OnOutcome(const RequestRecord& record);
  /// Gauges for the second ending at `t`.
  void SampleGauges(SimTime t, int warm_containers, int replicas, double cores_allocated);

  /// `core_seconds` is the cost integral over the measured window.
  MetricsReport Build(Aggregates header, double core_seconds) const;

  uint64_t offered() const { return offered_; }
  uint64_t finished() const { return finished_; }

 private:
  struct Bucket {
    uint64_t offered = 0;
    uint64_t completed = 0;
    uint64_t failed = 0;
    uint64_t rejected = 0;
    std::vector<double> latencies_ms;
    int warm = 0;
    int replicas = 0;
    double cores = 0.0;
  };
  size_t Index(SimTime t) const;

  SimTime start_;
  Duration length_;
  std::vector<Bucket> buckets_;
  uint64_t offered_ = 0;
  uint64_t finished_ = 0;
  runtime::Breakdown sum_;
};

/// Nearest-rank percentile (q in (0, 100]); 0 for an empty sample.
double NearestRank(std::vector<double> sample, double q);

std::string FormatCsv(const MetricsReport& report);
/// Throws IoError.
void WriteReport(const MetricsReport& report, const std::string& csv_path,
                 const std::string& json_path);
/// Reads a JSON aggregates file. Throws IoError or ConfigError.
Aggregates ReadAggregates(const std::string& json_path);

}  // namespace oaas::harness
