// Copyright 2026 The Sagekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sage/common/types.hpp"
#include "sage/telemetry/addb.hpp"

namespace sage::bench {

struct MetricRow {
  std::string workload;
  std::string name;             // without the "bench." prefix
  telemetry::Tags params;       // record tags other than workload
  double value = 0;
  bool operator==(const MetricRow&) const = default;
};

// Aggregates recomputed from telemetry records; nothing else feeds it.
struct RunReport {
  std::uint64_t records = 0;
  std::map<std::string, std::uint64_t> records_by_subsystem;
  std::map<TierId, std::uint64_t> bytes_read_by_tier;
  std::map<TierId, std::uint64_t> bytes_written_by_tier;
  std::uint64_t net_messages = 0;
  std::uint64_t net_bytes_sent = 0;
  std::uint64_t net_bytes_received = 0;
  std::uint64_t net_bytes_dropped = 0;
  std::vector<MetricRow> metrics;
  // True when at least one verification record exists and all passed.
  bool verified = false;

  nlohmann::json to_json() const;
  std::string table() const;
  bool operator==(const RunReport&) const = default;
};

// Records are taken in the order given.
RunReport make_report(std::span<const telemetry::AddbRecord> records);
RunReport make_report(const telemetry::Addb& addb);
// Throws CorruptExport on an unreadable or malformed file.
RunReport load_report(const std::filesystem::path& tsv);

}  // namespace sage::bench
