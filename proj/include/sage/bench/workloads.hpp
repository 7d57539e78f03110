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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sage/common/types.hpp"
#include "sage/sim/cluster.hpp"
#include "sage/telemetry/addb.hpp"

namespace sage::bench {

// Records every workload leaves behind use metrics prefixed "bench.";
// reports are computed from those alone.
constexpr const char* kMetricPrefix = "bench.";

struct StreamParams {
  std::uint64_t n = 1'000'000;
  double q = 3.0;
  std::uint64_t chunk = 8192;  // elements per window access
};

struct DhtParams {
  std::uint32_t processes = 8;
  std::uint64_t local_volume = 10'000;  // slots per process
  std::uint32_t overflow = 4;           // heap slots per local slot
  std::uint64_t ops = 10'000;           // inserts, each followed by a lookup pass
};

struct CheckpointParams {
  std::uint64_t particles = 100'000;
  std::vector<std::uint32_t> processes{2, 4, 8};
  bool crash_before_sync = false;
};

struct OffloadParams {
  std::vector<std::uint32_t> sim_ranks{16, 64, 256, 1024};
  std::uint32_t consumers = 0;           // 0: one per `ratio` simulation ranks
  std::uint32_t ratio = 15;
  std::uint32_t steps = 20;
  std::uint32_t particles_per_rank = 1024;
  double threshold = 6.4;                // kinetic energy; particles above it are streamed
  VTime mover_cost = 1e-6;               // virtual seconds per particle per step
  std::uint32_t ranks_per_node = 16;
  std::uint32_t flush_blocks = 4;        // consumer write granularity
};

struct WorkloadConfig {
  std::string workload = "stream";  // stream | dht | checkpoint | offload
  std::uint64_t seed = 1;
  StreamParams stream;
  DhtParams dht;
  CheckpointParams checkpoint;
  OffloadParams offload;
  // Storage nodes, profiles and network; workloads add the ranks they need.
  sim::ClusterConfig cluster = default_cluster();

  // Throws Error(bad_config).
  void validate() const;
  static WorkloadConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Four storage nodes with one device per tier, no compute-only nodes.
  static sim::ClusterConfig default_cluster();
};

inline const std::vector<std::string>& workload_names() {
  static const std::vector<std::string> names{"stream", "dht", "checkpoint", "offload"};
  return names;
}

// Outcome of one workload run: its merged telemetry and whether every
// self-check passed.
struct RunResult {
  std::string workload;
  bool verified = false;
  telemetry::Addb addb;
};

// Each run creates clusters under `dir`.
RunResult run_stream(const WorkloadConfig& config, const std::filesystem::path& dir);
RunResult run_dht(const WorkloadConfig& config, const std::filesystem::path& dir);
RunResult run_checkpoint(const WorkloadConfig& config, const std::filesystem::path& dir);
RunResult run_offload(const WorkloadConfig& config, const std::filesystem::path& dir);
RunResult run_workload(const WorkloadConfig& config, const std::filesystem::path& dir);

struct DhtCapacity {
  std::uint64_t per_process = 0;
  std::uint64_t global = 0;
  std::uint64_t global_without_overflow = 0;
};
// Throws CapacityExceeded when the totals do not fit in 64 bits.
DhtCapacity dht_capacity(std::uint64_t processes, std::uint64_t local_volume, std::uint64_t overflow);

// Copies every record of `from` into `into`, tagged run=<run>.
void merge_telemetry(telemetry::Addb& into, const telemetry::Addb& from, const std::string& run);

}  // namespace sage::bench
