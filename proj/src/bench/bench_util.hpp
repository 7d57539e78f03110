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

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sage/bench/workloads.hpp"

namespace sage::bench {

// Spreads `ranks` over the storage nodes of `base`; other nodes get none.
sim::ClusterConfig with_storage_ranks(sim::ClusterConfig base, std::uint32_t ranks);

// Emits a "bench.<name>" record tagged with the workload and `params`.
void record(telemetry::Addb& addb, VTime t, telemetry::Subsystem sub, const std::string& workload,
            const std::string& name, double value, telemetry::Tags params = {});

std::vector<RankId> ranks_on(const sim::Cluster& cluster, sim::Role role);

// Dissemination barrier over the fabric: ceil(log2 n) rounds of empty
// messages. `node[i]` hosts participant i; clocks move to each
// participant's exit time.
void barrier(sim::SimFabric& fabric, std::span<const NodeId> node, std::vector<VTime>& clock);

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace sage::bench
