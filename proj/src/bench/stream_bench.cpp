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

#include <random>

#include "bench_util.hpp"
#include "sage/window/stream_kernels.hpp"

namespace sage::bench {

RunResult run_stream(const WorkloadConfig& config, const std::filesystem::path& dir) {
  config.validate();
  const auto& p = config.stream;
  RunResult result;
  result.workload = "stream";
  result.verified = true;

  auto cluster = sim::Cluster::spawn(with_storage_ranks(config.cluster, 1), config.seed, dir / "stream");
  window::Windows windows(*cluster);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);

  const RankId rank = 0;
  IoCtx ctx{cluster->node_of(rank), 0};
  for (auto backing : {window::Backing::memory, window::Backing::storage}) {
    const std::string b(window::to_string(backing));
    window::WindowOptions opt;
    opt.backing = backing;
    std::array<window::WindowId, 3> w{};
    for (auto& id : w) {
      id = windows.alloc(ctx, rank, 8 * p.n, opt);
      std::vector<double> init(p.n);
      for (auto& v : init) v = dist(rng);
      window::write_doubles(ctx, windows, id, init);
      windows.sync(ctx, id);
    }
    const auto r = window::run_stream(ctx, windows, w[0], w[1], w[2], p.q, p.n, p.chunk);
    for (const auto& k : r.kernels) {
      const telemetry::Tags tags{{"backing", b}, {"kernel", std::string(window::to_string(k.kernel))}};
      record(result.addb, ctx.now, telemetry::Subsystem::window, "stream", "bandwidth", k.bandwidth, tags);
      record(result.addb, ctx.now, telemetry::Subsystem::window, "stream", "time", k.time, tags);
      record(result.addb, ctx.now, telemetry::Subsystem::window, "stream", "bytes", static_cast<double>(k.bytes), tags);
    }
    record(result.addb, ctx.now, telemetry::Subsystem::window, "stream", "verified", r.verified ? 1 : 0,
           {{"backing", b}});
    result.verified = result.verified && r.verified;
  }
  cluster->emit_net_summary(ctx.now);
  merge_telemetry(result.addb, cluster->addb(), "stream");
  record(result.addb, ctx.now, telemetry::Subsystem::window, "stream", "verified", result.verified ? 1 : 0);
  return result;
}

}  // namespace sage::bench
