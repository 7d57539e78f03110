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

#include <cstring>
#include <random>

#include "bench_util.hpp"
#include "sage/stream/stream.hpp"
#include "sage/window/window.hpp"

namespace sage::bench {
namespace {

// Particles of rank r: ids r*count .. r*count+count-1, seeded per rank.
Bytes particles_of(std::uint64_t seed, RankId rank, std::uint64_t count) {
  std::mt19937_64 rng(splitmix64(seed) ^ rank);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Bytes out;
  out.reserve(count * stream::kParticleBytes);
  for (std::uint64_t i = 0; i < count; ++i) {
    stream::Particle p{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng) > 0 ? 1.0 : -1.0, rank * count + i};
    const Bytes b = stream::encode_particle(p);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

void crash_and_restart(sim::Cluster& cluster, VTime t) {
  for (const auto& n : cluster.config().nodes) cluster.crash_node(n.id, t);
  for (const auto& n : cluster.config().nodes) cluster.restart_node(n.id, t);
}

std::uint64_t mismatched(const std::vector<Bytes>& want, const std::vector<Bytes>& got) {
  std::uint64_t bad = 0;
  for (std::size_t r = 0; r < want.size(); ++r)
    for (std::size_t i = 0; i < want[r].size(); i += stream::kParticleBytes)
      bad += got[r].size() < i + stream::kParticleBytes ||
                     std::memcmp(want[r].data() + i, got[r].data() + i, stream::kParticleBytes) != 0
                 ? 1
                 : 0;
  return bad;
}

struct Phase {
  VTime checkpoint = 0;
  VTime restart = 0;
  std::uint64_t mismatched = 0;
};

Phase windows_mode(sim::Cluster& cluster, const std::vector<Bytes>& data, bool sync) {
  const auto P = static_cast<std::uint32_t>(data.size());
  window::Windows windows(cluster);
  std::vector<NodeId> node(P);
  std::vector<window::WindowId> w(P);
  IoCtx setup{cluster.node_of(0), 0};
  window::WindowOptions opt;
  opt.backing = window::Backing::storage;
  for (RankId r = 0; r < P; ++r) {
    node[r] = cluster.node_of(r);
    IoCtx ctx{node[r], setup.now};
    w[r] = windows.alloc(ctx, r, data[r].size(), opt);
    setup.now = ctx.now;
  }

  Phase out;
  const VTime t0 = setup.now;
  std::vector<VTime> clock(P, t0);
  for (RankId r = 0; r < P; ++r) {
    IoCtx ctx{node[r], clock[r]};
    windows.put(ctx, w[r], 0, data[r]);
    if (sync) windows.sync(ctx, w[r]);
    clock[r] = ctx.now;
  }
  barrier(cluster.fabric(), node, clock);
  const VTime t1 = *std::max_element(clock.begin(), clock.end());
  out.checkpoint = t1 - t0;

  crash_and_restart(cluster, t1);
  std::vector<Bytes> got(P);
  for (RankId r = 0; r < P; ++r) {
    IoCtx ctx{node[r], t1};
    got[r] = windows.get(ctx, w[r], 0, data[r].size());
    clock[r] = ctx.now;
  }
  barrier(cluster.fabric(), node, clock);
  out.restart = *std::max_element(clock.begin(), clock.end()) - t1;
  out.mismatched = mismatched(data, got);
  return out;
}

// Two-phase collective I/O into one shared object: the first rank on each
// node aggregates a contiguous, block-aligned file domain.
Phase baseline_mode(sim::Cluster& cluster, const std::vector<Bytes>& data) {
  const auto P = static_cast<std::uint32_t>(data.size());
  auto& store = cluster.store();
  auto& fabric = cluster.fabric();
  const std::uint64_t bs = cluster.config().block_size;
  std::vector<NodeId> node(P);
  std::vector<RankId> aggregators;
  for (RankId r = 0; r < P; ++r) {
    node[r] = cluster.node_of(r);
    if (r == 0 || node[r] != node[r - 1]) aggregators.push_back(r);
  }
  std::vector<std::uint64_t> offset(P + 1, 0);
  for (RankId r = 0; r < P; ++r) offset[r + 1] = offset[r] + data[r].size();
  const std::uint64_t total = offset[P];
  const std::uint64_t blocks = (total + bs - 1) / bs;
  const auto A = aggregators.size();
  auto domain = [&](std::size_t j) {
    return std::pair{blocks * j / A * bs, std::min(total, blocks * (j + 1) / A * bs)};
  };

  auto devs = cluster.pool().in_tier(1);
  IoCtx setup{node[0], 0};
  const auto obj =
      store.create_object(setup, bs, Layout::striped(static_cast<std::uint32_t>(devs.size()), 0, devs)).id;

  Phase out;
  const VTime t0 = setup.now;
  std::vector<VTime> clock(P, t0);
  barrier(fabric, node, clock);
  for (std::size_t j = 0; j < A; ++j) {
    const RankId agg = aggregators[j];
    const auto [lo, hi] = domain(j);
    if (lo >= hi) continue;
    Bytes buf(((hi - lo) + bs - 1) / bs * bs, 0);
    VTime ready = clock[agg];
    for (RankId r = 0; r < P; ++r) {
      const std::uint64_t a = std::max(lo, offset[r]), b = std::min(hi, offset[r + 1]);
      if (a >= b) continue;
      std::memcpy(buf.data() + (a - lo), data[r].data() + (a - offset[r]), b - a);
      ready = std::max(ready, fabric.transfer(node[r], node[agg], b - a, MsgKind::data_write, clock[r]));
    }
    IoCtx ctx{node[agg], ready};
    store.write(ctx, obj, lo / bs, buf);
    clock[agg] = ctx.now;
  }
  barrier(fabric, node, clock);
  const VTime t1 = *std::max_element(clock.begin(), clock.end());
  out.checkpoint = t1 - t0;

  crash_and_restart(cluster, t1);
  std::fill(clock.begin(), clock.end(), t1);
  std::vector<Bytes> got(P);
  for (RankId r = 0; r < P; ++r) got[r].resize(data[r].size());
  barrier(fabric, node, clock);
  std::vector<VTime> after(clock);
  for (std::size_t j = 0; j < A; ++j) {
    const RankId agg = aggregators[j];
    const auto [lo, hi] = domain(j);
    if (lo >= hi) continue;
    IoCtx ctx{node[agg], clock[agg]};
    const Bytes buf = store.read(ctx, obj, lo / bs, (hi - lo + bs - 1) / bs);
    after[agg] = std::max(after[agg], ctx.now);
    for (RankId r = 0; r < P; ++r) {
      const std::uint64_t a = std::max(lo, offset[r]), b = std::min(hi, offset[r + 1]);
      if (a >= b) continue;
      std::memcpy(got[r].data() + (a - offset[r]), buf.data() + (a - lo), b - a);
      after[r] = std::max(after[r], fabric.transfer(node[agg], node[r], b - a, MsgKind::data_read, ctx.now));
    }
  }
  clock = after;
  barrier(fabric, node, clock);
  out.restart = *std::max_element(clock.begin(), clock.end()) - t1;
  out.mismatched = mismatched(data, got);
  return out;
}

}  // namespace

RunResult run_checkpoint(const WorkloadConfig& config, const std::filesystem::path& dir) {
  config.validate();
  const auto& p = config.checkpoint;
  RunResult result;
  result.workload = "checkpoint";
  result.verified = true;
  const auto sub = telemetry::Subsystem::window;

  for (std::uint32_t P : p.processes) {
    std::vector<Bytes> data(P);
    for (RankId r = 0; r < P; ++r) data[r] = particles_of(config.seed, r, p.particles / P);
    const std::string ps = std::to_string(P);

    Phase phase[2];
    const char* modes[2] = {"windows", "baseline"};
    for (int m = 0; m < 2; ++m) {
      const std::string run = "checkpoint-" + ps + "-" + modes[m];
      auto cluster = sim::Cluster::spawn(with_storage_ranks(config.cluster, P), config.seed, dir / run);
      phase[m] = m == 0 ? windows_mode(*cluster, data, !p.crash_before_sync) : baseline_mode(*cluster, data);
      const VTime end = phase[m].checkpoint + phase[m].restart;
      const telemetry::Tags tags{{"mode", modes[m]}, {"processes", ps}};
      record(result.addb, end, sub, "checkpoint", "checkpoint_time", phase[m].checkpoint, tags);
      record(result.addb, end, sub, "checkpoint", "restart_time", phase[m].restart, tags);
      record(result.addb, end, sub, "checkpoint", "mismatched_particles", static_cast<double>(phase[m].mismatched), tags);
      record(result.addb, end, sub, "checkpoint", "verified", phase[m].mismatched == 0 ? 1 : 0, tags);
      result.verified = result.verified && phase[m].mismatched == 0;
      cluster->emit_net_summary(end);
      merge_telemetry(result.addb, cluster->addb(), run);
    }
    const double ratio = (phase[1].checkpoint + phase[1].restart) / (phase[0].checkpoint + phase[0].restart);
    record(result.addb, 0, sub, "checkpoint", "ratio", ratio, {{"processes", ps}});
  }
  record(result.addb, 0, sub, "checkpoint", "verified", result.verified ? 1 : 0);
  return result;
}

}  // namespace sage::bench
