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

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "bench_util.hpp"
#include "sage/common/error.hpp"
#include "sage/stream/stream.hpp"

namespace sage::bench {
namespace {

constexpr double kDt = 0.01;
constexpr double kTurn = 0.1;  // velocity rotation per step for unit charge

// A rank's particles, pushed by a toy mover: velocities rotate about z
// with the sign of the charge, positions advance and wrap into the unit
// cube. Kinetic energy is conserved per particle.
class Mover {
 public:
  Mover(std::uint64_t seed, RankId rank, std::uint32_t count) {
    std::mt19937_64 rng(splitmix64(seed + 0x5bd1e995) ^ rank);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    std::normal_distribution<double> vel(0.0, 1.0);
    particles_.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      auto& p = particles_[i];
      p = {pos(rng), pos(rng), pos(rng), vel(rng), vel(rng), vel(rng), i % 2 == 0 ? 1.0 : -1.0,
           (static_cast<std::uint64_t>(rank) << 32) | i};
    }
  }

  // Advances one step; returns the indices above `threshold`.
  std::vector<std::uint32_t> step(double threshold) {
    static const double c = std::cos(kTurn), s = std::sin(kTurn);
    std::vector<std::uint32_t> hot;
    for (std::uint32_t i = 0; i < particles_.size(); ++i) {
      auto& p = particles_[i];
      const double sq = s * p.q;
      const double u = c * p.u - sq * p.v;
      const double v = sq * p.u + c * p.v;
      p.u = u;
      p.v = v;
      p.x = wrap(p.x + kDt * p.u);
      p.y = wrap(p.y + kDt * p.v);
      p.z = wrap(p.z + kDt * p.w);
      if (0.5 * (p.u * p.u + p.v * p.v + p.w * p.w) > threshold) hot.push_back(i);
    }
    return hot;
  }

  const stream::Particle& operator[](std::uint32_t i) const { return particles_[i]; }

 private:
  static double wrap(double x) { return x - std::floor(x); }
  std::vector<stream::Particle> particles_;
};

struct Topology {
  sim::ClusterConfig config;
  std::uint32_t consumers = 0;
};

// Storage nodes from `base` (no ranks), then compute nodes for the
// simulation ranks, then consumer nodes.
Topology topology(const sim::ClusterConfig& base, const OffloadParams& p, std::uint32_t S) {
  Topology t;
  t.consumers = p.consumers != 0 ? p.consumers : std::max<std::uint32_t>(1, S / p.ratio);
  t.config = base;
  NodeId next = 0;
  for (auto& n : t.config.nodes) {
    n.ranks = 0;
    next = std::max(next, n.id + 1);
  }
  auto add = [&](std::uint32_t ranks, sim::Role role) {
    for (std::uint32_t left = ranks; left > 0;) {
      sim::NodeSpec n;
      n.id = next++;
      n.roles = static_cast<std::uint8_t>(role);
      n.ranks = std::min(left, p.ranks_per_node);
      left -= n.ranks;
      t.config.nodes.push_back(n);
    }
  };
  add(S, sim::Role::compute);
  add(t.consumers, sim::Role::consumer);
  return t;
}

Layout tier2_layout(sim::Cluster& cluster) {
  auto devs = cluster.pool().in_tier(2);
  if (devs.empty()) devs = cluster.pool().in_tier(1);
  if (devs.empty()) raise(Errc::bad_config, "no tier-1 or tier-2 devices for particle output");
  return Layout::striped(static_cast<std::uint32_t>(devs.size()), 0, devs);
}

using Multiset = std::vector<std::string>;

void add_elements(Multiset& m, ByteView bytes) {
  for (std::size_t i = 0; i + stream::kParticleBytes <= bytes.size(); i += stream::kParticleBytes)
    m.emplace_back(reinterpret_cast<const char*>(bytes.data() + i), stream::kParticleBytes);
}

struct Outcome {
  VTime time = 0;
  std::uint64_t streamed = 0;
  bool conserved = false;
};

Outcome offload_mode(sim::Cluster& cluster, const OffloadParams& p, std::uint64_t seed) {
  const auto sim_ranks = ranks_on(cluster, sim::Role::compute);
  const auto consumers = ranks_on(cluster, sim::Role::consumer);
  auto& store = cluster.store();

  IoCtx setup{cluster.meta_node(), 0};
  stream::StreamDescriptor desc;
  desc.producers = sim_ranks;
  desc.consumers = consumers;
  stream::Stream stream(cluster, desc);
  std::vector<std::pair<ObjectId, const stream::WriteToObject*>> outputs;
  for (RankId c : consumers) {
    const auto obj = store.create_object(setup, cluster.config().block_size, tier2_layout(cluster)).id;
    auto w = std::make_unique<stream::WriteToObject>(store, obj, p.flush_blocks);
    outputs.emplace_back(obj, w.get());
    stream.attach(c, std::move(w));
  }

  std::vector<Mover> movers;
  for (RankId r : sim_ranks) movers.emplace_back(seed, r, p.particles_per_rank);
  const VTime t0 = setup.now;
  std::vector<VTime> clock(sim_ranks.size(), t0);
  const VTime compute = p.mover_cost * p.particles_per_rank;
  Multiset sent;
  for (std::uint32_t step = 0; step < p.steps; ++step) {
    for (std::size_t i = 0; i < sim_ranks.size(); ++i) {
      const auto hot = movers[i].step(p.threshold);
      IoCtx ctx{cluster.node_of(sim_ranks[i]), clock[i] + compute};
      for (auto k : hot) {
        const Bytes b = stream::encode_particle(movers[i][k]);
        stream.send(ctx, sim_ranks[i], b);
        add_elements(sent, b);
      }
      stream.flush(ctx, sim_ranks[i]);
      clock[i] = ctx.now;
    }
  }
  IoCtx end{cluster.node_of(consumers.front()), *std::max_element(clock.begin(), clock.end())};
  const auto report = stream.terminate(end);

  Outcome out;
  out.time = end.now - t0;
  out.streamed = report.total;
  Multiset stored;
  for (const auto& [obj, writer] : outputs) {
    const std::uint64_t bytes = writer->bytes_written();
    if (bytes == 0) continue;
    IoCtx rd{cluster.meta_node(), end.now};
    const Bytes all = store.read(rd, obj, 0, (bytes + cluster.config().block_size - 1) / cluster.config().block_size);
    add_elements(stored, ByteView(all.data(), bytes));
  }
  std::sort(sent.begin(), sent.end());
  std::sort(stored.begin(), stored.end());
  out.conserved = sent == stored && report.total == sent.size();
  return out;
}

// Every step: compute, barrier, each node's first rank gathers its node's
// hot particles and writes them to a shared object, barrier.
Outcome baseline_mode(sim::Cluster& cluster, const OffloadParams& p, std::uint64_t seed) {
  const auto sim_ranks = ranks_on(cluster, sim::Role::compute);
  auto& store = cluster.store();
  auto& fabric = cluster.fabric();
  const std::uint64_t bs = cluster.config().block_size;

  IoCtx setup{cluster.meta_node(), 0};
  const auto obj = store.create_object(setup, bs, tier2_layout(cluster)).id;
  std::vector<NodeId> node;
  for (RankId r : sim_ranks) node.push_back(cluster.node_of(r));

  std::vector<Mover> movers;
  for (RankId r : sim_ranks) movers.emplace_back(seed, r, p.particles_per_rank);
  const VTime t0 = setup.now;
  std::vector<VTime> clock(sim_ranks.size(), t0);
  const VTime compute = p.mover_cost * p.particles_per_rank;
  Multiset sent;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> regions;  // (first block, bytes)
  std::uint64_t next_block = 0;
  for (std::uint32_t step = 0; step < p.steps; ++step) {
    std::vector<Bytes> hot(sim_ranks.size());
    for (std::size_t i = 0; i < sim_ranks.size(); ++i) {
      for (auto k : movers[i].step(p.threshold)) {
        const Bytes b = stream::encode_particle(movers[i][k]);
        hot[i].insert(hot[i].end(), b.begin(), b.end());
      }
      add_elements(sent, hot[i]);
      clock[i] += compute;
    }
    barrier(fabric, node, clock);
    for (std::size_t lo = 0; lo < sim_ranks.size();) {
      std::size_t hi = lo;
      Bytes buf;
      VTime ready = clock[lo];
      while (hi < sim_ranks.size() && node[hi] == node[lo]) {
        ready = std::max(ready, fabric.transfer(node[hi], node[lo], hot[hi].size(), MsgKind::data_write, clock[hi]));
        buf.insert(buf.end(), hot[hi].begin(), hot[hi].end());
        ++hi;
      }
      if (!buf.empty()) {
        const std::uint64_t bytes = buf.size();
        buf.resize((bytes + bs - 1) / bs * bs, 0);
        IoCtx ctx{node[lo], ready};
        store.write(ctx, obj, next_block, buf);
        regions.emplace_back(next_block, bytes);
        next_block += buf.size() / bs;
        ready = ctx.now;
      }
      clock[lo] = ready;
      lo = hi;
    }
    barrier(fabric, node, clock);
  }
  Outcome out;
  const VTime end = *std::max_element(clock.begin(), clock.end());
  out.time = end - t0;
  out.streamed = sent.size();
  Multiset stored;
  for (const auto& [block, bytes] : regions) {
    IoCtx rd{cluster.meta_node(), end};
    const Bytes all = store.read(rd, obj, block, (bytes + bs - 1) / bs);
    add_elements(stored, ByteView(all.data(), bytes));
  }
  std::sort(sent.begin(), sent.end());
  std::sort(stored.begin(), stored.end());
  out.conserved = sent == stored;
  return out;
}

}  // namespace

RunResult run_offload(const WorkloadConfig& config, const std::filesystem::path& dir) {
  config.validate();
  const auto& p = config.offload;
  RunResult result;
  result.workload = "offload";
  result.verified = true;
  const auto sub = telemetry::Subsystem::stream;

  for (std::uint32_t S : p.sim_ranks) {
    const auto topo = topology(config.cluster, p, S);
    const std::string s = std::to_string(S);
    Outcome o[2];
    const char* modes[2] = {"offload", "baseline"};
    for (int m = 0; m < 2; ++m) {
      const std::string run = "offload-" + s + "-" + modes[m];
      auto cluster = sim::Cluster::spawn(topo.config, config.seed, dir / run);
      cluster->fabric().set_logging(false);
      o[m] = m == 0 ? offload_mode(*cluster, p, config.seed) : baseline_mode(*cluster, p, config.seed);
      const telemetry::Tags tags{{"mode", modes[m]}, {"sim_ranks", s}, {"consumers", std::to_string(topo.consumers)}};
      record(result.addb, o[m].time, sub, "offload", "time", o[m].time, tags);
      record(result.addb, o[m].time, sub, "offload", "elements", static_cast<double>(o[m].streamed), tags);
      record(result.addb, o[m].time, sub, "offload", "verified", o[m].conserved ? 1 : 0, tags);
      result.verified = result.verified && o[m].conserved;
      cluster->emit_net_summary(o[m].time);
      merge_telemetry(result.addb, cluster->addb(), run);
    }
    result.verified = result.verified && o[0].streamed == o[1].streamed;
    record(result.addb, 0, sub, "offload", "improvement", o[1].time / o[0].time,
           {{"sim_ranks", s}, {"consumers", std::to_string(topo.consumers)}});
  }
  record(result.addb, 0, sub, "offload", "verified", result.verified ? 1 : 0);
  return result;
}

}  // namespace sage::bench
