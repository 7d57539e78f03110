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

#include <limits>

#include "bench_util.hpp"
#include "sage/bench/workloads.hpp"
#include "sage/common/error.hpp"

namespace sage::bench {

using nlohmann::json;

sim::ClusterConfig WorkloadConfig::default_cluster() { return sim::ClusterConfig::uniform(4, 0); }

void WorkloadConfig::validate() const {
  auto bad = [](const std::string& why) { raise(Errc::bad_config, why); };
  const auto& names = workload_names();
  if (std::find(names.begin(), names.end(), workload) == names.end()) bad("unknown workload '" + workload + "'");
  if (stream.n == 0) bad("stream.n must be at least 1");
  if (stream.chunk == 0) bad("stream.chunk must be at least 1");
  if (dht.processes == 0 || dht.local_volume == 0) bad("dht processes and local_volume must be at least 1");
  if (checkpoint.processes.empty()) bad("checkpoint.processes is empty");
  for (auto p : checkpoint.processes)
    if (p == 0 || checkpoint.particles % p != 0) bad("checkpoint.particles must divide evenly over every process count");
  if (offload.sim_ranks.empty()) bad("offload.sim_ranks is empty");
  if (offload.ratio == 0 || offload.ranks_per_node == 0 || offload.steps == 0) bad("offload ratio, steps and ranks_per_node must be positive");
  for (auto s : offload.sim_ranks) {
    if (s == 0) bad("offload.sim_ranks entries must be positive");
    if (offload.consumers > s) bad("offload needs at least as many simulation ranks as consumers");
  }
  if (!(offload.mover_cost >= 0)) bad("offload.mover_cost must be non-negative");
  if (offload.flush_blocks == 0) bad("offload.flush_blocks must be positive");
  bool storage = false;
  for (const auto& n : cluster.nodes) storage = storage || n.has(sim::Role::storage);
  if (!storage) bad("the cluster needs at least one storage node");
  cluster.validate();
}

WorkloadConfig WorkloadConfig::from_json(const json& j) {
  WorkloadConfig c;
  try {
    c.workload = j.value("workload", c.workload);
    c.seed = j.value("seed", c.seed);
    if (j.contains("stream")) {
      const auto& s = j.at("stream");
      c.stream.n = s.value("n", c.stream.n);
      c.stream.q = s.value("q", c.stream.q);
      c.stream.chunk = s.value("chunk", c.stream.chunk);
    }
    if (j.contains("dht")) {
      const auto& s = j.at("dht");
      c.dht.processes = s.value("processes", c.dht.processes);
      c.dht.local_volume = s.value("local_volume", c.dht.local_volume);
      c.dht.overflow = s.value("overflow", c.dht.overflow);
      c.dht.ops = s.value("ops", c.dht.ops);
    }
    if (j.contains("checkpoint")) {
      const auto& s = j.at("checkpoint");
      c.checkpoint.particles = s.value("particles", c.checkpoint.particles);
      c.checkpoint.processes = s.value("processes", c.checkpoint.processes);
      c.checkpoint.crash_before_sync = s.value("crash_before_sync", c.checkpoint.crash_before_sync);
    }
    if (j.contains("offload")) {
      const auto& s = j.at("offload");
      auto& o = c.offload;
      o.sim_ranks = s.value("sim_ranks", o.sim_ranks);
      o.consumers = s.value("consumers", o.consumers);
      o.ratio = s.value("ratio", o.ratio);
      o.steps = s.value("steps", o.steps);
      o.particles_per_rank = s.value("particles_per_rank", o.particles_per_rank);
      if (s.contains("threshold")) {
        // JSON has no infinity; null or "inf" mean nothing is streamed.
        const auto& t = s.at("threshold");
        o.threshold = t.is_number() ? t.get<double>() : std::numeric_limits<double>::infinity();
      }
      o.mover_cost = s.value("mover_cost", o.mover_cost);
      o.ranks_per_node = s.value("ranks_per_node", o.ranks_per_node);
      o.flush_blocks = s.value("flush_blocks", o.flush_blocks);
    }
    if (j.contains("cluster")) c.cluster = sim::ClusterConfig::from_json(j.at("cluster"));
  } catch (const json::exception& e) {
    raise(Errc::bad_config, e.what());
  }
  c.cluster.seed = c.seed;
  c.validate();
  return c;
}

json WorkloadConfig::to_json() const {
  json j;
  j["workload"] = workload;
  j["seed"] = seed;
  j["stream"] = {{"n", stream.n}, {"q", stream.q}, {"chunk", stream.chunk}};
  j["dht"] = {{"processes", dht.processes},
              {"local_volume", dht.local_volume},
              {"overflow", dht.overflow},
              {"ops", dht.ops}};
  j["checkpoint"] = {{"particles", checkpoint.particles},
                     {"processes", checkpoint.processes},
                     {"crash_before_sync", checkpoint.crash_before_sync}};
  json threshold = offload.threshold;
  if (!std::isfinite(offload.threshold)) threshold = "inf";
  j["offload"] = {{"sim_ranks", offload.sim_ranks},
                  {"consumers", offload.consumers},
                  {"ratio", offload.ratio},
                  {"steps", offload.steps},
                  {"particles_per_rank", offload.particles_per_rank},
                  {"threshold", threshold},
                  {"mover_cost", offload.mover_cost},
                  {"ranks_per_node", offload.ranks_per_node},
                  {"flush_blocks", offload.flush_blocks}};
  j["cluster"] = cluster.to_json();
  return j;
}

DhtCapacity dht_capacity(std::uint64_t processes, std::uint64_t local_volume, std::uint64_t overflow) {
  DhtCapacity c;
  std::uint64_t factor = 0;
  if (__builtin_add_overflow(overflow, 1, &factor) ||
      __builtin_mul_overflow(local_volume, factor, &c.per_process) ||
      __builtin_mul_overflow(processes, c.per_process, &c.global) ||
      __builtin_mul_overflow(processes, local_volume, &c.global_without_overflow))
    raise(Errc::capacity_exceeded, "table size overflows 64 bits");
  return c;
}

void merge_telemetry(telemetry::Addb& into, const telemetry::Addb& from, const std::string& run) {
  for (const auto& r : from.log()) {
    telemetry::Tags tags = r.tags;
    tags.emplace_back("run", run);
    into.emit(r.t, r.node, r.subsystem, r.metric, r.value, std::move(tags));
  }
}

RunResult run_workload(const WorkloadConfig& config, const std::filesystem::path& dir) {
  config.validate();
  if (config.workload == "stream") return run_stream(config, dir);
  if (config.workload == "dht") return run_dht(config, dir);
  if (config.workload == "checkpoint") return run_checkpoint(config, dir);
  return run_offload(config, dir);
}

// --- helpers shared by the workloads ---------------------------------------

sim::ClusterConfig with_storage_ranks(sim::ClusterConfig base, std::uint32_t ranks) {
  std::vector<sim::NodeSpec*> storage;
  for (auto& n : base.nodes) {
    if (n.has(sim::Role::storage)) storage.push_back(&n);
    n.ranks = 0;
  }
  if (storage.empty()) raise(Errc::bad_config, "no storage nodes");
  // Contiguous blocks of ranks per node, as evenly as possible.
  const auto per = static_cast<std::uint32_t>(storage.size());
  for (std::uint32_t i = 0; i < per; ++i) storage[i]->ranks = ranks / per + (i < ranks % per ? 1 : 0);
  return base;
}

void record(telemetry::Addb& addb, VTime t, telemetry::Subsystem sub, const std::string& workload,
            const std::string& name, double value, telemetry::Tags params) {
  params.insert(params.begin(), {"workload", workload});
  addb.emit(t, 0, sub, std::string(kMetricPrefix) + name, value, std::move(params));
}

std::vector<RankId> ranks_on(const sim::Cluster& cluster, sim::Role role) {
  std::vector<RankId> out;
  for (const auto& r : cluster.ranks()) {
    for (const auto& n : cluster.config().nodes)
      if (n.id == r.node && n.has(role)) out.push_back(r.rank);
  }
  return out;
}

void barrier(sim::SimFabric& fabric, std::span<const NodeId> node, std::vector<VTime>& clock) {
  const std::size_t n = node.size();
  for (std::size_t k = 1; k < n; k *= 2) {
    std::vector<VTime> next(clock);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t to = (i + k) % n;
      next[to] = std::max(next[to], fabric.transfer(node[i], node[to], 0, MsgKind::control, clock[i]));
    }
    clock = std::move(next);
  }
}

}  // namespace sage::bench
