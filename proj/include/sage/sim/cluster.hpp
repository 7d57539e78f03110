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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sage/common/fabric.hpp"
#include "sage/ha/ha.hpp"
#include "sage/hsm/hsm.hpp"
#include "sage/store/store.hpp"
#include "sage/telemetry/addb.hpp"
#include "sage/tier/device.hpp"

namespace sage::sim {

enum class Role : std::uint8_t { storage = 1, compute = 2, consumer = 4 };

struct NetworkProfile {
  VTime latency = 10e-6;  // virtual seconds
  double bandwidth = 1e9;  // bytes per virtual second
  bool operator==(const NetworkProfile&) const = default;
};

struct NodeSpec {
  NodeId id = 0;
  std::uint8_t roles = 0;
  std::vector<DeviceConfig> devices;
  std::uint32_t ranks = 1;

  bool has(Role r) const noexcept { return (roles & static_cast<std::uint8_t>(r)) != 0; }
};

struct FaultAction {
  enum class Kind : std::uint8_t { crash, restart, fail_device, restore_device, partition };
  Kind kind = Kind::crash;
  VTime t = 0;
  NodeId node = 0;
  DeviceId device = 0;
  bool wipe = false;             // restore_device
  std::vector<NodeId> nodes;     // partition: this group is cut off from the rest
  VTime until = 0;               // partition heals here
};

struct FaultPlan {
  std::vector<FaultAction> actions;
};

struct ClusterConfig {
  std::uint64_t seed = 1;
  std::uint64_t block_size = 4096;
  NodeId meta_node = 0;
  VTime horizon = 1e9;
  NetworkProfile network;
  std::map<std::pair<NodeId, NodeId>, NetworkProfile> links;  // keyed (min, max)
  std::vector<NodeSpec> nodes;
  hsm::HsmPolicy hsm;
  ha::Thresholds ha;
  bool auto_repair = true;
  FaultPlan faults;

  // Throws Error(bad_config) on the first problem found.
  void validate() const;

  static ClusterConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // `storage` nodes with one device per tier each (the last storage node
  // also holds a tier-2 spare), followed by `compute` nodes with
  // `ranks_per_compute` ranks each. The metadata node is node 0.
  static ClusterConfig uniform(std::uint32_t storage, std::uint32_t compute, std::uint32_t ranks_per_compute = 1);
};

// One entry per inter-node message, in issue order.
struct Message {
  std::uint64_t seq = 0;
  VTime sent = 0;
  VTime arrived = 0;
  NodeId from = 0;
  NodeId to = 0;
  MsgKind kind = MsgKind::control;
  std::uint64_t bytes = 0;  // payload plus envelope
  bool dropped = false;
};

struct FabricCounters {
  std::uint64_t messages = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t bytes_dropped = 0;
  std::map<MsgKind, std::uint64_t> bytes_by_kind;
};

// Links with latency and bandwidth. Each node has one egress and one
// ingress port; a message occupies both for its serialization time, so
// concurrent senders to one node queue behind each other. Same-node
// messages are free and not logged.
class SimFabric final : public Fabric {
 public:
  using TimeoutSink = std::function<void(NodeId from, NodeId to, VTime t)>;

  explicit SimFabric(NetworkProfile network = {}, std::map<std::pair<NodeId, NodeId>, NetworkProfile> links = {});

  void add_node(NodeId node);
  VTime transfer(NodeId from, NodeId to, std::uint64_t payload_bytes, MsgKind kind, VTime at) override;
  bool node_up(NodeId node) const override;
  bool reachable(NodeId from, NodeId to) const override;

  // Request then reply; returns the reply's arrival time.
  VTime rpc(NodeId from, NodeId to, std::uint64_t request_bytes, std::uint64_t reply_bytes, MsgKind kind, VTime at);

  // Latency plus serialization, ignoring queueing.
  VTime link_cost(NodeId from, NodeId to, std::uint64_t bytes) const;
  const NetworkProfile& profile(NodeId from, NodeId to) const;

  void set_up(NodeId node, bool up);
  void cut(const std::vector<NodeId>& group);
  void heal(const std::vector<NodeId>& group);
  bool partitioned(NodeId a, NodeId b) const;

  void set_timeout_sink(TimeoutSink sink) { sink_ = std::move(sink); }
  // Keeping the per-message log is optional; counters are always kept.
  void set_logging(bool on) noexcept { logging_ = on; }
  void reset_queues();

  const std::vector<Message>& log() const noexcept { return log_; }
  const FabricCounters& counters() const noexcept { return counters_; }
  std::uint64_t log_hash() const;

 private:
  struct Port {
    VTime egress = 0;
    VTime ingress = 0;
    bool up = true;
  };
  Port& port(NodeId node);

  NetworkProfile network_;
  std::map<std::pair<NodeId, NodeId>, NetworkProfile> links_;
  std::map<NodeId, Port> ports_;
  std::vector<std::set<NodeId>> cuts_;
  std::vector<Message> log_;
  FabricCounters counters_;
  TimeoutSink sink_;
  bool logging_ = true;
  std::uint64_t seq_ = 0;
};

struct RankInfo {
  RankId rank = 0;
  NodeId node = 0;
};

// A simulated cluster: nodes, devices, the fabric, the metadata store, HA
// and telemetry, driven by one virtual clock. Faults fire when the clock
// passes their scheduled time.
class Cluster {
 public:
  using NodeListener = std::function<void(NodeId, VTime)>;

  // Creates or reopens the cluster state under `dir`. The config's seed is
  // replaced by `seed`.
  static std::unique_ptr<Cluster> spawn(ClusterConfig config, std::uint64_t seed, const std::filesystem::path& dir);

  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;
  ~Cluster();

  const ClusterConfig& config() const noexcept { return config_; }
  SimFabric& fabric() noexcept { return fabric_; }
  DevicePool& pool() noexcept { return *pool_; }
  Store& store() noexcept { return *store_; }
  telemetry::Addb& addb() noexcept { return addb_; }
  ha::Monitor& monitor() noexcept { return *monitor_; }
  std::mt19937_64& rng() noexcept { return rng_; }

  VTime now() const noexcept { return now_; }
  // Moves the clock to `t`, firing due faults in time order and running
  // any repair they trigger.
  void advance(VTime t);
  void inject(const FaultPlan& plan);

  void crash_node(NodeId node, VTime t);
  void restart_node(NodeId node, VTime t);
  bool node_up(NodeId node) const { return fabric_.node_up(node); }

  const std::vector<RankInfo>& ranks() const noexcept { return ranks_; }
  NodeId node_of(RankId rank) const;
  std::vector<NodeId> nodes_with(Role role) const;
  std::vector<RankId> ranks_with(Role role) const;
  NodeId meta_node() const noexcept { return config_.meta_node; }

  // Listener tokens can be passed to remove_listener.
  std::uint64_t on_crash(NodeListener listener);
  std::uint64_t on_restart(NodeListener listener);
  void remove_listener(std::uint64_t token);

  const std::vector<ha::FailureEvent>& failure_events() const noexcept { return failures_; }
  std::uint64_t trace_hash() const { return addb_.trace_hash(); }

  // Emits one net summary record with the fabric counters.
  void emit_net_summary(VTime t);

 private:
  Cluster(ClusterConfig config, const std::filesystem::path& dir);
  void fire(const FaultAction& action);
  void record_failure(VTime t, ha::SourceKind kind, std::uint64_t source, ha::EventKind event);
  void settle(VTime t);

  ClusterConfig config_;
  std::filesystem::path dir_;
  SimFabric fabric_;
  telemetry::Addb addb_;
  std::unique_ptr<DevicePool> pool_;
  std::unique_ptr<Store> store_;
  std::unique_ptr<ha::Monitor> monitor_;
  std::mt19937_64 rng_;
  VTime now_ = 0;
  std::vector<FaultAction> pending_;  // sorted by time, fired from the front
  std::vector<RankInfo> ranks_;
  std::map<std::uint64_t, NodeListener> crash_listeners_;
  std::map<std::uint64_t, NodeListener> restart_listeners_;
  std::uint64_t next_listener_ = 1;
  std::vector<ha::FailureEvent> failures_;
  std::vector<ha::FailureEvent> unsettled_;  // device events waiting for the monitor
};

std::string_view to_string(Role role) noexcept;
std::string_view to_string(FaultAction::Kind kind) noexcept;

}  // namespace sage::sim
