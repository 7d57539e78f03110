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

#include "sage/sim/cluster.hpp"

#include <algorithm>
#include <cmath>

#include "sage/common/bytes.hpp"
#include "sage/common/error.hpp"

namespace sage::sim {
namespace {

using nlohmann::json;

std::pair<NodeId, NodeId> link_key(NodeId a, NodeId b) { return {std::min(a, b), std::max(a, b)}; }

std::uint8_t parse_roles(const json& j) {
  std::uint8_t roles = 0;
  for (const auto& r : j) {
    const auto s = r.get<std::string>();
    if (s == "storage") roles |= static_cast<std::uint8_t>(Role::storage);
    else if (s == "compute") roles |= static_cast<std::uint8_t>(Role::compute);
    else if (s == "consumer") roles |= static_cast<std::uint8_t>(Role::consumer);
    else raise(Errc::bad_config, "unknown role '" + s + "'");
  }
  return roles;
}

NetworkProfile parse_network(const json& j, NetworkProfile base = {}) {
  base.latency = j.value("latency", base.latency);
  base.bandwidth = j.value("bandwidth", base.bandwidth);
  return base;
}

FaultAction::Kind parse_fault_kind(const std::string& s) {
  using K = FaultAction::Kind;
  if (s == "crash") return K::crash;
  if (s == "restart") return K::restart;
  if (s == "fail_device") return K::fail_device;
  if (s == "restore_device") return K::restore_device;
  if (s == "partition") return K::partition;
  raise(Errc::bad_config, "unknown fault action '" + s + "'");
}

}  // namespace

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::storage: return "storage";
    case Role::compute: return "compute";
    case Role::consumer: return "consumer";
  }
  return "?";
}

std::string_view to_string(FaultAction::Kind kind) noexcept {
  using K = FaultAction::Kind;
  switch (kind) {
    case K::crash: return "crash";
    case K::restart: return "restart";
    case K::fail_device: return "fail_device";
    case K::restore_device: return "restore_device";
    case K::partition: return "partition";
  }
  return "?";
}

// ---- config ----

void ClusterConfig::validate() const {
  if (nodes.empty()) raise(Errc::bad_config, "no nodes");
  if (block_size == 0 || (block_size & (block_size - 1)) != 0) raise(Errc::bad_config, "block_size must be a power of two");
  if (!(network.latency > 0) || !(network.bandwidth > 0)) raise(Errc::bad_config, "network latency and bandwidth must be positive");
  for (const auto& [k, p] : links)
    if (!(p.latency > 0) || !(p.bandwidth > 0)) raise(Errc::bad_config, "link latency and bandwidth must be positive");
  std::set<NodeId> ids;
  std::set<DeviceId> devs;
  bool has_meta = false;
  for (const auto& n : nodes) {
    if (!ids.insert(n.id).second) raise(Errc::bad_config, "duplicate node " + std::to_string(n.id));
    if (n.roles == 0) raise(Errc::bad_config, "node " + std::to_string(n.id) + " has no role");
    if (n.has(Role::storage) && n.devices.empty())
      raise(Errc::bad_config, "storage node " + std::to_string(n.id) + " has no devices");
    if (!n.has(Role::storage) && !n.devices.empty())
      raise(Errc::bad_config, "node " + std::to_string(n.id) + " has devices but no storage role");
    for (const auto& d : n.devices) {
      if (!devs.insert(d.id).second) raise(Errc::bad_config, "duplicate device " + std::to_string(d.id));
      if (d.node != n.id) raise(Errc::bad_config, "device " + std::to_string(d.id) + " node mismatch");
      if (d.tier < kMinTier || d.tier > kMaxTier) raise(Errc::bad_config, "device tier out of range");
      validate_profile(d.profile);
    }
    if (n.id == meta_node) has_meta = true;
  }
  if (!has_meta) raise(Errc::bad_config, "metadata node " + std::to_string(meta_node) + " is not a node");
  try {
    hsm.validate();
  } catch (const Error& e) {
    raise(Errc::bad_config, e.what());
  }
  if (ha.k == 0 || !(ha.window > 0)) raise(Errc::bad_config, "ha thresholds must be positive");
  for (const auto& a : faults.actions) {
    if (a.t < 0 || a.t > horizon) raise(Errc::bad_config, "fault time outside the run horizon");
    if (a.kind == FaultAction::Kind::partition && (a.until < a.t || a.until > horizon))
      raise(Errc::bad_config, "partition must heal within the horizon");
    const bool node_action = a.kind == FaultAction::Kind::crash || a.kind == FaultAction::Kind::restart;
    if (node_action && !ids.count(a.node)) raise(Errc::bad_config, "fault names unknown node");
    if (!node_action && a.kind != FaultAction::Kind::partition && !devs.count(a.device))
      raise(Errc::bad_config, "fault names unknown device");
    for (NodeId n : a.nodes)
      if (!ids.count(n)) raise(Errc::bad_config, "partition names unknown node");
  }
}

ClusterConfig ClusterConfig::from_json(const json& j) {
  try {
    ClusterConfig c;
    c.seed = j.value("seed", c.seed);
    c.block_size = j.value("block_size", c.block_size);
    c.meta_node = j.value("meta_node", c.meta_node);
    c.horizon = j.value("horizon", c.horizon);
    if (j.contains("network")) c.network = parse_network(j.at("network"));
    for (const auto& l : j.value("links", json::array()))
      c.links[link_key(l.at("a").get<NodeId>(), l.at("b").get<NodeId>())] = parse_network(l, c.network);
    for (const auto& jn : j.at("nodes")) {
      NodeSpec n;
      n.id = jn.at("id").get<NodeId>();
      n.roles = parse_roles(jn.at("roles"));
      n.ranks = jn.value("ranks", 1u);
      for (const auto& jd : jn.value("devices", json::array())) {
        DeviceConfig d;
        d.id = jd.at("id").get<DeviceId>();
        d.node = n.id;
        d.tier = jd.at("tier").get<TierId>();
        d.profile = default_profile(d.tier);
        d.profile.capacity_bytes = jd.value("capacity", d.profile.capacity_bytes);
        d.profile.read_bw = jd.value("read_bw", d.profile.read_bw);
        d.profile.write_bw = jd.value("write_bw", d.profile.write_bw);
        d.profile.latency = jd.value("latency", d.profile.latency);
        d.spare = jd.value("spare", false);
        n.devices.push_back(d);
      }
      c.nodes.push_back(std::move(n));
    }
    if (j.contains("policies")) {
      const auto& p = j.at("policies");
      if (p.contains("hsm")) {
        const auto& h = p.at("hsm");
        c.hsm.promote_rate = h.value("promote_rate", c.hsm.promote_rate);
        c.hsm.demote_idle = h.value("demote_idle", c.hsm.demote_idle);
        c.hsm.half_life = h.value("half_life", c.hsm.half_life);
        if (h.contains("watermarks")) {
          const auto& w = h.at("watermarks");
          if (w.size() != kTierCount) raise(Errc::bad_config, "need one watermark pair per tier");
          for (std::size_t i = 0; i < kTierCount; ++i)
            c.hsm.watermarks[i] = {w[i].at(0).get<double>(), w[i].at(1).get<double>()};
        }
      }
      if (p.contains("ha")) {
        const auto& h = p.at("ha");
        c.ha.k = h.value("k", c.ha.k);
        c.ha.window = h.value("window", c.ha.window);
        c.auto_repair = h.value("auto_repair", c.auto_repair);
      }
    }
    for (const auto& jf : j.value("faults", json::array())) {
      FaultAction a;
      a.kind = parse_fault_kind(jf.at("action").get<std::string>());
      a.t = jf.at("t").get<VTime>();
      a.node = jf.value("node", 0u);
      a.device = jf.value("device", 0u);
      a.wipe = jf.value("wipe", false);
      a.nodes = jf.value("nodes", std::vector<NodeId>{});
      a.until = jf.value("until", a.t);
      c.faults.actions.push_back(std::move(a));
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    raise(Errc::bad_config, e.what());
  }
}

json ClusterConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["block_size"] = block_size;
  j["meta_node"] = meta_node;
  j["horizon"] = horizon;
  j["network"] = {{"latency", network.latency}, {"bandwidth", network.bandwidth}};
  j["links"] = json::array();
  for (const auto& [k, p] : links)
    j["links"].push_back({{"a", k.first}, {"b", k.second}, {"latency", p.latency}, {"bandwidth", p.bandwidth}});
  j["nodes"] = json::array();
  for (const auto& n : nodes) {
    json jn{{"id", n.id}, {"ranks", n.ranks}};
    jn["roles"] = json::array();
    for (Role r : {Role::storage, Role::compute, Role::consumer})
      if (n.has(r)) jn["roles"].push_back(to_string(r));
    jn["devices"] = json::array();
    for (const auto& d : n.devices)
      jn["devices"].push_back({{"id", d.id},
                               {"tier", d.tier},
                               {"capacity", d.profile.capacity_bytes},
                               {"read_bw", d.profile.read_bw},
                               {"write_bw", d.profile.write_bw},
                               {"latency", d.profile.latency},
                               {"spare", d.spare}});
    j["nodes"].push_back(std::move(jn));
  }
  json marks = json::array();
  for (const auto& w : hsm.watermarks) marks.push_back({w.low, w.high});
  j["policies"] = {
      {"hsm",
       {{"promote_rate", hsm.promote_rate}, {"demote_idle", hsm.demote_idle}, {"half_life", hsm.half_life},
        {"watermarks", marks}}},
      {"ha", {{"k", ha.k}, {"window", ha.window}, {"auto_repair", auto_repair}}}};
  j["faults"] = json::array();
  for (const auto& a : faults.actions) {
    json jf{{"action", to_string(a.kind)}, {"t", a.t}};
    switch (a.kind) {
      case FaultAction::Kind::crash:
      case FaultAction::Kind::restart: jf["node"] = a.node; break;
      case FaultAction::Kind::fail_device: jf["device"] = a.device; break;
      case FaultAction::Kind::restore_device:
        jf["device"] = a.device;
        jf["wipe"] = a.wipe;
        break;
      case FaultAction::Kind::partition:
        jf["nodes"] = a.nodes;
        jf["until"] = a.until;
        break;
    }
    j["faults"].push_back(std::move(jf));
  }
  return j;
}

ClusterConfig ClusterConfig::uniform(std::uint32_t storage, std::uint32_t compute, std::uint32_t ranks_per_compute) {
  ClusterConfig c;
  DeviceId next = 0;
  for (NodeId n = 0; n < storage; ++n) {
    NodeSpec s;
    s.id = n;
    s.roles = static_cast<std::uint8_t>(Role::storage) | static_cast<std::uint8_t>(Role::compute);
    for (TierId t = kMinTier; t <= kMaxTier; ++t) {
      DeviceConfig d;
      d.id = next++;
      d.node = n;
      d.tier = t;
      d.profile = default_profile(t);
      s.devices.push_back(d);
    }
    if (n + 1 == storage) {
      DeviceConfig d;
      d.id = next++;
      d.node = n;
      d.tier = 2;
      d.profile = default_profile(2);
      d.spare = true;
      s.devices.push_back(d);
    }
    c.nodes.push_back(std::move(s));
  }
  for (std::uint32_t i = 0; i < compute; ++i) {
    NodeSpec s;
    s.id = storage + i;
    s.roles = static_cast<std::uint8_t>(Role::compute);
    s.ranks = ranks_per_compute;
    c.nodes.push_back(std::move(s));
  }
  return c;
}

// ---- fabric ----

SimFabric::SimFabric(NetworkProfile network, std::map<std::pair<NodeId, NodeId>, NetworkProfile> links)
    : network_(network), links_(std::move(links)) {}

void SimFabric::add_node(NodeId node) { ports_.try_emplace(node); }

SimFabric::Port& SimFabric::port(NodeId node) {
  auto it = ports_.find(node);
  if (it == ports_.end()) raise(Errc::node_down, "unknown node " + std::to_string(node));
  return it->second;
}

const NetworkProfile& SimFabric::profile(NodeId from, NodeId to) const {
  auto it = links_.find(link_key(from, to));
  return it == links_.end() ? network_ : it->second;
}

VTime SimFabric::link_cost(NodeId from, NodeId to, std::uint64_t bytes) const {
  if (from == to) return 0;
  const auto& p = profile(from, to);
  return p.latency + static_cast<double>(bytes) / p.bandwidth;
}

bool SimFabric::node_up(NodeId node) const {
  auto it = ports_.find(node);
  return it != ports_.end() && it->second.up;
}

bool SimFabric::partitioned(NodeId a, NodeId b) const {
  for (const auto& group : cuts_)
    if ((group.count(a) != 0) != (group.count(b) != 0)) return true;
  return false;
}

bool SimFabric::reachable(NodeId from, NodeId to) const {
  return node_up(from) && node_up(to) && (from == to || !partitioned(from, to));
}

VTime SimFabric::transfer(NodeId from, NodeId to, std::uint64_t payload_bytes, MsgKind kind, VTime at) {
  if (!node_up(from)) raise(Errc::node_down, "node " + std::to_string(from) + " is down");
  if (!node_up(to)) raise(Errc::node_down, "node " + std::to_string(to) + " is down");
  if (from == to) return at;
  const std::uint64_t bytes = payload_bytes + kEnvelopeBytes;
  Message m{seq_++, at, at, from, to, kind, bytes, false};
  ++counters_.messages;
  counters_.bytes_sent += bytes;
  counters_.bytes_by_kind[kind] += bytes;
  if (partitioned(from, to)) {
    m.dropped = true;
    counters_.bytes_dropped += bytes;
    if (logging_) log_.push_back(m);
    if (sink_) sink_(from, to, at);
    raise(Errc::partitioned, "node " + std::to_string(from) + " cannot reach node " + std::to_string(to));
  }
  const auto& p = profile(from, to);
  const VTime ser = static_cast<double>(bytes) / p.bandwidth;
  Port& out = port(from);
  Port& in = port(to);
  const VTime out_start = std::max(at, out.egress);
  out.egress = out_start + ser;
  const VTime in_start = std::max(out_start + p.latency, in.ingress);
  in.ingress = in_start + ser;
  m.arrived = in_start + ser;
  counters_.bytes_received += bytes;
  if (logging_) log_.push_back(m);
  return m.arrived;
}

VTime SimFabric::rpc(NodeId from, NodeId to, std::uint64_t request_bytes, std::uint64_t reply_bytes, MsgKind kind,
                     VTime at) {
  const VTime there = transfer(from, to, request_bytes, kind, at);
  return transfer(to, from, reply_bytes, kind, there);
}

void SimFabric::set_up(NodeId node, bool up) { port(node).up = up; }

void SimFabric::cut(const std::vector<NodeId>& group) { cuts_.emplace_back(group.begin(), group.end()); }

void SimFabric::heal(const std::vector<NodeId>& group) {
  const std::set<NodeId> g(group.begin(), group.end());
  auto it = std::find(cuts_.begin(), cuts_.end(), g);
  if (it != cuts_.end()) cuts_.erase(it);
}

void SimFabric::reset_queues() {
  for (auto& [id, p] : ports_) p.egress = p.ingress = 0;
}

std::uint64_t SimFabric::log_hash() const {
  ByteWriter w;
  for (const auto& m : log_) {
    w.u64(m.seq);
    w.f64(m.sent);
    w.f64(m.arrived);
    w.u32(m.from);
    w.u32(m.to);
    w.u8(static_cast<std::uint8_t>(m.kind));
    w.u64(m.bytes);
    w.u8(m.dropped ? 1 : 0);
  }
  return fnv1a64(w.bytes());
}

// ---- cluster ----

std::unique_ptr<Cluster> Cluster::spawn(ClusterConfig config, std::uint64_t seed, const std::filesystem::path& dir) {
  config.seed = seed;
  config.validate();
  return std::unique_ptr<Cluster>(new Cluster(std::move(config), dir));
}

Cluster::Cluster(ClusterConfig config, const std::filesystem::path& dir)
    : config_(std::move(config)), dir_(dir), fabric_(config_.network, config_.links), rng_(config_.seed) {
  std::filesystem::create_directories(dir_);
  pool_ = std::make_unique<DevicePool>(dir_ / "devices", config_.block_size);
  RankId rank = 0;
  for (const auto& n : config_.nodes) {
    fabric_.add_node(n.id);
    for (const auto& d : n.devices) pool_->add(d);
    for (std::uint32_t i = 0; i < n.ranks; ++i) ranks_.push_back({rank++, n.id});
  }
  StoreConfig sc;
  sc.dir = dir_ / "meta";
  sc.meta_node = config_.meta_node;
  store_ = std::make_unique<Store>(sc, *pool_, fabric_, &addb_);
  monitor_ = std::make_unique<ha::Monitor>(*store_, config_.ha);

  fabric_.set_timeout_sink([this](NodeId, NodeId to, VTime t) {
    record_failure(t, ha::SourceKind::node, to, ha::EventKind::timeout);
  });
  pool_->set_listener([this](DeviceId d, DeviceEvent e) {
    switch (e) {
      case DeviceEvent::failed: record_failure(now_, ha::SourceKind::device, d, ha::EventKind::offline); break;
      case DeviceEvent::restored_wiped: store_->objects().on_device_wiped(d); break;
      case DeviceEvent::restored: break;
    }
  });
  inject(config_.faults);
}

Cluster::~Cluster() { pool_->set_listener({}); }

void Cluster::inject(const FaultPlan& plan) {
  for (const auto& a : plan.actions) {
    pending_.push_back(a);
    if (a.kind == FaultAction::Kind::partition) {
      // The heal is queued as a second action carrying the same group.
      FaultAction heal = a;
      heal.t = a.until;
      heal.until = -1;
      pending_.push_back(heal);
    }
  }
  std::stable_sort(pending_.begin(), pending_.end(),
                   [](const FaultAction& a, const FaultAction& b) { return a.t < b.t; });
}

void Cluster::advance(VTime t) {
  while (!pending_.empty() && pending_.front().t <= t) {
    FaultAction a = pending_.front();
    pending_.erase(pending_.begin());
    now_ = std::max(now_, a.t);
    fire(a);
    settle(now_);
  }
  now_ = std::max(now_, t);
  settle(now_);
}

void Cluster::fire(const FaultAction& a) {
  using K = FaultAction::Kind;
  addb_.emit(a.t, config_.meta_node, telemetry::Subsystem::net, "fault", 1.0,
             {{"action", std::string(to_string(a.kind))},
              {"node", std::to_string(a.node)},
              {"device", std::to_string(a.device)}});
  switch (a.kind) {
    case K::crash: crash_node(a.node, a.t); break;
    case K::restart: restart_node(a.node, a.t); break;
    case K::fail_device:
      if (pool_->get(a.device).online()) pool_->get(a.device).fail();
      break;
    case K::restore_device:
      if (!pool_->get(a.device).online()) pool_->get(a.device).restore(a.wipe);
      break;
    case K::partition:
      if (a.until < 0) fabric_.heal(a.nodes);
      else fabric_.cut(a.nodes);
      break;
  }
}

void Cluster::crash_node(NodeId node, VTime t) {
  if (!fabric_.node_up(node)) return;
  fabric_.set_up(node, false);
  if (node == config_.meta_node) store_->crash();
  record_failure(t, ha::SourceKind::node, node, ha::EventKind::crash);
  for (auto& [token, l] : crash_listeners_) l(node, t);
}

void Cluster::restart_node(NodeId node, VTime t) {
  if (fabric_.node_up(node)) return;
  fabric_.set_up(node, true);
  if (node == config_.meta_node) {
    IoCtx ctx{node, t};
    store_->recover(ctx);
  }
  for (auto& [token, l] : restart_listeners_) l(node, t);
}

std::uint64_t Cluster::on_crash(NodeListener listener) {
  crash_listeners_.emplace(next_listener_, std::move(listener));
  return next_listener_++;
}

std::uint64_t Cluster::on_restart(NodeListener listener) {
  restart_listeners_.emplace(next_listener_, std::move(listener));
  return next_listener_++;
}

void Cluster::remove_listener(std::uint64_t token) {
  crash_listeners_.erase(token);
  restart_listeners_.erase(token);
}

void Cluster::record_failure(VTime t, ha::SourceKind kind, std::uint64_t source, ha::EventKind event) {
  auto e = monitor_->make_event(t, kind, source, event);
  failures_.push_back(e);
  unsettled_.push_back(e);
}

void Cluster::settle(VTime t) {
  if (unsettled_.empty()) return;
  auto events = std::move(unsettled_);
  unsettled_.clear();
  if (store_->crashed()) {
    // The monitor lives with the metadata; it sees the events once back.
    unsettled_ = std::move(events);
    return;
  }
  for (const auto& e : events) monitor_->ingest(e);
  if (config_.auto_repair) {
    IoCtx ctx{config_.meta_node, t};
    monitor_->step(ctx);
  }
}

NodeId Cluster::node_of(RankId rank) const {
  if (rank >= ranks_.size()) raise(Errc::invalid_argument, "unknown rank " + std::to_string(rank));
  return ranks_[rank].node;
}

std::vector<NodeId> Cluster::nodes_with(Role role) const {
  std::vector<NodeId> out;
  for (const auto& n : config_.nodes)
    if (n.has(role)) out.push_back(n.id);
  return out;
}

std::vector<RankId> Cluster::ranks_with(Role role) const {
  std::vector<RankId> out;
  for (const auto& n : config_.nodes) {
    if (!n.has(role)) continue;
    for (const auto& r : ranks_)
      if (r.node == n.id) out.push_back(r.rank);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void Cluster::emit_net_summary(VTime t) {
  const auto& c = fabric_.counters();
  addb_.emit(t, config_.meta_node, telemetry::Subsystem::net, "bytes_sent", static_cast<double>(c.bytes_sent));
  addb_.emit(t, config_.meta_node, telemetry::Subsystem::net, "bytes_received", static_cast<double>(c.bytes_received));
  addb_.emit(t, config_.meta_node, telemetry::Subsystem::net, "bytes_dropped", static_cast<double>(c.bytes_dropped));
  addb_.emit(t, config_.meta_node, telemetry::Subsystem::net, "messages", static_cast<double>(c.messages));
}

}  // namespace sage::sim
