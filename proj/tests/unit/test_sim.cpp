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

#include <cmath>
#include <random>

#include "doctest.h"
#include "sage/common/error.hpp"
#include "sage/sim/cluster.hpp"
#include "support.hpp"

using namespace sage;
using namespace sage::sim;
using sage::testing::TempDir;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::invalid_argument;
}

// Tier-2 device on each of the three storage nodes.
Layout spread() { return Layout::striped(2, 1, {1, 5, 9}); }

std::uint64_t small_workload(Cluster& c) {
  IoCtx ctx{3, 0};
  for (int i = 0; i < 5; ++i) {
    auto meta = c.store().create_object(ctx, 4096, spread());
    const auto blocks = 1 + c.rng()() % 6;
    c.store().write(ctx, meta.id, 0, testing::random_bytes(c.rng(), blocks * 4096));
    (void)c.store().read(ctx, meta.id, 0, blocks);
  }
  return c.trace_hash() ^ c.fabric().log_hash();
}

}  // namespace

TEST_CASE("link cost is latency plus serialization") {
  TempDir dir;
  auto cfg = ClusterConfig::uniform(1, 1);
  cfg.network = {10e-6, 1e9};
  auto c = Cluster::spawn(cfg, 1, dir.path());
  const VTime t = c->fabric().transfer(1, 0, 1'000'000, MsgKind::data_write, 0);
  CHECK(t == doctest::Approx(10e-6 + (1'000'000 + kEnvelopeBytes) / 1e9).epsilon(1e-12));
  CHECK(t == doctest::Approx(1.01e-3).epsilon(1e-3));
}

TEST_CASE("a second message to the same node queues behind the first") {
  TempDir dir;
  auto cfg = ClusterConfig::uniform(1, 2);
  auto c = Cluster::spawn(cfg, 1, dir.path());
  const VTime a = c->fabric().transfer(1, 0, 1'000'000, MsgKind::data_write, 0);
  const VTime b = c->fabric().transfer(2, 0, 1'000'000, MsgKind::data_write, 0);
  CHECK(b == doctest::Approx(a + (1'000'000 + kEnvelopeBytes) / 1e9));
}

TEST_CASE("storage node without devices is rejected") {
  nlohmann::json j = {{"nodes", {{{"id", 0}, {"roles", {"storage"}}}}}};
  CHECK(code_of([&] { ClusterConfig::from_json(j); }) == Errc::bad_config);
  nlohmann::json bad_role = {{"nodes", {{{"id", 0}, {"roles", {"router"}}}}}};
  CHECK(code_of([&] { ClusterConfig::from_json(bad_role); }) == Errc::bad_config);
}

TEST_CASE("config json round trip") {
  auto cfg = ClusterConfig::uniform(2, 3, 4);
  cfg.links[{0, 1}] = {1e-3, 5e8};
  FaultAction p;
  p.kind = FaultAction::Kind::partition;
  p.t = 1;
  p.until = 2;
  p.nodes = {1};
  cfg.faults.actions.push_back(p);
  auto back = ClusterConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.nodes.size() == 5);
  CHECK(back.nodes[4].ranks == 4);
}

TEST_CASE("single node cluster loops back for free") {
  TempDir dir;
  auto c = Cluster::spawn(ClusterConfig::uniform(1, 0), 1, dir.path());
  IoCtx ctx{0, 0};
  auto meta = c->store().create_object(ctx, 4096, Layout::striped(1, 0, {1}));
  c->store().write(ctx, meta.id, 0, testing::filled(4096, 7));
  CHECK(c->fabric().log().empty());
  CHECK(c->fabric().counters().bytes_sent == 0);
  CHECK(c->fabric().transfer(0, 0, 1 << 20, MsgKind::data_read, 5) == 5);
}

TEST_CASE("partition drops messages until it heals") {
  TempDir dir;
  auto cfg = ClusterConfig::uniform(2, 1);
  FaultAction p;
  p.kind = FaultAction::Kind::partition;
  p.t = 10;
  p.until = 20;
  p.nodes = {1};
  cfg.faults.actions.push_back(p);
  auto c = Cluster::spawn(cfg, 1, dir.path());
  c->advance(10);
  CHECK_FALSE(c->fabric().reachable(2, 1));
  CHECK(c->fabric().reachable(2, 0));
  CHECK(code_of([&] { c->fabric().rpc(2, 1, 100, 8, MsgKind::control, 10); }) == Errc::partitioned);
  REQUIRE(c->failure_events().size() == 1);
  CHECK(c->failure_events()[0].kind == ha::EventKind::timeout);
  CHECK(c->failure_events()[0].source == 1);
  CHECK(c->fabric().counters().bytes_dropped == 100 + kEnvelopeBytes);
  c->advance(20);
  CHECK(c->fabric().rpc(2, 1, 100, 8, MsgKind::control, 20) > 20);
}

TEST_CASE("byte counters equal a tally of the message log") {
  TempDir dir;
  auto cfg = ClusterConfig::uniform(3, 1);
  FaultAction p;
  p.kind = FaultAction::Kind::partition;
  p.t = 0.5;
  p.until = 0.6;
  p.nodes = {2};
  cfg.faults.actions.push_back(p);
  auto c = Cluster::spawn(cfg, 4, dir.path());
  std::mt19937_64 rng(4);
  for (int i = 0; i < 300; ++i) {
    const NodeId a = static_cast<NodeId>(rng() % 4), b = static_cast<NodeId>(rng() % 4);
    c->advance(i / 300.0);
    try {
      c->fabric().transfer(a, b, rng() % 5000, MsgKind::control, c->now());
    } catch (const Error& e) {
      CHECK(e.code() == Errc::partitioned);
    }
  }
  std::uint64_t sent = 0, received = 0, dropped = 0;
  for (const auto& m : c->fabric().log()) {
    sent += m.bytes;
    (m.dropped ? dropped : received) += m.bytes;
  }
  const auto& k = c->fabric().counters();
  CHECK(k.bytes_sent == sent);
  CHECK(k.bytes_received == received);
  CHECK(k.bytes_dropped == dropped);
  CHECK(dropped > 0);
  CHECK(k.bytes_sent == k.bytes_received + k.bytes_dropped);
}

TEST_CASE("metadata node crash and restart keeps committed state") {
  TempDir dir;
  auto cfg = ClusterConfig::uniform(3, 1);
  FaultAction crash, restart;
  crash.kind = FaultAction::Kind::crash;
  crash.t = 5;
  crash.node = 0;
  restart.kind = FaultAction::Kind::restart;
  restart.t = 6;
  restart.node = 0;
  cfg.faults.actions = {crash, restart};
  auto c = Cluster::spawn(cfg, 2, dir.path());
  IoCtx ctx{3, 0};
  auto meta = c->store().create_object(ctx, 4096, spread());
  c->store().write(ctx, meta.id, 0, testing::filled(3 * 4096, 0x42));
  const auto hash = c->store().state_hash();
  c->advance(5);
  CHECK(c->store().crashed());
  CHECK(code_of([&] { c->store().read(ctx, meta.id, 0, 1); }) == Errc::node_down);
  c->advance(6);
  CHECK_FALSE(c->store().crashed());
  CHECK(c->store().state_hash() == hash);
  CHECK(c->store().read(ctx, meta.id, 0, 3) == testing::filled(3 * 4096, 0x42));
}

TEST_CASE("no faults, no failure events") {
  TempDir dir;
  auto c = Cluster::spawn(ClusterConfig::uniform(3, 1), 3, dir.path());
  small_workload(*c);
  c->advance(1000);
  CHECK(c->failure_events().empty());
}

TEST_CASE("same config and seed give the same trace") {
  TempDir a, b, d;
  auto cfg = ClusterConfig::uniform(3, 1);
  auto c1 = Cluster::spawn(cfg, 9, a.path());
  auto c2 = Cluster::spawn(cfg, 9, b.path());
  auto c3 = Cluster::spawn(cfg, 10, d.path());
  const auto h1 = small_workload(*c1);
  CHECK(h1 == small_workload(*c2));
  CHECK(h1 != small_workload(*c3));
}

TEST_CASE("scheduled device failure is repaired onto the spare") {
  TempDir dir;
  auto cfg = ClusterConfig::uniform(3, 1);
  FaultAction f;
  f.kind = FaultAction::Kind::fail_device;
  f.t = 3;
  f.device = 5;
  cfg.faults.actions.push_back(f);
  auto c = Cluster::spawn(cfg, 5, dir.path());
  IoCtx ctx{3, 0};
  auto meta = c->store().create_object(ctx, 4096, spread());
  const auto data = testing::random_bytes(c->rng(), 8 * 4096);
  c->store().write(ctx, meta.id, 0, data);
  c->advance(3);
  CHECK(c->monitor().handled().count(5) == 1);
  CHECK(c->store().meta(meta.id).layout == Layout::striped(2, 1, {1, 12, 9}));
  CHECK(c->store().read(ctx, meta.id, 0, 8) == data);
}

TEST_CASE("ranks are numbered in node order") {
  TempDir dir;
  auto c = Cluster::spawn(ClusterConfig::uniform(2, 2, 3), 1, dir.path());
  CHECK(c->ranks().size() == 2 + 6);
  CHECK(c->node_of(0) == 0);
  CHECK(c->node_of(2) == 2);
  CHECK(c->node_of(7) == 3);
  CHECK(c->ranks_with(Role::storage) == std::vector<RankId>{0, 1});
  CHECK(c->nodes_with(Role::compute).size() == 4);
}
