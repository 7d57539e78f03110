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

// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
// with its wall time and limit; the exit status is nonzero if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sage/bench/report.hpp"
#include "sage/bench/workloads.hpp"
#include "sage/common/error.hpp"
#include "sage/ha/ha.hpp"
#include "sage/hsm/hsm.hpp"
#include "sage/kv/kv_store.hpp"
#include "sage/ship/ship.hpp"
#include "sage/sim/cluster.hpp"
#include "sage/store/store.hpp"
#include "sage/stream/stream.hpp"
#include "sage/window/stream_kernels.hpp"
#include "sage/window/window.hpp"
#include "support.hpp"

using namespace sage;
using sage::testing::TempDir;

namespace {

constexpr std::uint64_t kBs = 4096;

struct Outcome {
  bool ok = true;
  std::string detail;

  // Records the first failure only; later ones are usually fallout.
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

struct Criterion {
  int number;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- 1 ----------------------------------------------------------------------

Outcome dht_arithmetic() {
  Outcome o;
  const auto c = bench::dht_capacity(8, 100'000'000, 4);
  o.expect(c.per_process == 500'000'000, "per-process capacity");
  o.expect(c.global == 4'000'000'000ull, "global capacity");
  o.expect(c.global_without_overflow == 800'000'000, "capacity without overflow");
  if (o.ok) o.detail = "global 4000e6, without overflow 800e6, per process 500e6";
  return o;
}

// --- 2 ----------------------------------------------------------------------

struct StoreRig {
  TempDir dir;
  std::unique_ptr<DevicePool> pool = testing::make_pool(dir / "dev", 5, kBs);
  LoopbackFabric fabric;
  std::unique_ptr<Store> store;
  IoCtx ctx;

  StoreRig() {
    StoreConfig c;
    c.dir = dir / "meta";
    store = std::make_unique<Store>(c, *pool, fabric);
  }
};

struct TxnModel {
  std::map<ObjectId, Bytes> objects;
  std::map<Bytes, Bytes> kv;
  bool operator==(const TxnModel&) const = default;
};

TxnModel observe(Store& store, IoCtx& ctx, const TxnModel& shape, IndexId idx) {
  TxnModel m;
  for (const auto& [id, bytes] : shape.objects) m.objects[id] = store.read(ctx, id, 0, bytes.size() / kBs);
  const auto& recs = store.kv().records(idx);
  m.kv = std::map<Bytes, Bytes>(recs.begin(), recs.end());
  return m;
}

// Fills `t` with a random batch and applies the same batch to `m`.
void random_batch(std::mt19937_64& rng, Txn& t, TxnModel& m, IndexId idx) {
  const int n = 1 + static_cast<int>(rng() % 6);
  for (int k = 0; k < n; ++k) {
    auto it = m.objects.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(rng() % m.objects.size()));
    switch (rng() % 3) {
      case 0: {
        const std::uint64_t blocks = it->second.size() / kBs;
        const std::uint64_t start = rng() % blocks;
        const std::uint64_t len = 1 + rng() % (blocks - start);
        const Bytes data = testing::random_bytes(rng, len * kBs);
        t.write(it->first, start, data);
        std::copy(data.begin(), data.end(), it->second.begin() + static_cast<std::ptrdiff_t>(start * kBs));
        break;
      }
      case 1: {
        Bytes key{static_cast<std::uint8_t>('a' + rng() % 8)};
        Bytes val = testing::random_bytes(rng, rng() % 6);
        m.kv[key] = val;
        t.put(idx, {{std::move(key), std::move(val)}});
        break;
      }
      default: {
        Bytes key{static_cast<std::uint8_t>('a' + rng() % 8)};
        m.kv.erase(key);
        t.del(idx, {std::move(key)});
      }
    }
  }
}

Outcome txn_crash_fuzz() {
  Outcome o;
  std::mt19937_64 rng(2024);
  int crashes = 0, torn = 0, applied = 0, uncut = 0, rounds = 0;
  while (crashes < 500 && o.ok) {
    ++rounds;
    StoreRig r;
    auto& store = *r.store;
    TxnModel model;
    const auto a = store.create_object(r.ctx, kBs, Layout::striped(2, 1, {0, 1, 2})).id;
    const auto b = store.create_object(r.ctx, kBs, Layout::mirrored(2, {3, 4})).id;
    model.objects[a] = Bytes(8 * kBs, 0);
    model.objects[b] = Bytes(4 * kBs, 0);
    const IndexId idx = store.create_index(r.ctx, "i");

    const int before = static_cast<int>(rng() % 4);
    for (int i = 0; i < before; ++i) {
      Txn t = store.begin();
      random_batch(rng, t, model, idx);
      store.commit(r.ctx, t);
    }

    Txn t = store.begin();
    TxnModel after = model;
    random_batch(rng, t, after, idx);
    CrashPlan plan;
    const bool tear = rng() % 2 == 0;
    // A budget past the framed batch lets the write finish: no crash, and
    // the txn must be fully there.
    if (tear) plan.log_bytes = rng() % 400;
    else plan.apply_ops = rng() % t.ops().size();
    store.set_crash_plan(plan);
    bool crashed = false;
    try {
      store.commit(r.ctx, t);
    } catch (const SimulatedCrash&) {
      crashed = true;
    }
    store.set_crash_plan({});
    o.expect(crashed || tear, "mid-apply crash did not fire in round " + std::to_string(rounds));
    if (crashed) {
      ++crashes;
      (tear ? torn : applied) += 1;
      store.recover(r.ctx);
    } else {
      ++uncut;
    }
    // A torn log write loses the txn; a crash after the log is durable keeps it.
    const bool lost = crashed && tear;
    const TxnModel want = lost ? model : after;
    o.expect(observe(store, r.ctx, model, idx) == want,
             "state after recovery is not " + std::string(lost ? "pre" : "post") + "-txn in round " +
                 std::to_string(rounds));
    model = want;

    // The recovered store keeps working and replays cleanly.
    Txn more = store.begin();
    random_batch(rng, more, model, idx);
    store.commit(r.ctx, more);
    store.crash();
    store.recover(r.ctx);
    o.expect(observe(store, r.ctx, model, idx) == model, "second recovery diverged in round " + std::to_string(rounds));
  }
  if (o.ok)
    o.detail = std::to_string(crashes) + " crash points (" + std::to_string(torn) + " torn log, " +
               std::to_string(applied) + " mid-apply) in " + std::to_string(rounds) + " rounds, " + std::to_string(uncut) +
               " uncut writes committed, all-or-nothing";
  return o;
}

// --- 3 ----------------------------------------------------------------------

Outcome parity_repair() {
  Outcome o;
  std::mt19937_64 rng(31337);
  int objects = 0;
  for (int pop = 0; pop < 200 && o.ok; ++pop) {
    TempDir dir;
    auto pool = testing::make_pool(dir / "dev", 5, kBs);
    auto spare = testing::device(5);
    spare.spare = true;
    pool->add(spare);
    LoopbackFabric fabric;
    StoreConfig sc;
    sc.dir = dir / "meta";
    Store store(sc, *pool, fabric);
    IoCtx ctx;

    std::map<ObjectId, Bytes> want;
    const int count = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < count; ++i) {
      std::vector<DeviceId> devs{0, 1, 2, 3, 4};
      std::shuffle(devs.begin(), devs.end(), rng);
      const bool wide = rng() % 2 == 0;
      devs.resize(wide ? 5 : 3);
      const auto layout = Layout::striped(wide ? 4 : 2, 1, devs);
      const std::uint64_t blocks = 1 + rng() % 12;
      const auto id = store.create_object(ctx, kBs, layout).id;
      Bytes data(blocks * kBs, 0);
      // Sparse writes leave holes that must come back as zeros.
      for (std::uint64_t blk = 0; blk < blocks; ++blk) {
        if (rng() % 4 == 0) continue;
        const Bytes d = testing::random_bytes(rng, kBs);
        store.write(ctx, id, blk, d);
        std::copy(d.begin(), d.end(), data.begin() + static_cast<std::ptrdiff_t>(blk * kBs));
      }
      want[id] = std::move(data);
    }
    objects += count;

    const DeviceId victim = static_cast<DeviceId>(rng() % 5);
    pool->get(victim).fail();
    ha::execute_repair(ctx, store, {ha::RepairProcedure::Kind::rebuild_device, victim, DeviceId{5}, {}});
    for (const auto& [id, data] : want)
      o.expect(store.read(ctx, id, 0, data.size() / kBs) == data,
               "population " + std::to_string(pop) + ": rebuilt object differs");
    o.expect(store.objects().objects_on_device(victim).empty(),
             "population " + std::to_string(pop) + ": failed device still referenced");
  }
  if (o.ok) o.detail = "200 populations, " + std::to_string(objects) + " objects bit-exact after rebuild";
  return o;
}

// --- 4 ----------------------------------------------------------------------

Outcome kv_oracle() {
  Outcome o;
  for (std::uint64_t seed = 1; seed <= 50 && o.ok; ++seed) {
    KvStore kv;
    kv.create(1, "t");
    std::map<Bytes, Bytes> model;
    std::mt19937_64 rng(seed);
    auto random_key = [&] {
      Bytes k(1 + rng() % 3);
      for (auto& c : k) c = static_cast<std::uint8_t>('a' + rng() % 5);
      return k;
    };
    for (int i = 0; i < 10'000 && o.ok; ++i) {
      const Bytes k = random_key();
      std::vector<Bytes> keys{k};
      const std::string where = "seed " + std::to_string(seed) + " op " + std::to_string(i);
      switch (rng() % 4) {
        case 0: {
          Bytes v = testing::random_bytes(rng, rng() % 6);
          std::vector<Record> rec{{k, v}};
          kv.put(1, rec);
          model[k] = std::move(v);
          break;
        }
        case 1: {
          const auto got = kv.get(1, keys)[0];
          const auto it = model.find(k);
          o.expect(got.has_value() == (it != model.end()) && (!got || *got == it->second), "get mismatch at " + where);
          break;
        }
        case 2: o.expect(kv.del(1, keys)[0] == (model.erase(k) == 1), "del mismatch at " + where); break;
        default: {
          const std::size_t n = 1 + rng() % 5;
          std::vector<Record> want;
          for (auto it = model.upper_bound(k); it != model.end() && want.size() < n; ++it)
            want.push_back({it->first, it->second});
          o.expect(kv.next(1, keys, n)[0] == want, "next mismatch at " + where);
        }
      }
    }
    // A walk from the empty key sees everything once, in order.
    std::vector<Bytes> start{Bytes{}};
    std::vector<Record> all;
    for (const auto& [k, v] : model) all.push_back({k, v});
    o.expect(kv.next(1, start, model.size() + 1)[0] == all, "full scan differs, seed " + std::to_string(seed));
  }
  if (o.ok) o.detail = "50 seeds x 1e4 ops";
  return o;
}

// --- 5 ----------------------------------------------------------------------

Outcome function_shipping() {
  Outcome o;
  TempDir dir;
  auto cluster = sim::Cluster::spawn(sim::ClusterConfig::uniform(3, 1), 7, dir.path());
  auto& store = cluster->store();
  ship::Shipper shipper(store);
  IoCtx ctx{3, 0};  // the compute node
  std::mt19937_64 rng(55);

  auto data_messages_since = [&](std::size_t from) {
    const auto& log = cluster->fabric().log();
    return std::count_if(log.begin() + static_cast<std::ptrdiff_t>(from), log.end(),
                         [](const sim::Message& m) { return carries_data(m.kind); });
  };

  std::vector<std::pair<ObjectId, Bytes>> targets;
  for (int i = 0; i < 100; ++i) {
    const TierId tier = static_cast<TierId>(1 + rng() % 2);
    std::vector<DeviceId> devs;
    for (NodeId n = 0; n < 3; ++n) devs.push_back(4 * n + static_cast<DeviceId>(tier - 1));
    Layout layout = rng() % 3 == 0   ? Layout::mirrored(2, {devs[0], devs[2]})
                    : rng() % 2 == 0 ? Layout::striped(2, 1, devs)
                                     : Layout::striped(3, 0, devs);
    const auto id = store.create_object(ctx, kBs, std::move(layout)).id;
    Bytes data = testing::random_bytes(rng, (rng() % 7) * kBs);
    if (!data.empty()) store.write(ctx, id, 0, data);
    targets.emplace_back(id, std::move(data));
  }

  const std::vector<std::pair<const char*, Bytes>> calls{{ship::kChecksum64, {}},
                                                         {ship::kSumI64, {}},
                                                         {ship::kCountMatch, Bytes{7}},
                                                         {ship::kCountMatch, Bytes(8, 0x11)},
                                                         {ship::kHistogram, ship::histogram_params(0, 256, 16)}};
  std::size_t shipped = 0;
  for (const auto& [id, data] : targets) {
    for (const auto& [name, params] : calls) {
      const auto before = cluster->fabric().log().size();
      const auto r = shipper.ship(ctx, name, params, id);
      o.expect(data_messages_since(before) == 0, std::string(name) + " moved raw data");
      o.expect(r.aggregate == shipper.fetch_and_compute(ctx, name, params, id),
               std::string(name) + " differs from fetch-then-compute");
      ++shipped;
    }
    // Plain local scans of the bytes we wrote.
    std::uint64_t sum = 0, sevens = 0;
    for (std::size_t i = 0; i + 8 <= data.size(); i += 8) sum += ByteReader(ByteView(data.data() + i, 8)).u64();
    sevens = static_cast<std::uint64_t>(std::count(data.begin(), data.end(), std::uint8_t{7}));
    o.expect(ByteReader(shipper.ship(ctx, ship::kSumI64, {}, id).aggregate).u64() == sum, "SUM_I64 vs local scan");
    o.expect(ByteReader(shipper.ship(ctx, ship::kCountMatch, Bytes{7}, id).aggregate).u64() == sevens,
             "COUNT_MATCH vs local scan");
  }

  const auto big = store.create_object(ctx, kBs, Layout::striped(2, 1, {1, 5, 9})).id;
  store.write(ctx, big, 0, testing::random_bytes(rng, 1 << 20));
  const auto sent_before = cluster->fabric().counters().bytes_sent;
  const auto log_before = cluster->fabric().log().size();
  const auto r = shipper.ship(ctx, ship::kSumI64, {}, big);
  const double ratio = static_cast<double>(r.fetch_equivalent_bytes) / static_cast<double>(r.shipped_bytes);
  o.expect(r.aggregate.size() <= 64, "1 MiB result larger than 64 B");
  o.expect(data_messages_since(log_before) == 0, "1 MiB ship moved raw data");
  o.expect(cluster->fabric().counters().bytes_sent - sent_before == r.shipped_bytes, "shipped bytes disagree with fabric");
  o.expect(ratio >= 100.0, "fetch/ship ratio " + fmt("%.1f", ratio) + " < 100");
  if (o.ok)
    o.detail = std::to_string(shipped) + " ship calls over 100 targets, 0 data messages, 1 MiB ratio " + fmt("%.0f", ratio);
  return o;
}

// --- 6 ----------------------------------------------------------------------

// Ranks 0-1 on storage nodes; ranks 2-17 on compute nodes 2 and 3.
std::unique_ptr<sim::Cluster> stream_cluster(const TempDir& dir, std::uint64_t seed) {
  auto c = sim::Cluster::spawn(sim::ClusterConfig::uniform(2, 2, 8), seed, dir.path());
  c->fabric().set_logging(false);
  return c;
}

struct Seen {
  std::vector<std::pair<RankId, stream::Particle>> items;
  std::unique_ptr<stream::Computation> sink() {
    return std::make_unique<stream::Callback>(
        [this](IoCtx&, const stream::Element& e) { items.emplace_back(e.producer, stream::decode_particle(e.bytes)); });
  }
};

stream::Particle tagged(RankId p, std::uint64_t i) {
  stream::Particle x;
  x.x = static_cast<double>(i);
  x.q = static_cast<double>(p);
  x.id = (static_cast<std::uint64_t>(p) << 32) | i;
  return x;
}

bool fifo(const Seen& s) {
  std::map<RankId, std::uint64_t> next;
  for (const auto& [p, x] : s.items) {
    const std::uint64_t i = x.id & 0xffffffffu;
    if (next.count(p) && i < next[p]) return false;
    next[p] = i + 1;
  }
  return true;
}

Outcome stream_conservation() {
  Outcome o;
  std::vector<RankId> producers;
  for (RankId r = 2; r < 17; ++r) producers.push_back(r);
  {
    TempDir dir;
    auto cluster = stream_cluster(dir, 1);
    stream::StreamDescriptor d;
    d.producers = producers;
    d.consumers = {0};
    stream::Stream s(*cluster, d);
    Seen seen;
    s.attach(0, seen.sink());
    std::mt19937_64 rng(6);
    std::map<RankId, std::uint64_t> count;
    std::vector<std::uint64_t> sent;
    VTime now = 0;
    for (int k = 0; k < 100'000; ++k) {
      const RankId p = producers[rng() % producers.size()];
      IoCtx ctx{cluster->node_of(p), now};
      const auto x = tagged(p, count[p]++);
      s.send(ctx, p, stream::encode_particle(x));
      sent.push_back(x.id);
      now = std::max(now, ctx.now) + 1e-8;
    }
    IoCtx end{cluster->node_of(0), now};
    const auto rep = s.terminate(end);
    std::vector<std::uint64_t> got;
    for (const auto& [p, x] : seen.items) got.push_back(x.id);
    std::sort(sent.begin(), sent.end());
    std::sort(got.begin(), got.end());
    o.expect(got == sent, "delivered multiset differs from sent");
    o.expect(rep.total == 100'000, "report total " + std::to_string(rep.total));
    o.expect(fifo(seen), "per-producer order violated");
    o.expect(rep.peak_buffered <= d.channel_capacity, "channel over capacity");
  }

  int fuzz = 0;
  std::uint64_t lost = 0;
  for (std::uint64_t seed = 1; seed <= 30 && o.ok; ++seed) {
    TempDir dir;
    auto cluster = stream_cluster(dir, seed);
    stream::StreamDescriptor d;
    d.producers = producers;
    d.consumers = {0};
    d.batch_elements = 1 + static_cast<std::uint32_t>(seed % 40);
    stream::Stream s(*cluster, d);
    Seen seen;
    s.attach(0, seen.sink());
    std::mt19937_64 rng(seed * 977);
    const int n = 5000;
    const int crash_at = static_cast<int>(rng() % n);
    const NodeId victim = 2 + static_cast<NodeId>(rng() % 2);
    std::map<RankId, std::uint64_t> count;
    VTime now = 0;
    std::uint64_t total = 0;
    for (int k = 0; k < n; ++k) {
      if (k == crash_at) cluster->crash_node(victim, now);
      const RankId p = producers[rng() % producers.size()];
      IoCtx ctx{cluster->node_of(p), now};
      if (!cluster->node_up(ctx.node)) continue;
      s.send(ctx, p, stream::encode_particle(tagged(p, count[p]++)));
      ++total;
      now = std::max(now, ctx.now) + 1e-8;
    }
    IoCtx end{cluster->node_of(0), now};
    const auto rep = s.terminate(end);
    std::set<std::uint64_t> delivered, acked;
    bool dup = false;
    for (const auto& [p, x] : seen.items) dup = !delivered.insert(x.id).second || dup;
    for (RankId p : producers)
      for (auto seq : s.acked(p)) acked.insert(tagged(p, seq).id);
    const std::string where = "crash seed " + std::to_string(seed);
    o.expect(!dup, where + ": duplicate delivery");
    o.expect(delivered == acked, where + ": delivered differs from acknowledged");
    o.expect(rep.total + rep.lost_unacked == total, where + ": elements unaccounted for");
    o.expect(fifo(seen), where + ": order violated");
    lost += rep.lost_unacked;
    ++fuzz;
  }
  if (o.ok)
    o.detail = "1e5 elements 15->1 exactly once in order; " + std::to_string(fuzz) + " crash runs, 0 duplicates, " +
               std::to_string(lost) + " unacked lost";
  return o;
}

// --- 7 ----------------------------------------------------------------------

Outcome window_model() {
  Outcome o;
  using window::Backing;
  {
    TempDir dir;
    auto cluster = sim::Cluster::spawn(sim::ClusterConfig::uniform(3, 1, 2), 3, dir.path());
    cluster->fabric().set_logging(false);
    window::Windows windows(*cluster);
    IoCtx ctx{0, 0};
    std::mt19937_64 rng(70);
    const std::uint64_t size = 9 * window::kPageBytes + 77;
    const auto w = windows.alloc(ctx, 1, size, {Backing::storage, std::nullopt, std::nullopt});
    Bytes model(size, 0);
    for (int i = 0; i < 10'000 && o.ok; ++i) {
      IoCtx at{cluster->node_of(static_cast<RankId>(rng() % 5)), ctx.now};
      const std::uint64_t off = rng() % size;
      const std::uint64_t len = rng() % std::min<std::uint64_t>(size - off + 1, 2 * window::kPageBytes);
      switch (rng() % 5) {
        case 0:
        case 1: {
          const Bytes d = testing::random_bytes(rng, len);
          windows.put(at, w, off, d);
          std::copy(d.begin(), d.end(), model.begin() + static_cast<std::ptrdiff_t>(off));
          break;
        }
        case 2:
        case 3:
          o.expect(windows.get(at, w, off, len) == Bytes(model.begin() + static_cast<std::ptrdiff_t>(off),
                                                         model.begin() + static_cast<std::ptrdiff_t>(off + len)),
                   "get differs from byte array at op " + std::to_string(i));
          break;
        default: windows.sync(at, w);
      }
      ctx.now = std::max(ctx.now, at.now);
    }
    o.expect(windows.get(ctx, w, 0, size) == model, "final contents differ");
  }

  int runs = 0;
  for (std::uint64_t seed = 1; seed <= 100 && o.ok; ++seed) {
    TempDir dir;
    auto cluster = sim::Cluster::spawn(sim::ClusterConfig::uniform(3, 1, 2), seed, dir.path());
    cluster->fabric().set_logging(false);
    window::Windows windows(*cluster);
    std::mt19937_64 rng(seed * 31);
    const RankId owner = static_cast<RankId>(rng() % 3);  // a storage rank
    IoCtx ctx{cluster->node_of(owner), 0};
    const std::uint64_t size = (1 + rng() % 5) * window::kPageBytes + rng() % 1000;
    const auto w = windows.alloc(ctx, owner, size, {Backing::storage, std::nullopt, std::nullopt});
    Bytes model(size, 0), durable(size, 0);
    std::vector<bool> dirty(size, false);
    const int ops = 1 + static_cast<int>(rng() % 60);
    for (int i = 0; i < ops; ++i) {
      if (rng() % 4 == 0) {
        windows.sync(ctx, w);
        durable = model;
        std::fill(dirty.begin(), dirty.end(), false);
        continue;
      }
      const std::uint64_t off = rng() % size;
      const std::uint64_t len = rng() % std::min<std::uint64_t>(size - off + 1, window::kPageBytes);
      const Bytes d = testing::random_bytes(rng, len);
      windows.put(ctx, w, off, d);
      for (std::uint64_t k = 0; k < len; ++k) {
        model[off + k] = d[k];
        dirty[off + k] = true;
      }
    }
    for (const auto& n : cluster->config().nodes) cluster->crash_node(n.id, ctx.now);
    for (const auto& n : cluster->config().nodes) cluster->restart_node(n.id, ctx.now + 1);
    IoCtx after{ctx.node, ctx.now + 1};
    o.expect(windows.exists(w), "crash run " + std::to_string(seed) + ": window gone");
    if (!o.ok) break;
    const Bytes got = windows.get(after, w, 0, size);
    // Synced bytes must be back exactly; bytes written since may hold either value.
    for (std::uint64_t k = 0; k < size && o.ok; ++k)
      o.expect(got[k] == durable[k] || (dirty[k] && got[k] == model[k]),
               "crash run " + std::to_string(seed) + ": byte " + std::to_string(k) + " lost");
    ++runs;
  }
  if (o.ok) o.detail = "1e4 ops match byte array; " + std::to_string(runs) + "/100 crash runs keep synced data";
  return o;
}

// --- 8 ----------------------------------------------------------------------

Outcome stream_kernels() {
  Outcome o;
  constexpr std::uint64_t n = 1'000'000;
  constexpr double q = 3.0;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> a0(n), b0(n), c0(n);
  for (auto* v : {&a0, &b0, &c0})
    for (auto& x : *v) x = u(rng);
  std::vector<double> ea = a0, eb = b0, ec = c0;
  for (std::size_t i = 0; i < n; ++i) ec[i] = ea[i];
  for (std::size_t i = 0; i < n; ++i) eb[i] = q * ec[i];
  for (std::size_t i = 0; i < n; ++i) ec[i] = ea[i] + eb[i];
  for (std::size_t i = 0; i < n; ++i) ea[i] = eb[i] + q * ec[i];

  std::array<std::array<double, 4>, 2> bw{};
  for (auto backing : {window::Backing::memory, window::Backing::storage}) {
    TempDir dir;
    auto cluster = sim::Cluster::spawn(sim::ClusterConfig::uniform(1, 0), 8, dir.path());
    cluster->fabric().set_logging(false);
    window::Windows windows(*cluster);
    IoCtx ctx{0, 0};
    const window::WindowOptions opt{backing, std::nullopt, std::nullopt};
    const auto a = windows.alloc(ctx, 0, n * 8, opt), b = windows.alloc(ctx, 0, n * 8, opt),
               c = windows.alloc(ctx, 0, n * 8, opt);
    window::write_doubles(ctx, windows, a, a0);
    window::write_doubles(ctx, windows, b, b0);
    window::write_doubles(ctx, windows, c, c0);
    const auto r = window::run_stream(ctx, windows, a, b, c, q, n, 8192);
    const std::string which = backing == window::Backing::memory ? "memory" : "storage";
    o.expect(window::read_doubles(ctx, windows, a, n) == ea, which + ": a differs");
    o.expect(window::read_doubles(ctx, windows, b, n) == eb, which + ": b differs");
    o.expect(window::read_doubles(ctx, windows, c, n) == ec, which + ": c differs");
    for (std::size_t k = 0; k < 4; ++k) bw[backing == window::Backing::memory ? 0 : 1][k] = r.kernels[k].bandwidth;
  }
  const char* names[4] = {"copy", "scale", "add", "triad"};
  std::string detail = "exact at N=1e6;";
  for (std::size_t k = 0; k < 4; ++k) {
    o.expect(bw[0][k] > 0 && bw[1][k] <= bw[0][k], std::string(names[k]) + ": storage faster than memory");
    detail += std::string(" ") + names[k] + " " + fmt("%.2f", bw[1][k] / bw[0][k]);
  }
  if (o.ok) o.detail = detail + " (storage/memory bandwidth)";
  return o;
}

// --- 9, 10, 12 --------------------------------------------------------------

bench::WorkloadConfig defaults(const std::string& workload) {
  bench::WorkloadConfig c;
  c.workload = workload;
  c.cluster.seed = c.seed;
  return c;
}

double metric(const bench::RunReport& r, const std::string& name, const telemetry::Tags& params, bool& found) {
  for (const auto& m : r.metrics)
    if (m.name == name && m.params == params) {
      found = true;
      return m.value;
    }
  found = false;
  return 0;
}

Outcome offload_trend() {
  Outcome o;
  TempDir dir;
  const auto c = defaults("offload");
  const auto res = bench::run_offload(c, dir.path());
  const auto rep = bench::make_report(res.addb);
  o.expect(res.verified, "offload or baseline lost particles");
  std::string detail = "improvement";
  double prev = 0;
  for (auto S : c.offload.sim_ranks) {
    const auto consumers = std::max<std::uint32_t>(1, S / c.offload.ratio);
    bool found = false;
    const double v =
        metric(rep, "improvement", {{"sim_ranks", std::to_string(S)}, {"consumers", std::to_string(consumers)}}, found);
    o.expect(found, "no improvement record for S=" + std::to_string(S));
    o.expect(v >= prev, "improvement drops at S=" + std::to_string(S));
    detail += " S=" + std::to_string(S) + ":" + fmt("%.3f", v);
    prev = v;
  }
  if (o.ok) o.detail = detail + " (non-decreasing)";
  else o.detail += "; " + detail;
  return o;
}

Outcome checkpoint_restart() {
  Outcome o;
  TempDir dir;
  const auto c = defaults("checkpoint");
  const auto res = bench::run_checkpoint(c, dir.path());
  const auto rep = bench::make_report(res.addb);
  std::string detail = "M=1e5 bit-exact; baseline/windows time";
  for (auto P : c.checkpoint.processes) {
    const std::string ps = std::to_string(P);
    for (const char* mode : {"windows", "baseline"}) {
      bool found = false;
      const double bad = metric(rep, "mismatched_particles", {{"mode", mode}, {"processes", ps}}, found);
      o.expect(found && bad == 0, std::string(mode) + " P=" + ps + ": " + fmt("%.0f", bad) + " particles differ");
    }
    bool found = false;
    const double ratio = metric(rep, "ratio", {{"processes", ps}}, found);
    o.expect(found, "no ratio for P=" + ps);
    detail += " P=" + ps + ":" + fmt("%.2f", ratio);
  }
  o.expect(res.verified, "checkpoint run not verified");
  if (o.ok) o.detail = detail;
  return o;
}

Outcome determinism() {
  Outcome o;
  std::string detail;
  for (const auto& w : bench::workload_names()) {
    std::string text[2];
    for (auto& t : text) {
      TempDir dir;
      std::ostringstream out;
      bench::run_workload(defaults(w), dir.path()).addb.export_tsv(out);
      t = out.str();
    }
    o.expect(!text[0].empty() && text[0] == text[1], w + ": exports differ between runs");
    detail += (detail.empty() ? "" : ", ") + w + " " + std::to_string(std::count(text[0].begin(), text[0].end(), '\n')) +
              " records";
  }
  if (o.ok) o.detail = "identical exports: " + detail;
  return o;
}

// --- 11 ---------------------------------------------------------------------

Outcome hsm_convergence() {
  Outcome o;
  int max_passes = 0;
  for (std::uint64_t seed = 1; seed <= 10 && o.ok; ++seed) {
    TempDir dir;
    auto pool = std::make_unique<DevicePool>(dir / "dev", kBs);
    // Devices 0-2 tier 1 .. 9-11 tier 4.
    for (DeviceId d = 0; d < 12; ++d) {
      const TierId tier = static_cast<TierId>(1 + d / 3);
      pool->add(testing::device(d, tier, 0, tier == 1 ? 1ull << 20 : 8ull << 20));
    }
    LoopbackFabric fabric;
    telemetry::Addb addb;
    StoreConfig sc;
    sc.dir = dir / "meta";
    Store store(sc, *pool, fabric, &addb);
    hsm::HsmPolicy policy;
    policy.promote_rate = 0.5;
    policy.demote_idle = 30;
    hsm::HsmEngine engine(store, policy);
    engine.subscribe(addb);
    IoCtx ctx;
    std::mt19937_64 rng(seed);

    // 20 objects, a fifth of them hot; start hot below tier 1 and cold above tier 4.
    constexpr int kObjects = 20, kHot = 4;
    std::vector<ObjectId> ids;
    std::vector<Bytes> data;
    for (int i = 0; i < kObjects; ++i) {
      const bool hot = i < kHot;
      const TierId tier = static_cast<TierId>(hot ? 2 + rng() % 3 : 1 + rng() % 3);
      const DeviceId base = static_cast<DeviceId>((tier - 1) * 3);
      const auto id = store.create_object(ctx, kBs, Layout::striped(2, 0, {base, static_cast<DeviceId>(base + 1 + rng() % 2)})).id;
      data.push_back(testing::random_bytes(rng, 2 * kBs));
      store.write(ctx, id, 0, data.back());
      ids.push_back(id);
    }
    // 80% of 1000 reads over 100 s land on the hot fifth.
    for (int k = 0; k < 1000; ++k) {
      ctx.now = 0.1 * k;
      const std::size_t i = rng() % 10 < 8 ? rng() % kHot : kHot + rng() % (kObjects - kHot);
      store.read(ctx, ids[i], 0, 1);
    }
    ctx.now = 100 + 2 * policy.demote_idle;

    auto safe = [&] {
      for (const auto& [tier, occ] : engine.occupancy())
        if (static_cast<double>(occ.used_bytes) > policy.marks(tier).high * static_cast<double>(occ.capacity_bytes))
          return false;
      return true;
    };
    int passes = 0;
    while (passes < 10 && !engine.run_pass(ctx).empty()) {
      ++passes;
      o.expect(safe(), "seed " + std::to_string(seed) + ": watermark exceeded");
    }
    max_passes = std::max(max_passes, passes);
    o.expect(passes <= 4, "seed " + std::to_string(seed) + ": " + std::to_string(passes) + " passes");
    for (int i = 0; i < kObjects; ++i) {
      const TierId want = i < kHot ? 1 : 4;
      const auto devs = devices_of(store.meta(ids[i]).layout);
      o.expect(pool->get(devs.front()).tier() == want,
               "seed " + std::to_string(seed) + ": object " + std::to_string(i) + " not on tier " + std::to_string(want));
    }
    for (int i = 0; i < kObjects; ++i)
      o.expect(store.read(ctx, ids[i], 0, 2) == data[static_cast<std::size_t>(i)], "migrated bytes differ");
  }
  if (o.ok) o.detail = "10 traces converge in <= " + std::to_string(max_passes) + " passes, data intact, watermarks held";
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "dht capacity arithmetic", 1, dht_arithmetic},
      {2, "txn crash atomicity", 60, txn_crash_fuzz},
      {3, "parity repair", 60, parity_repair},
      {4, "kv ordered-map equivalence", 30, kv_oracle},
      {5, "function shipping", 30, function_shipping},
      {6, "stream conservation", 30, stream_conservation},
      {7, "storage window model", 60, window_model},
      {8, "stream kernels", 30, stream_kernels},
      {9, "offload trend", 120, offload_trend},
      {10, "checkpoint restart", 60, checkpoint_restart},
      {11, "hsm convergence", 30, hsm_convergence},
      {12, "determinism", 60, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.ok && secs >= c.limit_s) {
      o.ok = false;
      o.detail = "over time limit; " + o.detail;
    }
    failed += o.ok ? 0 : 1;
    std::printf("%s %2d %-28s %7.2fs / %3.0fs  %s\n", o.ok ? "PASS" : "FAIL", c.number, c.name, secs, c.limit_s,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
