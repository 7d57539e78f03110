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

#include <map>
#include <random>

#include "doctest.h"
#include "sage/common/error.hpp"
#include "sage/store/store.hpp"
#include "support.hpp"

using namespace sage;
using sage::testing::TempDir;

namespace {

constexpr std::uint64_t kBs = 4096;

struct Fixture {
  TempDir dir;
  std::unique_ptr<DevicePool> pool = testing::make_pool(dir / "dev", 4);
  LoopbackFabric fabric;
  std::unique_ptr<Store> store = open();
  IoCtx ctx;

  std::unique_ptr<Store> open(std::uint64_t cap = 64ull << 20) {
    StoreConfig c;
    c.dir = dir / "meta";
    c.log_cap_bytes = cap;
    return std::make_unique<Store>(c, *pool, fabric);
  }
};

Bytes b(std::string_view s) { return {s.begin(), s.end()}; }

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::invalid_argument;
}

}  // namespace

TEST_CASE("txn ids increase and abort has no effect") {
  Fixture f;
  Txn a = f.store->begin();
  Txn b2 = f.store->begin();
  CHECK(b2.id() > a.id());
  const auto h = f.store->state_hash();
  IndexId idx = f.store->create_index(f.ctx, "i");
  Txn t = f.store->begin();
  t.put(idx, {{b("k"), b("v")}});
  f.store->abort(t);
  std::vector<Bytes> keys{b("k")};
  CHECK_FALSE(f.store->get(f.ctx, idx, keys)[0].has_value());
  CHECK(code_of([&] { f.store->commit(f.ctx, t); }) == Errc::invalid_state);
  Txn empty = f.store->begin();
  f.store->commit(f.ctx, empty);
  CHECK(h != f.store->state_hash());
}

TEST_CASE("object metadata lands in the system index") {
  Fixture f;
  auto m = f.store->create_object(f.ctx, kBs, Layout::striped(2, 1, {0, 1, 2}));
  CHECK(m.size_blocks == 0);
  std::vector<Bytes> keys{object_key(m.id)};
  auto rec = f.store->get(f.ctx, kObjectsIndex, keys)[0];
  REQUIRE(rec.has_value());
  ByteReader r(*rec);
  CHECK(decode_meta(r).id == m.id);
  CHECK(code_of([&] { f.store->create_object(f.ctx, 3000, Layout::striped(1, 0, {0})); }) == Errc::invalid_layout);
  CHECK(code_of([&] { f.store->create_object(f.ctx, kBs, Layout::striped(1, 0, {0}), m.id); }) ==
        Errc::already_exists);
  f.store->delete_object(f.ctx, m.id);
  // deleted ids are never handed out again
  CHECK(code_of([&] { f.store->create_object(f.ctx, kBs, Layout::striped(1, 0, {0}), m.id); }) ==
        Errc::already_exists);
}

TEST_CASE("crash before commit is durable loses the txn") {
  Fixture f;
  auto m = f.store->create_object(f.ctx, kBs, Layout::striped(2, 0, {0, 1}));
  const auto h = f.store->state_hash();
  Txn t = f.store->begin();
  for (int i = 0; i < 3; ++i) t.write(m.id, i, Bytes(kBs, static_cast<std::uint8_t>(i + 1)));
  f.store->set_crash_plan({.log_bytes = 100, .apply_ops = std::nullopt});
  CHECK_THROWS_AS(f.store->commit(f.ctx, t), SimulatedCrash);
  CHECK(f.store->crashed());
  f.store->set_crash_plan({});
  f.store->recover(f.ctx);
  CHECK(f.store->state_hash() == h);
  CHECK(f.store->read(f.ctx, m.id, 0, 3) == Bytes(3 * kBs, 0));
}

TEST_CASE("crash after durable commit replays everything") {
  Fixture f;
  auto m = f.store->create_object(f.ctx, kBs, Layout::striped(2, 0, {0, 1}));
  Txn t = f.store->begin();
  Bytes want;
  for (int i = 0; i < 3; ++i) {
    Bytes blk(kBs, static_cast<std::uint8_t>(i + 1));
    t.write(m.id, i, blk);
    want.insert(want.end(), blk.begin(), blk.end());
  }
  f.store->set_crash_plan({.log_bytes = std::nullopt, .apply_ops = 1});
  CHECK_THROWS_AS(f.store->commit(f.ctx, t), SimulatedCrash);
  f.store->set_crash_plan({});
  f.store->recover(f.ctx);
  CHECK(f.store->read(f.ctx, m.id, 0, 3) == want);
  const auto h = f.store->state_hash();
  f.store->recover(f.ctx);
  CHECK(f.store->state_hash() == h);
}

TEST_CASE("torn tail is truncated and earlier txns survive") {
  Fixture f;
  IndexId idx = f.store->create_index(f.ctx, "i");
  f.store->put(f.ctx, idx, {{b("a"), b("1")}});
  const auto h = f.store->state_hash();
  const auto good = f.store->log_bytes();
  {
    std::FILE* fp = std::fopen((f.dir / "meta" / "txn.log").c_str(), "ab");
    const char junk[] = "\x20\x00\x00\x00\x00\x00\x00\x00garbagegarbage";
    std::fwrite(junk, 1, sizeof junk, fp);
    std::fclose(fp);
  }
  f.store = nullptr;
  f.store = f.open();
  CHECK(f.store->state_hash() == h);
  CHECK(f.store->log_bytes() == good);
}

TEST_CASE("ops of a txn torn before its commit record never come back") {
  // Every cut point inside the batch, including those between op frames.
  for (std::uint64_t budget = 0;; ++budget) {
    CAPTURE(budget);
    Fixture f;
    IndexId idx = f.store->create_index(f.ctx, "i");
    const auto clean = f.store->log_bytes();
    Txn t = f.store->begin();
    t.put(idx, {{b("lost"), b("1")}});
    t.put(idx, {{b("lost2"), b("2")}});
    CrashPlan plan;
    plan.log_bytes = budget;
    f.store->set_crash_plan(plan);
    try {
      f.store->commit(f.ctx, t);
      break;  // the whole batch fit
    } catch (const SimulatedCrash&) {
    }
    f.store->set_crash_plan({});
    f.store->recover(f.ctx);
    CHECK(f.store->log_bytes() == clean);

    // The next txn may reuse the lost id; it must not adopt the stray ops.
    f.store->put(f.ctx, idx, {{b("kept"), b("3")}});
    f.store->crash();
    f.store->recover(f.ctx);
    const auto& recs = f.store->kv().records(idx);
    REQUIRE(std::map<Bytes, Bytes>(recs.begin(), recs.end()) == std::map<Bytes, Bytes>{{b("kept"), b("3")}});
  }
}

TEST_CASE("checkpoint keeps state and bounds the log") {
  Fixture f;
  f.store = f.open(64 * 1024);
  auto m = f.store->create_object(f.ctx, kBs, Layout::striped(2, 1, {0, 1, 2}));
  std::mt19937_64 rng(2);
  for (int i = 0; i < 40; ++i) f.store->write(f.ctx, m.id, rng() % 16, testing::random_bytes(rng, kBs));
  CHECK(f.store->stats().checkpoints > 0);
  CHECK(f.store->log_bytes() < 64 * 1024 + 2 * kBs);
  const auto h = f.store->state_hash();
  f.store->crash();
  f.store->recover(f.ctx);
  CHECK(f.store->state_hash() == h);
  f.store = nullptr;
  f.store = f.open(64 * 1024);
  CHECK(f.store->state_hash() == h);
}

TEST_CASE("validation rejects bad ops without side effects") {
  Fixture f;
  auto m = f.store->create_object(f.ctx, kBs, Layout::striped(2, 0, {0, 1}));
  Txn t = f.store->begin();
  t.write(m.id, 0, Bytes(kBs, 1));
  t.put(999, {{b("k"), b("v")}});
  CHECK(code_of([&] { f.store->commit(f.ctx, t); }) == Errc::unknown_index);
  CHECK(f.store->read(f.ctx, m.id, 0, 1) == Bytes(kBs, 0));
  f.pool->get(0).fail();
  CHECK(code_of([&] { f.store->write(f.ctx, m.id, 0, Bytes(kBs, 1)); }) == Errc::device_failed);
}

TEST_CASE("containers through txns") {
  Fixture f;
  auto m = f.store->create_object(f.ctx, kBs, Layout::striped(1, 0, {0}));
  auto c = f.store->create_container(f.ctx, "hot", 1);
  f.store->add_member(f.ctx, c, m.id);
  f.store->add_member(f.ctx, c, m.id);
  CHECK(f.store->list_members(c) == std::vector<ObjectId>{m.id});
  CHECK(code_of([&] { f.store->remove_member(f.ctx, c, ObjectId{1, 1}); }) == Errc::unknown_object);
  f.store->delete_object(f.ctx, m.id);
  CHECK(f.store->list_members(c).empty());
}

TEST_CASE("crash fuzzing is all or nothing") {
  // model: object contents and index contents after committed txns only
  std::mt19937_64 rng(77);
  for (int round = 0; round < 40; ++round) {
    Fixture f;
    auto m = f.store->create_object(f.ctx, kBs, Layout::striped(2, 1, {0, 1, 2}));
    IndexId idx = f.store->create_index(f.ctx, "i");
    Bytes model_obj(8 * kBs, 0);
    std::map<Bytes, Bytes> model_kv;
    bool crashed = false;
    for (int step = 0; step < 6 && !crashed; ++step) {
      Txn t = f.store->begin();
      Bytes obj = model_obj;
      auto kv = model_kv;
      for (int k = 0; k < 3; ++k) {
        const std::uint64_t blk = rng() % 8;
        Bytes data = testing::random_bytes(rng, kBs);
        t.write(m.id, blk, data);
        std::copy(data.begin(), data.end(), obj.begin() + blk * kBs);
        Bytes key{static_cast<std::uint8_t>('a' + rng() % 5)};
        Bytes val = testing::random_bytes(rng, 3);
        t.put(idx, {{key, val}});
        kv[key] = val;
      }
      if (rng() % 3 == 0) {
        CrashPlan plan;
        if (rng() % 2) plan.log_bytes = rng() % 40000;
        else plan.apply_ops = rng() % 6;
        f.store->set_crash_plan(plan);
      }
      try {
        f.store->commit(f.ctx, t);
        model_obj = obj;
        model_kv = kv;
      } catch (const SimulatedCrash&) {
        crashed = true;
        f.store->set_crash_plan({});
        f.store->recover(f.ctx);
        // the txn is in or out as a whole
        Bytes now = f.store->read(f.ctx, m.id, 0, 8);
        if (now == obj) {
          model_obj = obj;
          model_kv = kv;
        }
      }
      f.store->set_crash_plan({});
    }
    f.store->crash();
    f.store->recover(f.ctx);
    CHECK(f.store->read(f.ctx, m.id, 0, 8) == model_obj);
    const auto& recs = f.store->kv().records(idx);
    CHECK(std::map<Bytes, Bytes>(recs.begin(), recs.end()) == model_kv);
  }
}
