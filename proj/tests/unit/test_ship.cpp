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
#include <random>

#include "doctest.h"
#include "sage/common/error.hpp"
#include "sage/ship/ship.hpp"
#include "sage/sim/cluster.hpp"
#include "support.hpp"

using namespace sage;
using namespace sage::ship;
using sage::testing::TempDir;

namespace {

constexpr std::uint64_t kBs = 4096;
constexpr NodeId kClient = 3;

// Three storage nodes with devices 4n..4n+3 (tiers 1-4), one compute node.
struct Fixture {
  TempDir dir;
  std::unique_ptr<sim::Cluster> cluster = sim::Cluster::spawn(sim::ClusterConfig::uniform(3, 1), 7, dir.path());
  Store& store = cluster->store();
  Shipper shipper{store};
  IoCtx ctx{kClient, 0};

  ObjectId make(Layout layout, ByteView data) {
    auto meta = store.create_object(ctx, kBs, std::move(layout));
    if (!data.empty()) store.write(ctx, meta.id, 0, data);
    return meta.id;
  }

  std::size_t data_messages_since(std::size_t from) const {
    const auto& log = cluster->fabric().log();
    return static_cast<std::size_t>(
        std::count_if(log.begin() + static_cast<std::ptrdiff_t>(from), log.end(),
                      [](const sim::Message& m) { return carries_data(m.kind); }));
  }
};

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::invalid_argument;
}

Bytes le64s(const std::vector<std::int64_t>& v) {
  ByteWriter w;
  for (auto x : v) w.u64(static_cast<std::uint64_t>(x));
  Bytes b = w.bytes();
  b.resize((b.size() + kBs - 1) / kBs * kBs, 0);
  return b;
}

std::int64_t as_i64(ByteView b) {
  ByteReader r(b);
  return static_cast<std::int64_t>(r.u64());
}

Layout random_layout(std::mt19937_64& rng) {
  const TierId tier = static_cast<TierId>(1 + rng() % 2);
  std::vector<DeviceId> devs;
  for (NodeId n = 0; n < 3; ++n) devs.push_back(4 * n + static_cast<DeviceId>(tier - 1));
  switch (rng() % 3) {
    case 0: return Layout::striped(2, 1, devs);
    case 1: return Layout::striped(3, 0, devs);
    default: return Layout::mirrored(2, {devs[0], devs[2]});
  }
}

FunctionDesc max_i64() {
  FunctionDesc d;
  d.name = "MAX_I64";
  auto lowest = [] {
    ByteWriter w;
    w.u64(static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::min()));
    return w.bytes();
  };
  d.identity = lowest();
  d.map = [lowest](std::uint64_t, ByteView block, ByteView) {
    ByteReader r(block);
    std::int64_t m = std::numeric_limits<std::int64_t>::min();
    while (r.remaining() >= 8) m = std::max(m, static_cast<std::int64_t>(r.u64()));
    ByteWriter w;
    w.u64(static_cast<std::uint64_t>(m));
    return w.bytes();
  };
  d.combine = [](ByteView a, ByteView b) {
    const ByteView m = as_i64(a) >= as_i64(b) ? a : b;
    return Bytes(m.begin(), m.end());
  };
  return d;
}

}  // namespace

TEST_CASE("sum of 1..100 is 5050") {
  Fixture f;
  std::vector<std::int64_t> v(100);
  std::iota(v.begin(), v.end(), 1);
  auto id = f.make(Layout::striped(2, 1, {1, 5, 9}), le64s(v));
  auto r = f.shipper.ship(f.ctx, kSumI64, {}, id);
  CHECK(as_i64(r.aggregate) == 5050);
}

TEST_CASE("checksum of an empty object is the offset basis") {
  Fixture f;
  auto id = f.make(Layout::striped(2, 1, {1, 5, 9}), {});
  auto r = f.shipper.ship(f.ctx, kChecksum64, {}, id);
  CHECK(ByteReader(r.aggregate).u64() == kFnvOffsetBasis);
  CHECK(r.fetch_equivalent_bytes == 0);
}

TEST_CASE("count match equals a local scan") {
  Fixture f;
  std::mt19937_64 rng(12);
  Bytes data(16 * kBs);
  for (auto& b : data) b = static_cast<std::uint8_t>(rng() % 4);
  auto id = f.make(Layout::striped(3, 0, {1, 5, 9}), data);
  const Bytes pattern{2};
  auto r = f.shipper.ship(f.ctx, kCountMatch, pattern, id);
  CHECK(ByteReader(r.aggregate).u64() == static_cast<std::uint64_t>(std::count(data.begin(), data.end(), 2)));
}

TEST_CASE("builtins equal fetch-then-compute on random targets") {
  Fixture f;
  std::mt19937_64 rng(21);
  std::vector<ObjectId> all;
  for (int i = 0; i < 20; ++i) {
    const auto blocks = rng() % 6;
    all.push_back(f.make(random_layout(rng), testing::random_bytes(rng, blocks * kBs)));
  }
  const ContainerId c = f.store.create_container(f.ctx, "all");
  for (std::size_t i = 0; i < all.size(); i += 2) f.store.add_member(f.ctx, c, all[i]);
  const Bytes hist = histogram_params(0, 256, 16);
  const Bytes pattern(8, 0x11);
  const std::vector<std::pair<const char*, Bytes>> calls{
      {kChecksum64, {}}, {kSumI64, {}}, {kCountMatch, Bytes{7}}, {kCountMatch, pattern}, {kHistogram, hist}};
  for (const auto& [name, params] : calls) {
    for (const auto& id : all) {
      const auto before = f.cluster->fabric().log().size();
      auto r = f.shipper.ship(f.ctx, name, params, id);
      CHECK(f.data_messages_since(before) == 0);
      CHECK(r.aggregate == f.shipper.fetch_and_compute(f.ctx, name, params, id));
    }
    CHECK(f.shipper.ship(f.ctx, name, params, c).aggregate == f.shipper.fetch_and_compute(f.ctx, name, params, c));
  }
}

TEST_CASE("plugin registration") {
  Fixture f;
  f.shipper.register_function(max_i64());
  auto id = f.make(Layout::striped(2, 1, {1, 5, 9}), le64s({3, -7, 99, 12, 98}));
  CHECK(as_i64(f.shipper.ship(f.ctx, "MAX_I64", {}, id).aggregate) == 99);
  CHECK(code_of([&] { f.shipper.register_function(max_i64()); }) == Errc::duplicate_function);

  FunctionDesc minus;
  minus.name = "MINUS";
  minus.identity = Bytes(8, 0);
  minus.map = [](std::uint64_t, ByteView b, ByteView) { return Bytes(b.begin(), b.begin() + 8); };
  minus.combine = [](ByteView a, ByteView b) {
    ByteWriter w;
    w.u64(ByteReader(a).u64() - ByteReader(b).u64());
    return w.bytes();
  };
  CHECK(code_of([&] { f.shipper.register_function(minus); }) == Errc::combiner_not_associative);
  CHECK(code_of([&] { f.shipper.ship(f.ctx, "MINUS", {}, id); }) == Errc::unknown_function);
  CHECK(code_of([&] { f.shipper.ship(f.ctx, kSumI64, {}, ObjectId{1, 1}); }) == Errc::unknown_target);
  CHECK(code_of([&] { f.shipper.ship(f.ctx, kSumI64, {}, ContainerId{77}); }) == Errc::unknown_target);
}

TEST_CASE("a 1 MiB target ships at least 100 times less than it fetches") {
  Fixture f;
  std::mt19937_64 rng(2);
  auto id = f.make(Layout::striped(2, 1, {1, 5, 9}), testing::random_bytes(rng, 1 << 20));
  const auto sent_before = f.cluster->fabric().counters().bytes_sent;
  const auto before = f.cluster->fabric().log().size();
  auto r = f.shipper.ship(f.ctx, kSumI64, {}, id);
  CHECK(r.aggregate.size() == 8);
  CHECK(r.fetch_equivalent_bytes == 1 << 20);
  CHECK(f.data_messages_since(before) == 0);
  // Harness counters agree with the result's own accounting.
  CHECK(f.cluster->fabric().counters().bytes_sent - sent_before == r.shipped_bytes);
  CHECK(static_cast<double>(r.fetch_equivalent_bytes) / static_cast<double>(r.shipped_bytes) >= 100.0);
}

TEST_CASE("mirrored objects are counted once") {
  Fixture f;
  std::mt19937_64 rng(3);
  const Bytes data = testing::random_bytes(rng, 4 * kBs);
  auto id = f.make(Layout::mirrored(2, {1, 5}), data);
  auto r = f.shipper.ship(f.ctx, kSumI64, {}, id);
  CHECK(r.fetch_equivalent_bytes == data.size());
  CHECK(r.aggregate == f.shipper.fetch_and_compute(f.ctx, kSumI64, {}, id));
}

TEST_CASE("down storage node falls back to reconstruction") {
  Fixture f;
  std::mt19937_64 rng(4);
  auto id = f.make(Layout::striped(2, 1, {1, 5, 9}), testing::random_bytes(rng, 10 * kBs));
  const Bytes expect = f.shipper.fetch_and_compute(f.ctx, kChecksum64, {}, id);
  f.cluster->crash_node(1, 1);
  auto r = f.shipper.ship(f.ctx, kChecksum64, {}, id);
  CHECK(r.degraded_blocks > 0);
  CHECK(r.aggregate == expect);
  f.cluster->crash_node(2, 2);
  CHECK(code_of([&] { f.shipper.ship(f.ctx, kChecksum64, {}, id); }) == Errc::unrecoverable_loss);
}

TEST_CASE("partials larger than the cap are refused") {
  Fixture f;
  // XOR of 17-fold repeated blocks: 68 KiB per partial.
  FunctionDesc big;
  big.name = "XOR_WIDE";
  big.map = [](std::uint64_t, ByteView b, ByteView) {
    Bytes out;
    for (int i = 0; i < 17; ++i) out.insert(out.end(), b.begin(), b.end());
    return out;
  };
  big.combine = [](ByteView a, ByteView b) {
    Bytes out(std::max(a.size(), b.size()), 0);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<std::uint8_t>((i < a.size() ? a[i] : 0) ^ (i < b.size() ? b[i] : 0));
    return out;
  };
  f.shipper.register_function(big);
  std::mt19937_64 rng(5);
  auto id = f.make(Layout::striped(1, 0, {1}), testing::random_bytes(rng, 2 * kBs));
  CHECK(code_of([&] { f.shipper.ship(f.ctx, "XOR_WIDE", {}, id); }) == Errc::result_too_large);
}
