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
#include "sage/kv/kv_store.hpp"

using namespace sage;

namespace {

Bytes b(std::string_view s) { return {s.begin(), s.end()}; }

Bytes random_key(std::mt19937_64& rng) {
  Bytes k(1 + rng() % 3);
  for (auto& c : k) c = static_cast<std::uint8_t>('a' + rng() % 4);
  return k;
}

}  // namespace

TEST_CASE("put get del") {
  KvStore kv;
  kv.create(1, "t");
  std::vector<Record> recs{{b("a"), b("1")}};
  kv.put(1, recs);
  std::vector<Bytes> keys{b("a"), b("zz")};
  auto got = kv.get(1, keys);
  CHECK(got[0] == std::optional<Bytes>(b("1")));
  CHECK_FALSE(got[1].has_value());

  recs[0].value = b("2");
  kv.put(1, recs);
  CHECK(kv.get(1, keys)[0] == std::optional<Bytes>(b("2")));
  kv.put(1, {});
  CHECK(kv.get(1, {}).empty());

  std::vector<Bytes> del{b("a")};
  CHECK(kv.del(1, del) == std::vector<bool>{true});
  CHECK(kv.del(1, del) == std::vector<bool>{false});
  CHECK_FALSE(kv.get(1, keys)[0].has_value());
}

TEST_CASE("next is a strict successor scan") {
  KvStore kv;
  kv.create(1, "t");
  std::vector<Record> recs{{b("a"), b("1")}, {b("b"), b("2")}, {b("c"), b("3")}};
  kv.put(1, recs);
  std::vector<Bytes> probe{b("a")};
  auto out = kv.next(1, probe, 2);
  REQUIRE(out[0].size() == 2);
  CHECK(out[0][0].key == b("b"));
  CHECK(out[0][1].key == b("c"));
  probe[0] = b("c");
  CHECK(kv.next(1, probe, 2)[0].empty());
  CHECK_THROWS_AS(kv.next(1, probe, 0), Error);
}

TEST_CASE("unknown index") {
  KvStore kv;
  try {
    kv.get(7, {});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_index);
  }
}

TEST_CASE("random operations match an ordered map") {
  KvStore kv;
  kv.create(1, "t");
  std::map<Bytes, Bytes> model;
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 10000; ++i) {
    const Bytes k = random_key(rng);
    std::vector<Bytes> keys{k};
    switch (rng() % 4) {
      case 0: {
        Bytes v(rng() % 5, static_cast<std::uint8_t>(rng()));
        std::vector<Record> r{{k, v}};
        kv.put(1, r);
        model[k] = v;
        break;
      }
      case 1: {
        auto got = kv.get(1, keys)[0];
        auto it = model.find(k);
        CHECK(got.has_value() == (it != model.end()));
        if (got && it != model.end()) CHECK(*got == it->second);
        break;
      }
      case 2:
        CHECK(kv.del(1, keys)[0] == (model.erase(k) == 1));
        break;
      default: {
        const std::size_t n = 1 + rng() % 4;
        auto got = kv.next(1, keys, n)[0];
        std::vector<Record> want;
        for (auto it = model.upper_bound(k); it != model.end() && want.size() < n; ++it)
          want.push_back({it->first, it->second});
        CHECK(got == want);
      }
    }
  }
  // a full successor walk from the empty key enumerates everything once
  std::vector<Bytes> start{Bytes{}};
  auto all = kv.next(1, start, model.size() + 10)[0];
  CHECK(all.size() == model.size());
  std::size_t i = 0;
  for (const auto& [k, v] : model) CHECK(all[i++].key == k);
}

TEST_CASE("snapshot page round trip") {
  KvStore kv;
  kv.create(3, "three");
  std::vector<Record> recs{{b("k"), b("v")}, {b("k2"), {}}};
  kv.put(3, recs);
  ByteWriter w;
  kv.encode(w);
  CHECK(to_string(ByteView(w.bytes()).first(8)) == "SAGEIDX1");
  ByteReader r(w.bytes());
  KvStore back = KvStore::decode(r);
  CHECK(back.records(3) == kv.records(3));
  CHECK(back.name(3) == "three");
}
