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

#include <random>
#include <map>

#include "bench_util.hpp"
#include "sage/common/error.hpp"
#include "sage/window/window.hpp"

namespace sage::bench {
namespace {

// Slot: key, value, next (heap index + 1, 0 ends the chain), used flag.
constexpr std::uint64_t kSlot = 32;
constexpr std::uint64_t kHeapHeader = 8;  // heap window starts with its fill count

struct Slot {
  std::uint64_t key = 0, value = 0, next = 0, used = 0;
};

Slot decode_slot(ByteView b) {
  return {load_le64(b.data()), load_le64(b.data() + 8), load_le64(b.data() + 16), load_le64(b.data() + 24)};
}

Bytes encode_slot(const Slot& s) {
  Bytes b(kSlot);
  store_le64(b.data(), s.key);
  store_le64(b.data() + 8, s.value);
  store_le64(b.data() + 16, s.next);
  store_le64(b.data() + 24, s.used);
  return b;
}

Bytes encode_u64(std::uint64_t v) {
  Bytes b(8);
  store_le64(b.data(), v);
  return b;
}

// A hash table spread over per-rank windows, reached only through
// one-sided get and put. Collisions chain into the owner's overflow heap.
class Dht {
 public:
  Dht(window::Windows& windows, IoCtx& ctx, std::uint32_t processes, std::uint64_t volume, std::uint32_t overflow,
      window::Backing backing)
      : windows_(windows), p_(processes), v_(volume), heap_slots_(volume * overflow) {
    window::WindowOptions opt;
    opt.backing = backing;
    for (RankId r = 0; r < p_; ++r) {
      table_.push_back(windows_.alloc(ctx, r, v_ * kSlot, opt));
      heap_.push_back(windows_.alloc(ctx, r, kHeapHeader + std::max<std::uint64_t>(heap_slots_, 1) * kSlot, opt));
    }
  }

  void put(IoCtx& ctx, std::uint64_t key, std::uint64_t value) {
    const auto [owner, slot] = home(key);
    const std::uint64_t off = slot * kSlot;
    Slot s = decode_slot(windows_.get(ctx, table_[owner], off, kSlot));
    if (s.used == 0 || s.key == key) {
      windows_.put(ctx, table_[owner], off, encode_slot({key, value, s.used ? s.next : 0, 1}));
      return;
    }
    window::WindowId link_window = table_[owner];
    std::uint64_t link_off = off;
    while (s.next != 0) {
      link_window = heap_[owner];
      link_off = kHeapHeader + (s.next - 1) * kSlot;
      s = decode_slot(windows_.get(ctx, link_window, link_off, kSlot));
      if (s.key == key) {
        windows_.put(ctx, link_window, link_off + 8, encode_u64(value));
        return;
      }
    }
    const std::uint64_t fill = load_le64(windows_.get(ctx, heap_[owner], 0, 8).data());
    if (fill >= heap_slots_)
      raise(Errc::capacity_exceeded, "overflow heap of process " + std::to_string(owner) + " is full");
    windows_.put(ctx, heap_[owner], 0, encode_u64(fill + 1));
    windows_.put(ctx, heap_[owner], kHeapHeader + fill * kSlot, encode_slot({key, value, 0, 1}));
    windows_.put(ctx, link_window, link_off + 16, encode_u64(fill + 1));
  }

  std::optional<std::uint64_t> get(IoCtx& ctx, std::uint64_t key) {
    const auto [owner, slot] = home(key);
    Slot s = decode_slot(windows_.get(ctx, table_[owner], slot * kSlot, kSlot));
    if (s.used == 0) return std::nullopt;
    while (true) {
      if (s.key == key) return s.value;
      if (s.next == 0) return std::nullopt;
      s = decode_slot(windows_.get(ctx, heap_[owner], kHeapHeader + (s.next - 1) * kSlot, kSlot));
    }
  }

  void sync(IoCtx& ctx) {
    for (auto id : table_) windows_.sync(ctx, id);
    for (auto id : heap_) windows_.sync(ctx, id);
  }

 private:
  std::pair<RankId, std::uint64_t> home(std::uint64_t key) const {
    const std::uint64_t h = splitmix64(key);
    return {static_cast<RankId>(h % p_), (h / p_) % v_};
  }

  window::Windows& windows_;
  std::uint32_t p_;
  std::uint64_t v_;
  std::uint64_t heap_slots_;
  std::vector<window::WindowId> table_, heap_;
};

}  // namespace

RunResult run_dht(const WorkloadConfig& config, const std::filesystem::path& dir) {
  config.validate();
  const auto& p = config.dht;
  RunResult result;
  result.workload = "dht";
  result.verified = true;

  const auto cap = dht_capacity(p.processes, p.local_volume, p.overflow);
  const auto sub = telemetry::Subsystem::window;
  record(result.addb, 0, sub, "dht", "capacity_per_process", static_cast<double>(cap.per_process));
  record(result.addb, 0, sub, "dht", "capacity_global", static_cast<double>(cap.global));
  record(result.addb, 0, sub, "dht", "capacity_without_overflow", static_cast<double>(cap.global_without_overflow));

  for (auto backing : {window::Backing::memory, window::Backing::storage}) {
    const std::string b(window::to_string(backing));
    auto cluster =
        sim::Cluster::spawn(with_storage_ranks(config.cluster, p.processes), config.seed, dir / ("dht-" + b));
    window::Windows windows(*cluster);
    IoCtx setup{cluster->node_of(0), 0};
    Dht dht(windows, setup, p.processes, p.local_volume, p.overflow, backing);

    // Same keys for both backings.
    std::mt19937_64 rng(config.seed);
    const std::uint64_t key_space = std::max<std::uint64_t>(4 * p.ops, 1);
    std::map<std::uint64_t, std::uint64_t> oracle;
    std::vector<VTime> clock(p.processes, setup.now);
    auto at = [&](std::uint64_t i) {
      const auto r = static_cast<RankId>(i % p.processes);
      return IoCtx{cluster->node_of(r), clock[r]};
    };
    auto done = [&](std::uint64_t i, const IoCtx& ctx) { clock[i % p.processes] = ctx.now; };

    const VTime start = setup.now;
    for (std::uint64_t i = 0; i < p.ops; ++i) {
      const std::uint64_t key = rng() % key_space;
      const std::uint64_t value = rng();
      IoCtx ctx = at(i);
      dht.put(ctx, key, value);
      done(i, ctx);
      oracle[key] = value;
    }
    std::uint64_t found = 0, wrong = 0, i = 0;
    for (const auto& [key, value] : oracle) {
      IoCtx ctx = at(i);
      const auto got = dht.get(ctx, key);
      done(i++, ctx);
      if (got && *got == value) ++found;
      else ++wrong;
    }
    // Keys outside the inserted space must miss.
    for (std::uint64_t k = 0; k < p.ops / 10 + 1; ++k) {
      IoCtx ctx = at(i);
      if (dht.get(ctx, key_space + k)) ++wrong;
      done(i++, ctx);
    }
    VTime end = *std::max_element(clock.begin(), clock.end());
    IoCtx fin{cluster->node_of(0), end};
    dht.sync(fin);
    end = fin.now;

    const bool ok = wrong == 0 && found == oracle.size();
    result.verified = result.verified && ok;
    const telemetry::Tags tags{{"backing", b}, {"processes", std::to_string(p.processes)}};
    record(result.addb, end, sub, "dht", "time", end - start, tags);
    record(result.addb, end, sub, "dht", "keys", static_cast<double>(oracle.size()), tags);
    record(result.addb, end, sub, "dht", "found", static_cast<double>(found), tags);
    record(result.addb, end, sub, "dht", "verified", ok ? 1 : 0, tags);
    cluster->emit_net_summary(end);
    merge_telemetry(result.addb, cluster->addb(), "dht-" + b);
  }
  record(result.addb, 0, sub, "dht", "verified", result.verified ? 1 : 0);
  return result;
}

}  // namespace sage::bench
