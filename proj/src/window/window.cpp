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

#include "sage/window/window.hpp"

#include <algorithm>
#include <cstring>

#include "sage/common/error.hpp"
#include "sage/sim/cluster.hpp"

namespace sage::window {
namespace {

Bytes window_key(WindowId id) {
  Bytes k(8);
  for (int i = 0; i < 8; ++i) k[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(id >> (56 - 8 * i));
  return k;
}

std::uint64_t pages_for(std::uint64_t size) { return (size + kPageBytes - 1) / kPageBytes; }

}  // namespace

std::string_view to_string(Backing b) noexcept { return b == Backing::memory ? "memory" : "storage"; }

Bytes encode_window(const WindowInfo& info) {
  ByteWriter w;
  w.u64(info.id);
  w.u32(info.owner);
  w.u32(info.node);
  w.u64(info.size);
  w.u8(static_cast<std::uint8_t>(info.backing));
  w.u64(info.object.hi);
  w.u64(info.object.lo);
  return w.bytes();
}

WindowInfo decode_window(ByteView bytes) {
  ByteReader r(bytes);
  WindowInfo info;
  info.id = r.u64();
  info.owner = r.u32();
  info.node = r.u32();
  info.size = r.u64();
  const auto b = r.u8();
  if (b > 1) raise(Errc::corrupt, "bad window backing");
  info.backing = static_cast<Backing>(b);
  info.object.hi = r.u64();
  info.object.lo = r.u64();
  return info;
}

Windows::Windows(Store& store, NodeOf node_of, DeviceProfile memory)
    : store_(store), node_of_(std::move(node_of)), memory_(memory) {
  reload();
}

Windows::Windows(sim::Cluster& cluster)
    : Windows(cluster.store(), [&cluster](RankId r) { return cluster.node_of(r); }) {
  cluster_ = &cluster;
  tokens_.push_back(cluster.on_crash([this](NodeId n, VTime) { drop_node(n); }));
  tokens_.push_back(cluster.on_restart([this](NodeId n, VTime) {
    if (n == store_.config().meta_node) reload();
  }));
}

Windows::~Windows() {
  if (cluster_ != nullptr)
    for (auto t : tokens_) cluster_->remove_listener(t);
}

Windows::State& Windows::state(WindowId id) {
  auto it = windows_.find(id);
  if (it == windows_.end()) raise(Errc::unknown_window, std::to_string(id));
  return it->second;
}

const Windows::State& Windows::state(WindowId id) const {
  auto it = windows_.find(id);
  if (it == windows_.end()) raise(Errc::unknown_window, std::to_string(id));
  return it->second;
}

const WindowInfo& Windows::info(WindowId id) const { return state(id).info; }

std::vector<WindowId> Windows::ids() const {
  std::vector<WindowId> out;
  for (const auto& [id, s] : windows_) out.push_back(id);
  return out;
}

std::uint64_t Windows::dirty_bytes(WindowId id) const {
  const State& s = state(id);
  std::uint64_t n = 0;
  for (auto p : s.dirty) n += std::min(kPageBytes, s.info.size - p * kPageBytes);
  return n;
}

void Windows::check_range(const State& s, std::uint64_t offset, std::uint64_t length) const {
  if (offset > s.info.size || length > s.info.size - offset)
    raise(Errc::out_of_bounds, "window " + std::to_string(s.info.id) + ": [" + std::to_string(offset) + ", +" +
                                   std::to_string(length) + ") past " + std::to_string(s.info.size));
}

VTime Windows::memory_cost(std::uint64_t bytes) const {
  return memory_.latency + static_cast<double>(bytes) / memory_.write_bw;
}

Layout Windows::placement(NodeId node, TierId tier, std::uint64_t blocks) const {
  DevicePool& pool = store_.pool();
  std::optional<DeviceId> best;
  auto better = [&](DeviceId d) {
    if (!best) return true;
    const Device& a = pool.get(d);
    const Device& b = pool.get(*best);
    const bool a_local = a.node() == node, b_local = b.node() == node;
    if (a_local != b_local) return a_local;
    return a.free_blocks() > b.free_blocks();
  };
  for (DeviceId d : pool.in_tier(tier))
    if (pool.get(d).online() && better(d)) best = d;
  if (!best) raise(Errc::out_of_capacity, "no usable device in tier " + std::to_string(tier));
  if (pool.get(*best).free_blocks() < blocks)
    raise(Errc::out_of_capacity, "window needs " + std::to_string(blocks) + " blocks on device " +
                                     std::to_string(*best));
  return Layout::striped(1, 0, {*best});
}

WindowId Windows::alloc(IoCtx& ctx, RankId owner, std::uint64_t size, const WindowOptions& options) {
  if (size == 0) raise(Errc::invalid_argument, "window size must be positive");
  const NodeId node = node_of_(owner);
  if (!store_.fabric().node_up(node)) raise(Errc::node_down, "node " + std::to_string(node) + " is down");
  State s;
  s.info.owner = owner;
  s.info.node = node;
  s.info.size = size;
  s.info.backing = options.backing;
  if (options.backing == Backing::memory) {
    if (size > memory_.capacity_bytes) raise(Errc::out_of_capacity, "window larger than memory");
    s.info.id = next_id_++;
    s.memory.assign(size, 0);
    ctx.now += memory_cost(0);
  } else {
    const std::uint64_t blocks = pages_for(size);
    Layout layout = options.layout ? *options.layout : placement(node, options.tier.value_or(1), blocks);
    validate_layout(layout);
    if (options.layout) {
      // Rows each device of a plain layout must be able to hold.
      std::uint64_t rows = 0;
      if (const auto* st = std::get_if<StripedLayout>(&layout.kind)) rows = (blocks + st->data_units - 1) / st->data_units;
      if (std::holds_alternative<MirroredLayout>(layout.kind)) rows = blocks;
      for (DeviceId d : devices_of(layout))
        if (store_.pool().get(d).free_blocks() < rows)
          raise(Errc::out_of_capacity, "device " + std::to_string(d) + " cannot hold the window");
    }
    s.info.id = next_id_++;
    ObjectMeta meta;
    meta.id = store_.new_object_id();
    meta.block_size = kPageBytes;
    meta.layout = std::move(layout);
    meta.created_at = ctx.now;
    s.info.object = meta.id;
    Txn txn = store_.begin();
    txn.create_object(meta);
    txn.put(kWindowsIndex, {Record{window_key(s.info.id), encode_window(s.info)}});
    store_.commit(ctx, txn);
  }
  const WindowId id = s.info.id;
  emit(ctx, "alloc", static_cast<double>(size), s);
  windows_.emplace(id, std::move(s));
  return id;
}

void Windows::page_in(IoCtx& ctx, State& s, std::uint64_t first, std::uint64_t last,
                      std::optional<std::uint64_t> skip_lo, std::optional<std::uint64_t> skip_hi) {
  // Pages fully overwritten by the caller (in [skip_lo, skip_hi]) need no read.
  auto needed = [&](std::uint64_t p) {
    if (s.pages.count(p) != 0) return false;
    return !(skip_lo && skip_hi && p >= *skip_lo && p <= *skip_hi);
  };
  std::uint64_t p = first;
  while (p <= last) {
    if (!needed(p)) {
      if (s.pages.count(p) == 0) s.pages.emplace(p, Bytes(kPageBytes, 0));
      ++p;
      continue;
    }
    std::uint64_t q = p;
    while (q + 1 <= last && needed(q + 1)) ++q;
    Bytes data = store_.read(ctx, s.info.object, p, q - p + 1);
    for (std::uint64_t i = p; i <= q; ++i) {
      const auto off = static_cast<std::ptrdiff_t>((i - p) * kPageBytes);
      s.pages.emplace(i, Bytes(data.begin() + off, data.begin() + off + static_cast<std::ptrdiff_t>(kPageBytes)));
    }
    counters_.pages_in += q - p + 1;
    p = q + 1;
  }
}

void Windows::put(IoCtx& ctx, WindowId id, std::uint64_t offset, ByteView data) {
  State& s = state(id);
  check_range(s, offset, data.size());
  Fabric& fabric = store_.fabric();
  IoCtx owner{s.info.node, fabric.transfer(ctx.node, s.info.node, data.size(), MsgKind::window, ctx.now)};
  if (s.info.backing == Backing::memory) {
    std::copy(data.begin(), data.end(), s.memory.begin() + static_cast<std::ptrdiff_t>(offset));
  } else if (!data.empty()) {
    const std::uint64_t first = offset / kPageBytes;
    const std::uint64_t last = (offset + data.size() - 1) / kPageBytes;
    // Interior pages covered end to end.
    const std::uint64_t full_lo = (offset + kPageBytes - 1) / kPageBytes;
    const std::uint64_t end = offset + data.size();
    const bool tail_full = end == s.info.size || end % kPageBytes == 0;
    const std::uint64_t full_hi_excl = tail_full ? last + 1 : last;
    std::optional<std::uint64_t> lo, hi;
    if (full_lo < full_hi_excl) {
      lo = full_lo;
      hi = full_hi_excl - 1;
    }
    page_in(owner, s, first, last, lo, hi);
    std::uint64_t pos = offset;
    std::size_t src = 0;
    while (src < data.size()) {
      const std::uint64_t page = pos / kPageBytes;
      const std::uint64_t in = pos % kPageBytes;
      const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(kPageBytes - in, data.size() - src));
      Bytes& buf = s.pages.at(page);
      std::memcpy(buf.data() + in, data.data() + src, n);
      s.dirty.insert(page);
      pos += n;
      src += n;
    }
  }
  owner.now += memory_cost(data.size());
  ctx.now = fabric.transfer(s.info.node, ctx.node, 0, MsgKind::control, owner.now);
  ++counters_.puts;
  counters_.bytes_put += data.size();
  emit(ctx, "put", static_cast<double>(data.size()), s);
}

Bytes Windows::get(IoCtx& ctx, WindowId id, std::uint64_t offset, std::uint64_t length) {
  State& s = state(id);
  check_range(s, offset, length);
  Fabric& fabric = store_.fabric();
  IoCtx owner{s.info.node, fabric.transfer(ctx.node, s.info.node, 0, MsgKind::window, ctx.now)};
  Bytes out(length);
  if (s.info.backing == Backing::memory) {
    std::copy_n(s.memory.begin() + static_cast<std::ptrdiff_t>(offset), length, out.begin());
  } else if (length > 0) {
    const std::uint64_t first = offset / kPageBytes;
    const std::uint64_t last = (offset + length - 1) / kPageBytes;
    page_in(owner, s, first, last, std::nullopt, std::nullopt);
    std::uint64_t pos = offset;
    std::size_t dst = 0;
    while (dst < length) {
      const std::uint64_t in = pos % kPageBytes;
      const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(kPageBytes - in, length - dst));
      std::memcpy(out.data() + dst, s.pages.at(pos / kPageBytes).data() + in, n);
      pos += n;
      dst += n;
    }
  }
  owner.now += memory_cost(length);
  ctx.now = fabric.transfer(s.info.node, ctx.node, length, MsgKind::window, owner.now);
  ++counters_.gets;
  counters_.bytes_got += length;
  emit(ctx, "get", static_cast<double>(length), s);
  return out;
}

void Windows::sync(IoCtx& ctx, WindowId id) {
  State& s = state(id);
  if (s.info.backing == Backing::memory) return;
  Fabric& fabric = store_.fabric();
  IoCtx owner{s.info.node, fabric.transfer(ctx.node, s.info.node, 0, MsgKind::control, ctx.now)};
  std::uint64_t bytes = 0;
  if (!s.dirty.empty()) {
    Txn txn = store_.begin();
    auto it = s.dirty.begin();
    while (it != s.dirty.end()) {
      const std::uint64_t start = *it;
      Bytes run;
      std::uint64_t p = start;
      while (it != s.dirty.end() && *it == p) {
        const Bytes& page = s.pages.at(p);
        run.insert(run.end(), page.begin(), page.end());
        ++it;
        ++p;
      }
      bytes += run.size();
      txn.write(s.info.object, start, run);
    }
    store_.commit(owner, txn);
    s.dirty.clear();
  }
  ctx.now = fabric.transfer(s.info.node, ctx.node, 0, MsgKind::control, owner.now);
  ++counters_.syncs;
  counters_.bytes_synced += bytes;
  emit(ctx, "sync", static_cast<double>(bytes), s);
}

void Windows::drop_node(NodeId node) {
  for (auto it = windows_.begin(); it != windows_.end();) {
    State& s = it->second;
    if (s.info.node != node) {
      ++it;
      continue;
    }
    if (s.info.backing == Backing::memory) {
      it = windows_.erase(it);
      continue;
    }
    s.pages.clear();
    s.dirty.clear();
    ++it;
  }
}

void Windows::drop_all() {
  windows_.clear();
  reload();
}

void Windows::reload() {
  if (store_.crashed()) return;
  for (const auto& [key, value] : store_.kv().records(kWindowsIndex)) {
    if (value.empty()) continue;
    WindowInfo info = decode_window(value);
    next_id_ = std::max(next_id_, info.id + 1);
    if (windows_.count(info.id) != 0 || !store_.exists(info.object)) continue;
    State s;
    s.info = info;
    windows_.emplace(info.id, std::move(s));
  }
}

void Windows::emit(const IoCtx& ctx, const char* metric, double value, const State& s) {
  if (auto* addb = store_.addb())
    addb->emit(ctx.now, ctx.node, telemetry::Subsystem::window, metric, value,
               {{"win", std::to_string(s.info.id)}, {"backing", std::string(to_string(s.info.backing))}});
}

}  // namespace sage::window
