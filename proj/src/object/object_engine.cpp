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

#include "sage/object/object_engine.hpp"

#include <algorithm>
#include <set>

#include "sage/common/error.hpp"
#include "sage/simd/kernels.hpp"

namespace sage {
namespace {

struct SubInfo {
  SubLayoutPtr sub;
  std::optional<Extent> extent;
};

SubInfo sub_for(const Layout& layout, std::uint64_t extent_start) {
  if (const auto* s = std::get_if<StripedLayout>(&layout.kind)) return {s, std::nullopt};
  if (const auto* m = std::get_if<MirroredLayout>(&layout.kind)) return {m, std::nullopt};
  for (const auto& e : std::get<TieredLayout>(layout.kind).entries)
    if (e.extent.start_block == extent_start) return {as_ptr(e.layout), e.extent};
  raise(Errc::extent_outside_layout, "no extent starting at block " + std::to_string(extent_start));
}

std::optional<SubInfo> find_sub(const Layout& layout, std::uint64_t extent_start) {
  try {
    return sub_for(layout, extent_start);
  } catch (const Error&) {
    return std::nullopt;
  }
}

bool all_zero(ByteView v) {
  return std::all_of(v.begin(), v.end(), [](std::uint8_t b) { return b == 0; });
}

std::optional<std::size_t> position_of(const std::vector<DeviceId>& devices, DeviceId d) {
  auto it = std::find(devices.begin(), devices.end(), d);
  if (it == devices.end()) return std::nullopt;
  return static_cast<std::size_t>(it - devices.begin());
}

}  // namespace

void encode_meta(ByteWriter& w, const ObjectMeta& meta) {
  w.u64(meta.id.hi);
  w.u64(meta.id.lo);
  w.u64(meta.block_size);
  encode_layout(w, meta.layout);
  w.u64(meta.size_blocks);
  w.f64(meta.created_at);
}

ObjectMeta decode_meta(ByteReader& r) {
  ObjectMeta m;
  m.id.hi = r.u64();
  m.id.lo = r.u64();
  m.block_size = r.u64();
  m.layout = decode_layout(r);
  m.size_blocks = r.u64();
  m.created_at = r.f64();
  return m;
}

ObjectEngine::ObjectEngine(DevicePool& pool, Fabric& fabric, telemetry::Addb* addb)
    : pool_(pool), fabric_(fabric), addb_(addb) {}

ObjectEngine::ObjectState& ObjectEngine::state(const ObjectId& id) {
  auto it = objects_.find(id);
  if (it == objects_.end()) raise(Errc::unknown_object, id.to_string());
  return it->second;
}

const ObjectEngine::ObjectState& ObjectEngine::state(const ObjectId& id) const {
  auto it = objects_.find(id);
  if (it == objects_.end()) raise(Errc::unknown_object, id.to_string());
  return it->second;
}

const ObjectMeta& ObjectEngine::meta(const ObjectId& id) const { return state(id).meta; }

std::vector<ObjectId> ObjectEngine::objects() const {
  std::vector<ObjectId> out;
  out.reserve(objects_.size());
  for (const auto& [id, st] : objects_) out.push_back(id);
  return out;
}

void ObjectEngine::create(const ObjectMeta& meta) {
  if (objects_.count(meta.id) != 0) raise(Errc::already_exists, meta.id.to_string());
  validate_block_size(meta.block_size);
  validate_layout(meta.layout);
  for (DeviceId d : devices_of(meta.layout))
    if (!pool_.contains(d)) raise(Errc::invalid_layout, "unknown device " + std::to_string(d));
  objects_[meta.id] = ObjectState{meta, {}};
}

void ObjectEngine::remove(const ObjectId& id) {
  auto& st = state(id);
  for (const auto& [key, e] : st.units)
    if (e.physical != kNoBlock && pool_.contains(key.device)) pool_.get(key.device).release(e.physical);
  objects_.erase(id);
}

bool ObjectEngine::unit_available(const UnitKey& key, const UnitEntry& entry, NodeId from) const {
  if (entry.stale || entry.physical == kNoBlock) return false;
  const Device& dev = pool_.get(key.device);
  return dev.online() && reachable(from, dev.node());
}

std::optional<UnitEntry> ObjectEngine::entry(const ObjectId& id, const UnitKey& key) const {
  const auto& st = state(id);
  auto it = st.units.find(key);
  if (it == st.units.end()) return std::nullopt;
  return it->second;
}

std::vector<UnitKey> ObjectEngine::units_on_device(const ObjectId& id, DeviceId device) const {
  std::vector<UnitKey> out;
  for (const auto& [key, e] : state(id).units)
    if (key.device == device) out.push_back(key);
  return out;
}

std::vector<ObjectId> ObjectEngine::objects_on_device(DeviceId device) const {
  std::vector<ObjectId> out;
  for (const auto& [id, st] : objects_) {
    bool uses = false;
    for (DeviceId d : devices_of(st.meta.layout)) uses |= (d == device);
    if (uses) out.push_back(id);
  }
  return out;
}

UnitRole ObjectEngine::role_of(const ObjectId& id, const UnitKey& key) const {
  SubInfo info = sub_for(state(id).meta.layout, key.extent_start);
  if (const auto* const* s = std::get_if<const StripedLayout*>(&info.sub)) {
    if ((*s)->parity_units == 1) {
      auto pos = position_of((*s)->devices, key.device);
      if (pos && *pos == parity_position((*s)->data_units, key.row)) return UnitRole::parity;
    }
  }
  return UnitRole::data;
}

std::vector<UnitKey> ObjectEngine::row_peers(const ObjectState& st, const UnitKey& key) const {
  SubInfo info = sub_for(st.meta.layout, key.extent_start);
  std::vector<UnitKey> out;
  for (DeviceId d : std::visit([](const auto* l) { return l->devices; }, info.sub))
    out.push_back({key.extent_start, d, key.row});
  return out;
}

void ObjectEngine::emit(const IoCtx& ctx, std::string metric, double value, telemetry::Tags tags) {
  if (addb_ != nullptr) addb_->emit(ctx.now, ctx.node, telemetry::Subsystem::object, std::move(metric), value, std::move(tags));
}

void ObjectEngine::read_units(IoCtx& ctx, const ObjectState& st, std::span<const UnitKey> keys, MsgKind kind,
                              std::map<UnitKey, Bytes>& out) {
  std::map<DeviceId, std::vector<UnitKey>> by_device;
  for (const auto& k : keys) by_device[k.device].push_back(k);
  const VTime t0 = ctx.now;
  VTime done = t0;
  for (auto& [dev_id, list] : by_device) {
    Device& dev = pool_.get(dev_id);
    std::vector<std::uint64_t> phys;
    phys.reserve(list.size());
    for (const auto& k : list) phys.push_back(st.units.at(k).physical);
    VTime arrive = send(ctx.node, dev.node(), 0, MsgKind::control, t0);
    std::vector<Bytes> blocks;
    IoResult io = dev.read_blocks(phys, blocks, arrive);
    const std::uint64_t bytes = phys.size() * dev.block_size();
    VTime back = send(dev.node(), ctx.node, bytes, kind, io.done);
    done = std::max(done, back);
    for (std::size_t i = 0; i < list.size(); ++i) out[list[i]] = std::move(blocks[i]);
    emit(IoCtx{ctx.node, back}, "dev_read_bytes", static_cast<double>(bytes),
         {{"dev", std::to_string(dev_id)}, {"tier", std::to_string(dev.tier())}});
  }
  ctx.now = done;
}

void ObjectEngine::write_units(IoCtx& ctx, ObjectState& st, std::vector<UnitWrite>& units) {
  std::map<DeviceId, std::vector<std::size_t>> by_device;
  for (std::size_t i = 0; i < units.size(); ++i) by_device[units[i].key.device].push_back(i);
  const VTime t0 = ctx.now;
  VTime done = t0;
  for (auto& [dev_id, idxs] : by_device) {
    Device& dev = pool_.get(dev_id);
    const bool usable = dev.online() && reachable(ctx.node, dev.node());
    if (!usable) {
      for (std::size_t i : idxs) st.units[units[i].key].stale = true;
      continue;
    }
    std::vector<BlockWrite> batch;
    batch.reserve(idxs.size());
    for (std::size_t i : idxs) {
      UnitEntry& e = st.units[units[i].key];
      if (e.physical == kNoBlock) {
        auto phys = dev.allocate();
        if (!phys) raise(Errc::out_of_capacity, "device " + std::to_string(dev_id) + " is full");
        e.physical = *phys;
      }
      e.stale = false;
      batch.push_back({e.physical, units[i].data});
    }
    const std::uint64_t bytes = batch.size() * dev.block_size();
    VTime arrive = send(ctx.node, dev.node(), bytes, MsgKind::data_write, t0);
    IoResult io = dev.write_blocks(batch, arrive);
    VTime ack = send(dev.node(), ctx.node, 0, MsgKind::control, io.done);
    done = std::max(done, ack);
    emit(IoCtx{ctx.node, ack}, "dev_write_bytes", static_cast<double>(bytes),
         {{"dev", std::to_string(dev_id)}, {"tier", std::to_string(dev.tier())}});
  }
  ctx.now = done;
}

std::map<UnitKey, Bytes> ObjectEngine::fetch_units(IoCtx& ctx, const ObjectId& id, std::span<const UnitKey> keys,
                                                   MsgKind kind) {
  const ObjectState& st = state(id);
  const std::uint64_t bs = st.meta.block_size;
  std::map<UnitKey, Bytes> out;
  std::set<UnitKey> to_read;
  // unit to rebuild -> peers whose XOR (or copy, for mirrors) yields it
  std::map<UnitKey, std::vector<UnitKey>> rebuild;

  for (const auto& key : keys) {
    auto it = st.units.find(key);
    if (it == st.units.end()) {
      out[key] = Bytes(bs, 0);
      continue;
    }
    if (unit_available(key, it->second, ctx.node)) {
      to_read.insert(key);
      continue;
    }
    SubInfo info = sub_for(st.meta.layout, key.extent_start);
    std::vector<UnitKey> sources;
    if (const auto* const* m = std::get_if<const MirroredLayout*>(&info.sub)) {
      for (DeviceId d : (*m)->devices) {
        UnitKey alt{key.extent_start, d, key.row};
        if (alt == key) continue;
        auto ait = st.units.find(alt);
        if (ait != st.units.end() && unit_available(alt, ait->second, ctx.node)) {
          sources.push_back(alt);
          break;
        }
      }
      if (sources.empty()) raise(Errc::unrecoverable_loss, id.to_string() + ": no readable replica");
    } else {
      const auto* s = std::get<const StripedLayout*>(info.sub);
      if (s->parity_units == 0) raise(Errc::unrecoverable_loss, id.to_string() + ": unit lost without parity");
      for (const auto& peer : row_peers(st, key)) {
        if (peer == key) continue;
        auto pit = st.units.find(peer);
        if (pit == st.units.end()) continue;  // never written: contributes zeros
        if (!unit_available(peer, pit->second, ctx.node))
          raise(Errc::unrecoverable_loss, id.to_string() + ": two units lost in row " + std::to_string(key.row));
        sources.push_back(peer);
      }
    }
    for (const auto& s : sources) to_read.insert(s);
    rebuild[key] = std::move(sources);
  }

  std::map<UnitKey, Bytes> raw;
  std::vector<UnitKey> read_list(to_read.begin(), to_read.end());
  read_units(ctx, st, read_list, rebuild.empty() ? kind : MsgKind::data_recon, raw);

  for (const auto& key : keys) {
    if (out.count(key) != 0) continue;
    if (auto rit = rebuild.find(key); rit != rebuild.end()) {
      Bytes acc(bs, 0);
      for (const auto& src : rit->second) simd::kernels().xor_into(acc.data(), raw.at(src).data(), bs);
      out[key] = std::move(acc);
    } else {
      out[key] = raw.at(key);
    }
  }
  return out;
}

Bytes ObjectEngine::read(IoCtx& ctx, const ObjectId& id, std::uint64_t start_block, std::uint64_t block_count) {
  const ObjectState& st = state(id);
  const std::uint64_t bs = st.meta.block_size;
  Bytes out(block_count * bs, 0);
  std::vector<std::pair<std::uint64_t, UnitKey>> wanted;  // (output index, unit)
  std::map<std::uint64_t, std::uint64_t> per_extent;

  for (std::uint64_t i = 0; i < block_count; ++i) {
    const std::uint64_t b = start_block + i;
    if (b >= st.meta.size_blocks) continue;
    SubLayoutRef ref = resolve(st.meta.layout, b);
    per_extent[ref.extent_start] += 1;
    if (const auto* const* s = std::get_if<const StripedLayout*>(&ref.layout)) {
      const std::uint32_t n = (*s)->data_units;
      const std::uint64_t row = ref.relative_block / n;
      const auto j = static_cast<std::uint32_t>(ref.relative_block % n);
      wanted.push_back({i, {ref.extent_start, (*s)->devices[data_position(n, (*s)->parity_units, row, j)], row}});
    } else {
      const auto* m = std::get<const MirroredLayout*>(ref.layout);
      std::optional<UnitKey> pick;
      bool any_entry = false;
      for (DeviceId d : m->devices) {
        UnitKey k{ref.extent_start, d, ref.relative_block};
        auto it = st.units.find(k);
        if (it == st.units.end()) continue;
        any_entry = true;
        if (unit_available(k, it->second, ctx.node)) {
          pick = k;
          break;
        }
      }
      if (!any_entry) continue;  // never written
      if (!pick) raise(Errc::unrecoverable_loss, id.to_string() + ": no readable replica");
      wanted.push_back({i, *pick});
    }
  }

  std::vector<UnitKey> keys;
  keys.reserve(wanted.size());
  for (const auto& w : wanted) keys.push_back(w.second);
  auto contents = fetch_units(ctx, id, keys);
  for (const auto& [i, key] : wanted) std::copy(contents[key].begin(), contents[key].end(), out.begin() + i * bs);

  if (quiet_ == 0)
    for (const auto& [es, blocks] : per_extent)
      emit(ctx, "read", static_cast<double>(blocks * bs),
         {{"obj", id.to_string()}, {"extent", std::to_string(es)}, {"blocks", std::to_string(blocks)}});
  return out;
}

void ObjectEngine::write(IoCtx& ctx, const ObjectId& id, std::uint64_t start_block, ByteView data) {
  ObjectState& st = state(id);
  const std::uint64_t bs = st.meta.block_size;
  if (data.size() % bs != 0)
    raise(Errc::bad_length, std::to_string(data.size()) + " bytes is not a whole number of blocks");
  const std::uint64_t n = data.size() / bs;
  if (n == 0) return;

  struct RowWork {
    const StripedLayout* layout;
    std::map<std::uint32_t, ByteView> fresh;  // data position j -> new contents
  };
  std::map<std::pair<std::uint64_t, std::uint64_t>, RowWork> rows;  // (extent_start, row)
  std::vector<UnitWrite> writes;
  std::map<std::uint64_t, std::uint64_t> per_extent;

  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t b = start_block + i;
    ByteView block = data.subspan(i * bs, bs);
    SubLayoutRef ref = resolve(st.meta.layout, b);
    per_extent[ref.extent_start] += 1;
    if (const auto* const* s = std::get_if<const StripedLayout*>(&ref.layout)) {
      const std::uint32_t nd = (*s)->data_units;
      auto& rw = rows[{ref.extent_start, ref.relative_block / nd}];
      rw.layout = *s;
      rw.fresh[static_cast<std::uint32_t>(ref.relative_block % nd)] = block;
    } else {
      for (DeviceId d : std::get<const MirroredLayout*>(ref.layout)->devices)
        writes.push_back({{ref.extent_start, d, ref.relative_block}, Bytes(block.begin(), block.end())});
    }
  }

  // Read-modify-write: fetch untouched data units of partially written rows.
  std::vector<UnitKey> need;
  for (const auto& [pos, rw] : rows) {
    const auto& [es, row] = pos;
    if (rw.layout->parity_units == 0) continue;
    for (std::uint32_t j = 0; j < rw.layout->data_units; ++j) {
      if (rw.fresh.count(j) != 0) continue;
      UnitKey k{es, rw.layout->devices[data_position(rw.layout->data_units, 1, row, j)], row};
      if (st.units.count(k) != 0) need.push_back(k);
    }
  }
  std::map<UnitKey, Bytes> existing;
  if (!need.empty()) existing = fetch_units(ctx, id, need);

  const Bytes zeros(bs, 0);
  for (const auto& [pos, rw] : rows) {
    const auto& [es, row] = pos;
    const std::uint32_t nd = rw.layout->data_units;
    const std::uint32_t np = rw.layout->parity_units;
    Bytes parity(bs, 0);
    for (std::uint32_t j = 0; j < nd; ++j) {
      UnitKey k{es, rw.layout->devices[data_position(nd, np, row, j)], row};
      auto fit = rw.fresh.find(j);
      if (fit != rw.fresh.end()) {
        writes.push_back({k, Bytes(fit->second.begin(), fit->second.end())});
        if (np == 1) simd::kernels().xor_into(parity.data(), fit->second.data(), bs);
      } else if (np == 1) {
        auto eit = existing.find(k);
        if (eit != existing.end()) simd::kernels().xor_into(parity.data(), eit->second.data(), bs);
      }
    }
    if (np == 1) writes.push_back({{es, rw.layout->devices[parity_position(nd, row)], row}, std::move(parity)});
  }

  write_units(ctx, st, writes);
  st.meta.size_blocks = std::max(st.meta.size_blocks, start_block + n);
  if (quiet_ == 0)
    for (const auto& [es, blocks] : per_extent)
      emit(ctx, "write", static_cast<double>(blocks * bs),
         {{"obj", id.to_string()}, {"extent", std::to_string(es)}, {"blocks", std::to_string(blocks)}});
}

void ObjectEngine::relayout(IoCtx& ctx, const ObjectId& id, const Layout& layout, std::span<const UnitWrite> units) {
  validate_layout(layout);
  ObjectState& st = state(id);
  const Layout old = st.meta.layout;

  auto kept = [&](const UnitKey& key) {
    auto before = find_sub(old, key.extent_start);
    auto after = find_sub(layout, key.extent_start);
    if (!before || !after || before->extent != after->extent) return false;
    if (before->sub.index() != after->sub.index()) return false;
    auto old_devices = std::visit([](const auto* l) { return l->devices; }, before->sub);
    auto new_devices = std::visit([](const auto* l) { return l->devices; }, after->sub);
    if (old_devices.size() != new_devices.size()) return false;
    if (const auto* const* s = std::get_if<const StripedLayout*>(&before->sub)) {
      const auto* t = std::get<const StripedLayout*>(after->sub);
      if ((*s)->data_units != t->data_units || (*s)->parity_units != t->parity_units) return false;
    }
    auto p_old = position_of(old_devices, key.device);
    auto p_new = position_of(new_devices, key.device);
    return p_old && p_new && *p_old == *p_new;
  };

  for (auto it = st.units.begin(); it != st.units.end();) {
    if (kept(it->first)) {
      ++it;
      continue;
    }
    if (it->second.physical != kNoBlock) pool_.get(it->first.device).release(it->second.physical);
    it = st.units.erase(it);
  }
  st.meta.layout = layout;
  std::vector<UnitWrite> copy(units.begin(), units.end());
  write_units(ctx, st, copy);
}

void ObjectEngine::check_write(const ObjectId& id, std::uint64_t start_block, std::uint64_t block_count, NodeId from,
                               CapacityBudget& budget) const {
  const ObjectState& st = state(id);
  check_write_impl(st.meta, st.units, start_block, block_count, from, budget);
}

void ObjectEngine::check_new_write(const ObjectMeta& meta, std::uint64_t start_block, std::uint64_t block_count,
                                   NodeId from, CapacityBudget& budget) const {
  check_write_impl(meta, {}, start_block, block_count, from, budget);
}

void ObjectEngine::check_write_impl(const ObjectMeta& meta, const std::map<UnitKey, UnitEntry>& units,
                                    std::uint64_t start_block, std::uint64_t block_count, NodeId from,
                                    CapacityBudget& budget) const {
  auto usable = [&](DeviceId d) {
    const Device& dev = pool_.get(d);
    return dev.online() && reachable(from, dev.node());
  };
  auto needs_block = [&](const UnitKey& k) {
    auto it = units.find(k);
    return it == units.end() || it->second.physical == kNoBlock;
  };
  std::set<std::pair<std::uint64_t, std::uint64_t>> rows_seen;
  for (std::uint64_t i = 0; i < block_count; ++i) {
    const std::uint64_t b = start_block + i;
    SubLayoutRef ref = resolve(meta.layout, b);
    if (const auto* const* sp = std::get_if<const StripedLayout*>(&ref.layout)) {
      const StripedLayout& s = **sp;
      const std::uint64_t row = ref.relative_block / s.data_units;
      const auto j = static_cast<std::uint32_t>(ref.relative_block % s.data_units);
      UnitKey k{ref.extent_start, s.devices[data_position(s.data_units, s.parity_units, row, j)], row};
      if (s.parity_units == 0 && !usable(k.device))
        raise(Errc::device_failed, "device " + std::to_string(k.device) + " unavailable and layout has no parity");
      if (usable(k.device) && needs_block(k)) budget[k.device] += 1;
      if (s.parity_units == 1 && rows_seen.insert({ref.extent_start, row}).second) {
        int down = 0;
        for (DeviceId d : s.devices) down += usable(d) ? 0 : 1;
        if (down > 1) raise(Errc::device_failed, std::to_string(down) + " devices unavailable in one parity group");
        UnitKey pk{ref.extent_start, s.devices[parity_position(s.data_units, row)], row};
        if (usable(pk.device) && needs_block(pk)) budget[pk.device] += 1;
      }
    } else {
      const auto* m = std::get<const MirroredLayout*>(ref.layout);
      int up = 0;
      for (DeviceId d : m->devices) {
        if (!usable(d)) continue;
        ++up;
        UnitKey k{ref.extent_start, d, ref.relative_block};
        if (needs_block(k)) budget[d] += 1;
      }
      if (up == 0) raise(Errc::device_failed, "no replica device available");
    }
  }
}

void ObjectEngine::check_units(std::span<const UnitWrite> units, NodeId from, CapacityBudget& budget) const {
  for (const auto& u : units) {
    const Device& dev = pool_.get(u.key.device);
    if (!dev.online() || !reachable(from, dev.node()))
      raise(Errc::device_failed, "device " + std::to_string(u.key.device) + " unavailable");
    budget[u.key.device] += 1;
  }
}

void ObjectEngine::check_budget(const CapacityBudget& budget, Errc error) const {
  for (const auto& [d, need] : budget)
    if (need > pool_.get(d).free_blocks())
      raise(error, "device " + std::to_string(d) + " needs " + std::to_string(need) + " blocks");
}

std::vector<ObjectEngine::BlockHome> ObjectEngine::block_homes(const ObjectId& id, NodeId from) const {
  const ObjectState& st = state(id);
  std::vector<BlockHome> out;
  out.reserve(st.meta.size_blocks);
  for (std::uint64_t b = 0; b < st.meta.size_blocks; ++b) {
    SubLayoutRef ref = resolve(st.meta.layout, b);
    if (const auto* const* s = std::get_if<const StripedLayout*>(&ref.layout)) {
      const std::uint32_t n = (*s)->data_units;
      const std::uint64_t row = ref.relative_block / n;
      const auto j = static_cast<std::uint32_t>(ref.relative_block % n);
      UnitKey k{ref.extent_start, (*s)->devices[data_position(n, (*s)->parity_units, row, j)], row};
      auto it = st.units.find(k);
      const bool written = it != st.units.end();
      const Device& dev = pool_.get(k.device);
      const bool available = written ? unit_available(k, it->second, from) : reachable(from, dev.node());
      out.push_back({b, k, written, available});
    } else {
      const auto* m = std::get<const MirroredLayout*>(ref.layout);
      std::optional<BlockHome> chosen;
      std::optional<BlockHome> fallback;
      for (DeviceId d : m->devices) {
        UnitKey k{ref.extent_start, d, ref.relative_block};
        auto it = st.units.find(k);
        if (it == st.units.end()) continue;
        if (unit_available(k, it->second, from)) {
          chosen = BlockHome{b, k, true, true};
          break;
        }
        if (!fallback) fallback = BlockHome{b, k, true, false};
      }
      if (chosen) out.push_back(*chosen);
      else if (fallback) out.push_back(*fallback);
      else {
        UnitKey k{ref.extent_start, m->devices.front(), ref.relative_block};
        out.push_back({b, k, false, reachable(from, pool_.get(k.device).node())});
      }
    }
  }
  return out;
}

void ObjectEngine::on_device_wiped(DeviceId device) {
  for (auto& [id, st] : objects_)
    for (auto& [key, e] : st.units)
      if (key.device == device) {
        e.physical = kNoBlock;
        e.stale = true;
      }
}

void ObjectEngine::encode(ByteWriter& w) const {
  w.u64(objects_.size());
  for (const auto& [id, st] : objects_) {
    encode_meta(w, st.meta);
    w.u64(st.units.size());
    for (const auto& [k, e] : st.units) {
      w.u64(k.extent_start);
      w.u32(k.device);
      w.u64(k.row);
      w.u64(e.physical);
      w.u8(e.stale ? 1 : 0);
    }
  }
}

void ObjectEngine::decode(ByteReader& r) {
  clear();
  std::uint64_t n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    ObjectState st;
    st.meta = decode_meta(r);
    std::uint64_t units = r.u64();
    for (std::uint64_t u = 0; u < units; ++u) {
      UnitKey k;
      k.extent_start = r.u64();
      k.device = r.u32();
      k.row = r.u64();
      UnitEntry e;
      e.physical = r.u64();
      e.stale = r.u8() != 0;
      if (e.physical != kNoBlock && pool_.contains(k.device)) pool_.get(k.device).claim(e.physical);
      st.units[k] = e;
    }
    objects_[st.meta.id] = std::move(st);
  }
}

void ObjectEngine::clear() {
  objects_.clear();
  for (DeviceId d : pool_.ids()) pool_.get(d).reset_allocations();
}

std::vector<UnitWrite> build_units(const SubLayout& sub, std::uint64_t extent_start, ByteView data,
                                   std::uint64_t block_size) {
  std::vector<UnitWrite> out;
  const std::uint64_t n = data.size() / block_size;
  auto block = [&](std::uint64_t rb) { return data.subspan(rb * block_size, block_size); };
  if (const auto* s = std::get_if<StripedLayout>(&sub)) {
    const std::uint32_t nd = s->data_units;
    const std::uint64_t rows = (n + nd - 1) / nd;
    for (std::uint64_t row = 0; row < rows; ++row) {
      bool any = false;
      for (std::uint32_t j = 0; j < nd && row * nd + j < n; ++j) any |= !all_zero(block(row * nd + j));
      if (!any) continue;
      Bytes parity(block_size, 0);
      for (std::uint32_t j = 0; j < nd; ++j) {
        const std::uint64_t rb = row * nd + j;
        Bytes contents = rb < n ? Bytes(block(rb).begin(), block(rb).end()) : Bytes(block_size, 0);
        if (s->parity_units == 1) simd::kernels().xor_into(parity.data(), contents.data(), block_size);
        out.push_back({{extent_start, s->devices[data_position(nd, s->parity_units, row, j)], row}, std::move(contents)});
      }
      if (s->parity_units == 1)
        out.push_back({{extent_start, s->devices[parity_position(nd, row)], row}, std::move(parity)});
    }
  } else {
    const auto& m = std::get<MirroredLayout>(sub);
    for (std::uint64_t rb = 0; rb < n; ++rb) {
      if (all_zero(block(rb))) continue;
      for (DeviceId d : m.devices) out.push_back({{extent_start, d, rb}, Bytes(block(rb).begin(), block(rb).end())});
    }
  }
  return out;
}

}  // namespace sage
