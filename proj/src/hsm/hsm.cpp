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

#include "sage/hsm/hsm.hpp"

#include <algorithm>
#include <numbers>
#include <set>

#include "sage/common/error.hpp"

namespace sage::hsm {
namespace {

double lambda_of(double half_life) { return std::numbers::ln2 / half_life; }

TierId tier_of(const DevicePool& pool, const SubLayout& sub) { return pool.get(devices_of(sub).front()).tier(); }

bool fits(const Occupancy& occ, TierId tier, std::uint64_t bytes, double fraction) {
  auto it = occ.find(tier);
  if (it == occ.end() || it->second.capacity_bytes == 0) return false;
  return static_cast<double>(it->second.used_bytes + bytes) <= fraction * static_cast<double>(it->second.capacity_bytes);
}

void move(Occupancy& occ, TierId from, TierId to, std::uint64_t bytes) {
  auto& src = occ[from].used_bytes;
  src -= std::min(src, bytes);
  occ[to].used_bytes += bytes;
}

}  // namespace

double AccessStats::rate_at(VTime t, double half_life) const noexcept {
  const VTime dt = std::max(0.0, t - last_access);
  return rate * std::exp(-lambda_of(half_life) * dt);
}

const AccessStats& AccessTracker::record(const ExtentKey& key, AccessKind kind, VTime t) {
  AccessStats& s = stats_[key];
  s.rate = s.rate_at(t, half_life_) + lambda_of(half_life_);
  s.last_access = std::max(s.last_access, t);
  if (kind == AccessKind::read) ++s.read_count;
  else ++s.write_count;
  return s;
}

std::optional<AccessStats> AccessTracker::stats(const ExtentKey& key) const {
  auto it = stats_.find(key);
  if (it == stats_.end()) return std::nullopt;
  return it->second;
}

void AccessTracker::forget(const ObjectId& object) {
  for (auto it = stats_.lower_bound(ExtentKey{object, 0}); it != stats_.end() && it->first.object == object;)
    it = stats_.erase(it);
}

void HsmPolicy::validate() const {
  if (!(half_life > 0)) raise(Errc::invalid_argument, "half life must be positive");
  for (const auto& w : watermarks)
    if (!(w.low >= 0 && w.low < w.high && w.high <= 1))
      raise(Errc::invalid_argument, "watermarks need 0 <= low < high <= 1");
}

std::uint64_t footprint(const SubLayout& layout, std::uint64_t block_count, std::uint64_t block_size) {
  if (const auto* s = std::get_if<StripedLayout>(&layout)) {
    const std::uint64_t rows = (block_count + s->data_units - 1) / s->data_units;
    return rows * (s->data_units + s->parity_units) * block_size;
  }
  return block_count * std::get<MirroredLayout>(layout).replicas * block_size;
}

std::vector<MigrationAction> evaluate(const HsmPolicy& policy, std::span<const ExtentInfo> extents,
                                      const Occupancy& occupancy, VTime now) {
  Occupancy occ = occupancy;
  std::vector<const ExtentInfo*> hot, idle;
  for (const auto& e : extents) {
    const double rate = e.stats.rate_at(now, policy.half_life);
    if (e.tier > kMinTier && rate >= policy.promote_rate) hot.push_back(&e);
    else if (e.tier < kMaxTier && rate < policy.promote_rate && now - e.stats.last_access > policy.demote_idle)
      idle.push_back(&e);
  }
  std::stable_sort(hot.begin(), hot.end(), [&](const ExtentInfo* a, const ExtentInfo* b) {
    const double ra = a->stats.rate_at(now, policy.half_life), rb = b->stats.rate_at(now, policy.half_life);
    if (ra != rb) return ra > rb;
    return a->key < b->key;
  });
  auto colder = [](const ExtentInfo* a, const ExtentInfo* b) {
    if (a->stats.last_access != b->stats.last_access) return a->stats.last_access < b->stats.last_access;
    return a->key < b->key;
  };
  std::stable_sort(idle.begin(), idle.end(), colder);

  std::vector<MigrationAction> demotions, promotions, pressure;
  std::set<ExtentKey> moving;
  auto accept = [&](const ExtentInfo& e, TierId to, std::vector<MigrationAction>& out) {
    if (!fits(occ, to, e.footprint_bytes, policy.marks(to).high)) return false;
    move(occ, e.tier, to, e.footprint_bytes);
    moving.insert(e.key);
    out.push_back({e.key.object, e.extent, e.tier, to});
    return true;
  };

  for (const ExtentInfo* e : idle) accept(*e, e->tier + 1, demotions);
  for (const ExtentInfo* e : hot) accept(*e, kMinTier, promotions);

  for (TierId t = kMinTier; t < kMaxTier; ++t) {
    const auto& o = occ[t];
    const double cap = static_cast<double>(o.capacity_bytes);
    if (cap == 0 || static_cast<double>(o.used_bytes) <= policy.marks(t).high * cap) continue;
    std::vector<const ExtentInfo*> resident;
    for (const auto& e : extents)
      if (e.tier == t && moving.count(e.key) == 0) resident.push_back(&e);
    std::stable_sort(resident.begin(), resident.end(), colder);
    for (const ExtentInfo* e : resident) {
      if (static_cast<double>(occ[t].used_bytes) <= policy.marks(t).low * cap) break;
      accept(*e, t + 1, pressure);
    }
  }

  std::vector<MigrationAction> out = std::move(demotions);
  out.insert(out.end(), pressure.begin(), pressure.end());
  out.insert(out.end(), promotions.begin(), promotions.end());
  return out;
}

Occupancy project(std::span<const MigrationAction> actions, std::span<const ExtentInfo> extents, Occupancy occupancy) {
  for (const auto& a : actions)
    for (const auto& e : extents)
      if (e.key.object == a.object && e.extent == a.extent) move(occupancy, a.from, a.to, e.footprint_bytes);
  return occupancy;
}

HsmEngine::HsmEngine(Store& store, HsmPolicy policy)
    : store_(store), policy_(policy), tracker_(policy.half_life) {
  policy_.validate();
}

HsmEngine::~HsmEngine() {
  if (subscribed_ != nullptr) subscribed_->fdmi_deregister(plugin_id_);
}

const AccessStats& HsmEngine::record_access(const ObjectId& object, std::uint64_t extent_start, AccessKind kind,
                                            VTime t) {
  if (!store_.exists(object)) raise(Errc::unknown_object, object.to_string());
  return tracker_.record(ExtentKey{object, extent_start}, kind, t);
}

void HsmEngine::subscribe(telemetry::Addb& addb) {
  if (subscribed_ != nullptr) return;
  plugin_id_ = "hsm.access";
  telemetry::AddbFilter filter;
  filter.subsystem = telemetry::Subsystem::object;
  addb.fdmi_register(plugin_id_, filter, [this](const telemetry::AddbRecord& r) {
    if (r.metric != "read" && r.metric != "write") return;
    const std::string* obj = r.tag("obj");
    const std::string* extent = r.tag("extent");
    if (obj == nullptr || extent == nullptr) return;
    tracker_.record(ExtentKey{ObjectId::parse(*obj), std::stoull(*extent)},
                    r.metric == "read" ? AccessKind::read : AccessKind::write, r.t);
  });
  subscribed_ = &addb;
}

std::vector<ExtentInfo> HsmEngine::survey() const {
  std::vector<ExtentInfo> out;
  ObjectEngine& engine = store_.objects();
  const DevicePool& pool = store_.pool();
  for (const ObjectId& id : engine.objects()) {
    const ObjectMeta& m = engine.meta(id);
    auto add = [&](const SubLayout& sub, const Extent& extent) {
      ExtentInfo info;
      info.key = ExtentKey{id, extent.start_block};
      info.extent = extent;
      info.tier = tier_of(pool, sub);
      info.footprint_bytes = footprint(sub, extent.block_count, m.block_size);
      if (auto s = tracker_.stats(info.key)) {
        info.stats = *s;
        info.tracked = true;
      } else {
        info.stats.last_access = m.created_at;
      }
      out.push_back(std::move(info));
    };
    if (const auto* t = std::get_if<TieredLayout>(&m.layout.kind)) {
      for (const auto& e : t->entries) add(e.layout, e.extent);
    } else if (m.size_blocks > 0) {
      add(to_sublayout(resolve(m.layout, 0).layout), Extent{0, m.size_blocks});
    }
  }
  return out;
}

Occupancy HsmEngine::occupancy() const {
  Occupancy occ;
  for (TierId t = kMinTier; t <= kMaxTier; ++t) {
    auto u = store_.pool().tier_usage(t);
    occ[t] = TierOccupancy{u.used_bytes, u.capacity_bytes};
  }
  return occ;
}

std::vector<MigrationAction> HsmEngine::evaluate(VTime now) const {
  auto extents = survey();
  return hsm::evaluate(policy_, extents, occupancy(), now);
}

SubLayout HsmEngine::place(const SubLayout& shape, TierId tier) const {
  DevicePool& pool = store_.pool();
  std::vector<DeviceId> candidates;
  for (DeviceId d : pool.in_tier(tier))
    if (pool.get(d).online()) candidates.push_back(d);
  if (candidates.empty()) raise(Errc::target_full, "no usable devices in tier " + std::to_string(tier));
  std::stable_sort(candidates.begin(), candidates.end(), [&](DeviceId a, DeviceId b) {
    return pool.get(a).free_blocks() > pool.get(b).free_blocks();
  });
  const auto avail = static_cast<std::uint32_t>(candidates.size());
  if (const auto* s = std::get_if<StripedLayout>(&shape)) {
    std::uint32_t p = s->parity_units;
    std::uint32_t n = s->data_units;
    if (n + p > avail) {
      if (avail < 1 + p) p = 0;
      n = std::max(1u, std::min(n, avail - p));
    }
    candidates.resize(n + p);
    std::sort(candidates.begin(), candidates.end());
    return StripedLayout{n, p, candidates};
  }
  const auto& m = std::get<MirroredLayout>(shape);
  const std::uint32_t r = std::min(m.replicas, avail);
  candidates.resize(r);
  std::sort(candidates.begin(), candidates.end());
  return MirroredLayout{r, candidates};
}

void HsmEngine::migrate(IoCtx& ctx, const MigrationAction& action) {
  if (action.from == action.to) raise(Errc::invalid_argument, "migration needs distinct tiers");
  ObjectEngine& engine = store_.objects();
  const ObjectMeta meta = store_.meta(action.object);
  ObjectEngine::Quiet quiet(engine);

  Layout layout = meta.layout;
  SubLayout target;
  std::uint64_t extent_start = 0;
  if (auto* t = std::get_if<TieredLayout>(&layout.kind)) {
    auto it = std::find_if(t->entries.begin(), t->entries.end(),
                           [&](const TieredEntry& e) { return e.extent == action.extent; });
    if (it == t->entries.end()) raise(Errc::extent_outside_layout, "no such extent");
    target = place(it->layout, action.to);
    it->layout = target;
    extent_start = it->extent.start_block;
  } else {
    if (action.extent.start_block != 0) raise(Errc::extent_outside_layout, "no such extent");
    target = place(to_sublayout(resolve(layout, 0).layout), action.to);
    layout = std::visit([](const auto& s) { return Layout{s}; }, target);
  }

  const std::uint64_t count =
      std::holds_alternative<TieredLayout>(meta.layout.kind) ? action.extent.block_count : meta.size_blocks;
  Bytes data = store_.read(ctx, action.object, extent_start, count);
  auto units = build_units(target, extent_start, data, meta.block_size);

  Txn txn = store_.begin();
  txn.push(op::Relayout{action.object, layout, std::move(units)});
  store_.commit(ctx, txn);

  if (auto* addb = store_.addb())
    addb->emit(ctx.now, ctx.node, telemetry::Subsystem::hsm, "migrate", static_cast<double>(data.size()),
               {{"obj", action.object.to_string()},
                {"extent", std::to_string(extent_start)},
                {"from", std::to_string(action.from)},
                {"to", std::to_string(action.to)}});
}

std::vector<MigrationAction> HsmEngine::run_pass(IoCtx& ctx) {
  std::vector<MigrationAction> applied;
  for (const auto& a : evaluate(ctx.now)) {
    try {
      migrate(ctx, a);
      applied.push_back(a);
    } catch (const Error& e) {
      if (e.code() != Errc::target_full) throw;
    }
  }
  return applied;
}

}  // namespace sage::hsm
