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

#include "sage/ha/ha.hpp"

#include <algorithm>
#include <map>

namespace sage::ha {
namespace {

bool transient(EventKind k) { return k == EventKind::io_error || k == EventKind::timeout; }

std::string join(const std::vector<ObjectId>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ',';
    out += id.to_string();
  }
  return out;
}

void substitute(std::vector<DeviceId>& devices, DeviceId from, DeviceId to) {
  std::replace(devices.begin(), devices.end(), from, to);
}

Layout substitute(Layout layout, DeviceId from, DeviceId to) {
  auto fix = [&](auto& l) {
    using T = std::decay_t<decltype(l)>;
    if constexpr (std::is_same_v<T, TieredLayout>) {
      for (auto& e : l.entries) std::visit([&](auto& s) { substitute(s.devices, from, to); }, e.layout);
    } else {
      substitute(l.devices, from, to);
    }
  };
  std::visit(fix, layout.kind);
  return layout;
}

}  // namespace

std::string_view to_string(SourceKind k) noexcept {
  switch (k) {
    case SourceKind::device: return "device";
    case SourceKind::node: return "node";
    case SourceKind::service: return "service";
  }
  return "?";
}

std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::io_error: return "io_error";
    case EventKind::timeout: return "timeout";
    case EventKind::crash: return "crash";
    case EventKind::offline: return "offline";
  }
  return "?";
}

std::string_view to_string(RepairProcedure::Kind k) noexcept {
  switch (k) {
    case RepairProcedure::Kind::none: return "none";
    case RepairProcedure::Kind::rebuild_device: return "rebuild_device";
    case RepairProcedure::Kind::re_replicate: return "re_replicate";
    case RepairProcedure::Kind::mark_permanent_loss: return "mark_permanent_loss";
  }
  return "?";
}

RepairLoss::RepairLoss(DeviceId target, std::vector<ObjectId> objects)
    : Error(Errc::unrecoverable_loss, "device " + std::to_string(target) + ": " + join(objects)),
      objects_(std::move(objects)) {}

bool EventHistory::ingest(const FailureEvent& e) {
  auto pos = std::lower_bound(events_.begin(), events_.end(), e,
                              [](const FailureEvent& a, const FailureEvent& b) { return a.key() < b.key(); });
  if (pos != events_.end() && pos->key() == e.key()) return false;
  events_.insert(pos, e);
  latest_ = std::max(latest_, e.t);
  prune(latest_);
  return true;
}

void EventHistory::prune(VTime now) {
  const VTime horizon = now - window_;
  events_.erase(std::remove_if(events_.begin(), events_.end(), [&](const FailureEvent& e) { return e.t < horizon; }),
                events_.end());
}

std::vector<DeviceId> declared_failed(const EventHistory& history, const Thresholds& thresholds) {
  std::map<DeviceId, std::uint32_t> transient_count;
  std::set<DeviceId> declared;
  const VTime horizon = history.latest() - thresholds.window;
  for (const auto& e : history.events()) {
    if (e.source_kind != SourceKind::device || e.t < horizon) continue;
    const auto d = static_cast<DeviceId>(e.source);
    if (transient(e.kind)) {
      if (++transient_count[d] >= thresholds.k) declared.insert(d);
    } else {
      declared.insert(d);
    }
  }
  return {declared.begin(), declared.end()};
}

RepairProcedure decide(const EventHistory& history, const Thresholds& thresholds, const SpareLookup& spare_for,
                       const std::set<DeviceId>& handled) {
  for (DeviceId d : declared_failed(history, thresholds)) {
    if (handled.count(d) != 0) continue;
    RepairProcedure p;
    p.target = d;
    p.spare = spare_for ? spare_for(d) : std::nullopt;
    p.kind = p.spare ? RepairProcedure::Kind::rebuild_device : RepairProcedure::Kind::re_replicate;
    return p;
  }
  return {};
}

RepairReport execute_repair(IoCtx& ctx, Store& store, const RepairProcedure& procedure) {
  RepairReport report;
  report.started = ctx.now;
  report.finished = ctx.now;
  using Kind = RepairProcedure::Kind;
  if (procedure.kind == Kind::none) return report;
  if (procedure.kind == Kind::mark_permanent_loss) throw RepairLoss(procedure.target, procedure.objects);

  DevicePool& pool = store.pool();
  ObjectEngine& engine = store.objects();
  Device& target = pool.get(procedure.target);
  if (target.online()) target.fail();
  if (procedure.kind == Kind::rebuild_device && !procedure.spare)
    raise(Errc::invalid_argument, "rebuild needs a spare");

  ObjectEngine::Quiet quiet(engine);
  std::vector<ObjectId> lost;
  for (const ObjectId& id : engine.objects_on_device(procedure.target)) {
    const ObjectMeta meta = engine.meta(id);
    const auto used = devices_of(meta.layout);
    std::optional<DeviceId> replacement = procedure.spare;
    if (procedure.kind == Kind::re_replicate) {
      std::uint64_t best_free = 0;
      for (DeviceId d : pool.in_tier(target.tier())) {
        const Device& dev = pool.get(d);
        if (!dev.online() || std::find(used.begin(), used.end(), d) != used.end()) continue;
        if (!replacement || dev.free_blocks() > best_free) {
          replacement = d;
          best_free = dev.free_blocks();
        }
      }
    }
    if (!replacement) {
      lost.push_back(id);
      continue;
    }
    const auto keys = engine.units_on_device(id, procedure.target);
    std::map<UnitKey, Bytes> contents;
    try {
      contents = engine.fetch_units(ctx, id, keys, MsgKind::data_recon);
    } catch (const Error& e) {
      if (e.code() != Errc::unrecoverable_loss) throw;
      lost.push_back(id);
      continue;
    }
    std::vector<UnitWrite> units;
    for (auto& [key, data] : contents) {
      report.bytes += data.size();
      units.push_back({UnitKey{key.extent_start, *replacement, key.row}, std::move(data)});
    }
    report.units += units.size();
    Txn txn = store.begin();
    txn.push(op::Relayout{id, substitute(meta.layout, procedure.target, *replacement), std::move(units)});
    store.commit(ctx, txn);
    ++report.objects;
  }
  if (procedure.spare) pool.get(*procedure.spare).set_spare(false);
  report.finished = ctx.now;

  if (auto* addb = store.addb())
    addb->emit(ctx.now, ctx.node, telemetry::Subsystem::ha, "repair", static_cast<double>(report.bytes),
               {{"kind", std::string(to_string(procedure.kind))},
                {"dev", std::to_string(procedure.target)},
                {"objects", std::to_string(report.objects)}});
  if (!lost.empty()) {
    if (auto* addb = store.addb())
      addb->emit(ctx.now, ctx.node, telemetry::Subsystem::ha, "permanent_loss", static_cast<double>(lost.size()),
                 {{"dev", std::to_string(procedure.target)}, {"objects", join(lost)}});
    throw RepairLoss(procedure.target, std::move(lost));
  }
  return report;
}

Monitor::Monitor(Store& store, Thresholds thresholds)
    : store_(store), thresholds_(thresholds), history_(thresholds.window) {}

FailureEvent Monitor::make_event(VTime t, SourceKind source_kind, std::uint64_t source, EventKind kind) {
  return FailureEvent{t, source_kind, source, next_seq_++, kind};
}

void Monitor::ingest(const FailureEvent& e) {
  if (!history_.ingest(e)) return;
  if (auto* addb = store_.addb())
    addb->emit(e.t, store_.config().meta_node, telemetry::Subsystem::ha, "event", 1.0,
               {{"source", std::string(to_string(e.source_kind)) + ":" + std::to_string(e.source)},
                {"kind", std::string(to_string(e.kind))},
                {"seq", std::to_string(e.seq)}});
}

std::vector<RepairProcedure> Monitor::step(IoCtx& ctx) {
  std::vector<RepairProcedure> ran;
  DevicePool& pool = store_.pool();
  auto spare_for = [&](DeviceId d) -> std::optional<DeviceId> {
    if (!pool.contains(d)) return std::nullopt;
    for (DeviceId s : pool.spares(pool.get(d).tier()))
      if (pool.get(s).online()) return s;
    return std::nullopt;
  };
  for (;;) {
    RepairProcedure p = decide(history_, thresholds_, spare_for, handled_);
    if (p.kind == RepairProcedure::Kind::none) break;
    handled_.insert(p.target);
    if (!pool.contains(p.target)) continue;
    try {
      execute_repair(ctx, store_, p);
    } catch (const RepairLoss& loss) {
      lost_.insert(lost_.end(), loss.objects().begin(), loss.objects().end());
      p.objects = loss.objects();
    }
    ran.push_back(std::move(p));
  }
  return ran;
}

}  // namespace sage::ha
