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

#include "sage/store/store.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "sage/common/error.hpp"

namespace sage {
namespace {

constexpr std::string_view kSnapMagic = "SAGESNP1";
constexpr std::uint64_t kObjectIdHi = 0x5341474500000000ull;

}  // namespace

Bytes object_key(const ObjectId& id) {
  // big-endian so index order matches id order
  Bytes k(16);
  for (int i = 0; i < 8; ++i) {
    k[i] = static_cast<std::uint8_t>(id.hi >> (56 - 8 * i));
    k[8 + i] = static_cast<std::uint8_t>(id.lo >> (56 - 8 * i));
  }
  return k;
}

Store::Store(StoreConfig config, DevicePool& pool, Fabric& fabric, telemetry::Addb* addb)
    : config_(std::move(config)),
      pool_(pool),
      fabric_(fabric),
      addb_(addb),
      objects_(pool, fabric, addb),
      log_((std::filesystem::create_directories(config_.dir), config_.dir / "txn.log"), config_.sync_writes) {
  validate_profile(config_.log_profile);
  IoCtx ctx{config_.meta_node, 0.0};
  recover(ctx);
  stats_ = {};
}

void Store::emit(const IoCtx& ctx, std::string metric, double value, telemetry::Tags tags) {
  if (addb_ != nullptr) addb_->emit(ctx.now, ctx.node, telemetry::Subsystem::txn, std::move(metric), value, std::move(tags));
}

void Store::check_live() const {
  if (crashed_) raise(Errc::node_down, "metadata node " + std::to_string(config_.meta_node) + " is down");
}

Txn Store::begin() {
  check_live();
  return Txn(next_txn_++);
}

ObjectId Store::new_object_id() { return ObjectId{kObjectIdHi, next_object_seq_++}; }
IndexId Store::alloc_index_id() { return next_index_++; }
ContainerId Store::alloc_container_id() { return next_container_++; }

void Store::abort(Txn& txn) {
  if (txn.state_ != TxnState::open) raise(Errc::invalid_state, "txn " + std::to_string(txn.id()) + " is not open");
  txn.state_ = TxnState::aborted;
  ++stats_.aborts;
}

bool Store::ever_existed(const ObjectId& id) const {
  const Bytes key = object_key(id);
  return kv_.records(kObjectsIndex).count(key) != 0;
}

void Store::validate(const Txn& txn, NodeId from) const {
  std::map<ObjectId, ObjectMeta> created;
  std::set<ObjectId> deleted;
  std::set<IndexId> new_indices;
  std::set<ContainerId> new_containers;
  std::map<std::pair<ContainerId, ObjectId>, bool> membership;
  CapacityBudget budget;
  CapacityBudget relayout_budget;

  auto object_live = [&](const ObjectId& id) {
    if (deleted.count(id) != 0) return false;
    return created.count(id) != 0 || objects_.exists(id);
  };
  auto need_object = [&](const ObjectId& id) {
    if (!object_live(id)) raise(Errc::unknown_object, id.to_string());
  };
  auto need_index = [&](IndexId id) {
    if (!kv_.contains(id) && new_indices.count(id) == 0) raise(Errc::unknown_index, std::to_string(id));
  };
  auto need_container = [&](ContainerId id) {
    if (!containers_.contains(id) && new_containers.count(id) == 0)
      raise(Errc::unknown_container, std::to_string(id));
  };
  auto is_member = [&](ContainerId c, const ObjectId& o) {
    if (auto it = membership.find({c, o}); it != membership.end()) return it->second;
    return containers_.contains(c) && containers_.get(c).members.count(o) != 0;
  };

  for (const auto& any : txn.ops()) {
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, op::ObjCreate>) {
            if (object_live(o.meta.id) || ever_existed(o.meta.id) || deleted.count(o.meta.id) != 0)
              raise(Errc::already_exists, o.meta.id.to_string());
            try {
              validate_block_size(o.meta.block_size);
            } catch (const Error& e) {
              raise(Errc::invalid_layout, e.what());
            }
            validate_layout(o.meta.layout);
            for (DeviceId d : devices_of(o.meta.layout))
              if (!pool_.contains(d)) raise(Errc::invalid_layout, "unknown device " + std::to_string(d));
            created[o.meta.id] = o.meta;
          } else if constexpr (std::is_same_v<T, op::ObjDelete>) {
            need_object(o.id);
            created.erase(o.id);
            deleted.insert(o.id);
          } else if constexpr (std::is_same_v<T, op::ObjWrite>) {
            need_object(o.id);
            const ObjectMeta& m = created.count(o.id) ? created.at(o.id) : objects_.meta(o.id);
            if (o.data.size() % m.block_size != 0)
              raise(Errc::bad_length, std::to_string(o.data.size()) + " bytes is not a whole number of blocks");
            const std::uint64_t n = o.data.size() / m.block_size;
            if (created.count(o.id) != 0 || !objects_.exists(o.id))
              objects_.check_new_write(m, o.start_block, n, from, budget);
            else
              objects_.check_write(o.id, o.start_block, n, from, budget);
          } else if constexpr (std::is_same_v<T, op::IdxCreate>) {
            if (kv_.contains(o.id) || new_indices.count(o.id) != 0)
              raise(Errc::already_exists, "index " + std::to_string(o.id));
            new_indices.insert(o.id);
          } else if constexpr (std::is_same_v<T, op::IdxPut>) {
            need_index(o.id);
            for (const auto& r : o.records) validate_key(r.key);
          } else if constexpr (std::is_same_v<T, op::IdxDel>) {
            need_index(o.id);
          } else if constexpr (std::is_same_v<T, op::Relayout>) {
            need_object(o.id);
            validate_layout(o.layout);
            objects_.check_units(o.units, from, relayout_budget);
          } else if constexpr (std::is_same_v<T, op::ContainerCreate>) {
            if (containers_.contains(o.id) || new_containers.count(o.id) != 0)
              raise(Errc::already_exists, "container " + std::to_string(o.id));
            new_containers.insert(o.id);
          } else if constexpr (std::is_same_v<T, op::ContainerAdd>) {
            need_container(o.id);
            need_object(o.object);
            membership[{o.id, o.object}] = true;
          } else if constexpr (std::is_same_v<T, op::ContainerRemove>) {
            need_container(o.id);
            if (!is_member(o.id, o.object)) raise(Errc::unknown_object, o.object.to_string());
            membership[{o.id, o.object}] = false;
          }
        },
        any);
  }
  objects_.check_budget(budget, Errc::out_of_capacity);
  objects_.check_budget(relayout_budget, Errc::target_full);
}

void Store::touch_meta(const ObjectId& id) {
  ByteWriter w;
  encode_meta(w, objects_.meta(id));
  std::vector<Record> rec{{object_key(id), w.take()}};
  kv_.put(kObjectsIndex, rec);
}

void Store::apply(IoCtx& ctx, const TxnOp& any) {
  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, op::ObjCreate>) {
          objects_.create(o.meta);
          touch_meta(o.meta.id);
          if (o.meta.id.hi == kObjectIdHi) next_object_seq_ = std::max(next_object_seq_, o.meta.id.lo + 1);
        } else if constexpr (std::is_same_v<T, op::ObjDelete>) {
          objects_.remove(o.id);
          containers_.forget_object(o.id);
          std::vector<Record> tomb{{object_key(o.id), {}}};
          kv_.put(kObjectsIndex, tomb);
        } else if constexpr (std::is_same_v<T, op::ObjWrite>) {
          const std::uint64_t before = objects_.meta(o.id).size_blocks;
          objects_.write(ctx, o.id, o.start_block, o.data);
          if (objects_.meta(o.id).size_blocks != before) touch_meta(o.id);
        } else if constexpr (std::is_same_v<T, op::IdxCreate>) {
          kv_.create(o.id, o.name);
          next_index_ = std::max(next_index_, o.id + 1);
        } else if constexpr (std::is_same_v<T, op::IdxPut>) {
          kv_.put(o.id, o.records);
        } else if constexpr (std::is_same_v<T, op::IdxDel>) {
          kv_.del(o.id, o.keys);
        } else if constexpr (std::is_same_v<T, op::Relayout>) {
          objects_.relayout(ctx, o.id, o.layout, o.units);
          touch_meta(o.id);
        } else if constexpr (std::is_same_v<T, op::ContainerCreate>) {
          containers_.create_with_id(o.id, o.label, o.hint);
          next_container_ = std::max(next_container_, o.id + 1);
        } else if constexpr (std::is_same_v<T, op::ContainerAdd>) {
          containers_.add_member(o.id, o.object);
        } else if constexpr (std::is_same_v<T, op::ContainerRemove>) {
          containers_.remove_member(o.id, o.object);
        }
      },
      any);
}

VTime Store::log_io(NodeId from, std::uint64_t bytes, VTime at) {
  VTime arrive = fabric_.transfer(from, config_.meta_node, bytes, MsgKind::txn_log, at);
  const auto& p = config_.log_profile;
  log_busy_ = std::max(log_busy_, arrive) + p.latency + static_cast<double>(bytes) / p.write_bw;
  return fabric_.transfer(config_.meta_node, from, 0, MsgKind::control, log_busy_);
}

void Store::commit(IoCtx& ctx, Txn& txn) {
  check_live();
  if (txn.state_ != TxnState::open) raise(Errc::invalid_state, "txn " + std::to_string(txn.id()) + " is not open");
  validate(txn, ctx.node);
  if (!fabric_.reachable(ctx.node, config_.meta_node)) {
    txn.state_ = TxnState::aborted;
    ++stats_.aborts;
    raise(Errc::log_write_failed, "log on node " + std::to_string(config_.meta_node) + " unreachable");
  }

  const std::uint64_t lsn = lsn_ + 1;
  std::uint64_t bytes = 0;
  try {
    bytes = log_.append(txn.id(), lsn, txn.ops(), plan_.log_bytes);
  } catch (const SimulatedCrash&) {
    crash();
    throw;
  } catch (const Error&) {
    txn.state_ = TxnState::aborted;
    ++stats_.aborts;
    throw;
  }
  lsn_ = lsn;
  txn.state_ = TxnState::committed;
  ctx.now = log_io(ctx.node, bytes, ctx.now);
  emit(ctx, "commit", static_cast<double>(bytes), {{"txn", std::to_string(txn.id())}, {"ops", std::to_string(txn.ops().size())}});

  for (const auto& o : txn.ops()) {
    if (plan_.apply_ops) {
      if (*plan_.apply_ops == 0) {
        crash();
        throw SimulatedCrash("crash during apply of txn " + std::to_string(txn.id()));
      }
      --*plan_.apply_ops;
    }
    apply(ctx, o);
  }
  ++stats_.commits;
  if (log_.size() > config_.log_cap_bytes) checkpoint(ctx);
}

void Store::commit_one(IoCtx& ctx, TxnOp op) {
  Txn txn = begin();
  txn.push(std::move(op));
  commit(ctx, txn);
}

void Store::crash() {
  crashed_ = true;
  objects_.clear();
  kv_.clear();
  containers_ = ContainerRegistry{};
}

void Store::bootstrap() {
  kv_.create(kObjectsIndex, "sys.objects");
  kv_.create(kWindowsIndex, "sys.windows");
}

void Store::checkpoint(IoCtx& ctx) {
  check_live();
  ByteWriter w;
  w.raw(kSnapMagic);
  w.u64(lsn_);
  w.u64(next_txn_);
  w.u64(next_object_seq_);
  w.u64(next_index_);
  w.u64(next_container_);
  objects_.encode(w);
  containers_.encode(w);
  kv_.encode(w);
  const std::uint64_t sum = fnv1a64(w.bytes());
  w.u64(sum);
  const Bytes& buf = w.bytes();

  const auto tmp = snapshot_path().string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) raise(Errc::log_write_failed, "cannot write " + tmp);
  }
  std::filesystem::rename(tmp, snapshot_path());
  log_.reset();
  ctx.now = log_io(ctx.node, buf.size(), ctx.now);
  ++stats_.checkpoints;
  emit(ctx, "checkpoint", static_cast<double>(buf.size()), {{"lsn", std::to_string(lsn_)}});
}

void Store::recover(IoCtx& ctx) {
  objects_.clear();
  kv_.clear();
  containers_ = ContainerRegistry{};
  lsn_ = 0;
  next_txn_ = 1;
  next_object_seq_ = 1;
  next_index_ = kFirstUserIndex;
  next_container_ = 1;

  std::uint64_t snap_lsn = 0;
  if (std::filesystem::exists(snapshot_path())) {
    std::ifstream in(snapshot_path(), std::ios::binary);
    Bytes buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < kSnapMagic.size() + 8) raise(Errc::corrupt, "snapshot too short");
    ByteView body(buf.data(), buf.size() - 8);
    if (fnv1a64(body) != load_le64(buf.data() + body.size())) raise(Errc::corrupt, "snapshot checksum mismatch");
    ByteReader r(body);
    if (to_string(r.raw(kSnapMagic.size())) != kSnapMagic) raise(Errc::corrupt, "bad snapshot magic");
    snap_lsn = r.u64();
    next_txn_ = r.u64();
    next_object_seq_ = r.u64();
    next_index_ = r.u64();
    next_container_ = r.u64();
    objects_.decode(r);
    containers_ = ContainerRegistry::decode(r);
    kv_ = KvStore::decode(r);
    lsn_ = snap_lsn;
  } else {
    bootstrap();
  }

  TxnLog::Scan scan = log_.scan();
  if (scan.torn) {
    log_.truncate_to(scan.valid_bytes);
    ++stats_.torn_tails;
  }
  crashed_ = false;
  std::uint64_t replayed = 0;
  ObjectEngine::Quiet quiet(objects_);
  ObjectEngine::Direct direct(objects_);
  for (const auto& t : scan.committed) {
    next_txn_ = std::max(next_txn_, t.id + 1);
    if (t.lsn <= snap_lsn) continue;
    for (const auto& o : t.ops) apply(ctx, o);
    lsn_ = std::max(lsn_, t.lsn);
    ++replayed;
  }
  stats_.replayed_txns += replayed;
  ++stats_.recoveries;
  emit(ctx, "recover", static_cast<double>(replayed), {{"torn", scan.torn ? "1" : "0"}});
}

std::uint64_t Store::state_hash() {
  check_live();
  ByteWriter w;
  kv_.encode(w);
  containers_.encode(w);
  std::uint64_t h = fnv1a64(w.bytes());
  IoCtx ctx{config_.meta_node, 0.0};
  ObjectEngine::Quiet quiet(objects_);
  ObjectEngine::Direct direct(objects_);
  for (const ObjectId& id : objects_.objects()) {
    const ObjectMeta& m = objects_.meta(id);
    ByteWriter mw;
    encode_meta(mw, m);
    h = fnv1a64(mw.bytes(), h);
    try {
      h = fnv1a64(objects_.read(ctx, id, 0, m.size_blocks), h);
    } catch (const Error& e) {
      h = fnv1a64(to_string(e.code()), h);
    }
  }
  return h;
}

ObjectMeta Store::create_object(IoCtx& ctx, std::uint64_t block_size, Layout layout, std::optional<ObjectId> id) {
  check_live();
  ObjectMeta m;
  m.id = id ? *id : new_object_id();
  m.block_size = block_size;
  m.layout = std::move(layout);
  m.created_at = ctx.now;
  commit_one(ctx, op::ObjCreate{m});
  return objects_.meta(m.id);
}

void Store::write(IoCtx& ctx, const ObjectId& id, std::uint64_t start_block, ByteView data) {
  commit_one(ctx, op::ObjWrite{id, start_block, Bytes(data.begin(), data.end())});
}

Bytes Store::read(IoCtx& ctx, const ObjectId& id, std::uint64_t start_block, std::uint64_t block_count) {
  check_live();
  return objects_.read(ctx, id, start_block, block_count);
}

void Store::delete_object(IoCtx& ctx, const ObjectId& id) { commit_one(ctx, op::ObjDelete{id}); }

const ObjectMeta& Store::meta(const ObjectId& id) const {
  check_live();
  return objects_.meta(id);
}

bool Store::exists(const ObjectId& id) const { return !crashed_ && objects_.exists(id); }

IndexId Store::create_index(IoCtx& ctx, std::string name) {
  check_live();
  const IndexId id = alloc_index_id();
  commit_one(ctx, op::IdxCreate{id, std::move(name)});
  return id;
}

void Store::put(IoCtx& ctx, IndexId index, std::vector<Record> records) {
  commit_one(ctx, op::IdxPut{index, std::move(records)});
}

std::vector<bool> Store::del(IoCtx& ctx, IndexId index, std::vector<Bytes> keys) {
  check_live();
  std::vector<bool> found;
  found.reserve(keys.size());
  const auto present = kv_.get(index, keys);
  // a key repeated in one batch is found only once
  std::set<Bytes> seen;
  for (std::size_t i = 0; i < keys.size(); ++i) found.push_back(present[i].has_value() && seen.insert(keys[i]).second);
  commit_one(ctx, op::IdxDel{index, std::move(keys)});
  return found;
}

std::vector<std::optional<Bytes>> Store::get(IoCtx& ctx, IndexId index, std::span<const Bytes> keys) {
  check_live();
  auto out = kv_.get(index, keys);
  std::uint64_t bytes = 0;
  for (const auto& v : out) bytes += v ? v->size() : 0;
  VTime at = fabric_.transfer(ctx.node, config_.meta_node, 0, MsgKind::index, ctx.now);
  ctx.now = fabric_.transfer(config_.meta_node, ctx.node, bytes, MsgKind::index, at);
  return out;
}

std::vector<std::vector<Record>> Store::next(IoCtx& ctx, IndexId index, std::span<const Bytes> keys,
                                             std::size_t count) {
  check_live();
  auto out = kv_.next(index, keys, count);
  std::uint64_t bytes = 0;
  for (const auto& batch : out)
    for (const auto& r : batch) bytes += r.key.size() + r.value.size();
  VTime at = fabric_.transfer(ctx.node, config_.meta_node, 0, MsgKind::index, ctx.now);
  ctx.now = fabric_.transfer(config_.meta_node, ctx.node, bytes, MsgKind::index, at);
  return out;
}

ContainerId Store::create_container(IoCtx& ctx, std::string label, std::optional<TierId> hint) {
  check_live();
  const ContainerId id = alloc_container_id();
  commit_one(ctx, op::ContainerCreate{id, std::move(label), hint});
  return id;
}

void Store::add_member(IoCtx& ctx, ContainerId container, const ObjectId& object) {
  commit_one(ctx, op::ContainerAdd{container, object});
}

void Store::remove_member(IoCtx& ctx, ContainerId container, const ObjectId& object) {
  commit_one(ctx, op::ContainerRemove{container, object});
}

std::vector<ObjectId> Store::list_members(ContainerId container) const {
  check_live();
  return containers_.list_members(container);
}

}  // namespace sage
