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

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sage/common/fabric.hpp"
#include "sage/core/container.hpp"
#include "sage/kv/kv_store.hpp"
#include "sage/object/object_engine.hpp"
#include "sage/telemetry/addb.hpp"
#include "sage/tier/device.hpp"
#include "sage/txn/txn_log.hpp"

namespace sage {

// Reserved system indices.
constexpr IndexId kObjectsIndex = 1;  // object id -> encoded metadata, empty value = deleted
constexpr IndexId kWindowsIndex = 2;  // window name -> descriptor
constexpr IndexId kFirstUserIndex = 16;

struct StoreConfig {
  std::filesystem::path dir;
  NodeId meta_node = 0;
  std::uint64_t log_cap_bytes = 64ull << 20;
  bool sync_writes = false;
  DeviceProfile log_profile = default_profile(1);
};

struct StoreStats {
  std::uint64_t commits = 0;
  std::uint64_t aborts = 0;
  std::uint64_t recoveries = 0;
  std::uint64_t checkpoints = 0;
  std::uint64_t replayed_txns = 0;
  std::uint64_t torn_tails = 0;
};

// Objects, indices and containers behind one redo log. Every mutation goes
// through a committed Txn; the single-op helpers wrap one each.
class Store {
 public:
  Store(StoreConfig config, DevicePool& pool, Fabric& fabric, telemetry::Addb* addb = nullptr);

  Txn begin();
  // Validates, logs, then applies. Throws on validation failure (the txn
  // stays open) and LogWriteFailed when the log is unreachable (the txn is
  // aborted).
  void commit(IoCtx& ctx, Txn& txn);
  void abort(Txn& txn);

  ObjectId new_object_id();
  IndexId alloc_index_id();
  ContainerId alloc_container_id();

  ObjectMeta create_object(IoCtx& ctx, std::uint64_t block_size, Layout layout,
                           std::optional<ObjectId> id = std::nullopt);
  void write(IoCtx& ctx, const ObjectId& id, std::uint64_t start_block, ByteView data);
  Bytes read(IoCtx& ctx, const ObjectId& id, std::uint64_t start_block, std::uint64_t block_count);
  void delete_object(IoCtx& ctx, const ObjectId& id);
  const ObjectMeta& meta(const ObjectId& id) const;
  bool exists(const ObjectId& id) const;
  // True once `id` has been created, even if since deleted.
  bool ever_existed(const ObjectId& id) const;

  IndexId create_index(IoCtx& ctx, std::string name);
  void put(IoCtx& ctx, IndexId index, std::vector<Record> records);
  std::vector<std::optional<Bytes>> get(IoCtx& ctx, IndexId index, std::span<const Bytes> keys);
  std::vector<bool> del(IoCtx& ctx, IndexId index, std::vector<Bytes> keys);
  std::vector<std::vector<Record>> next(IoCtx& ctx, IndexId index, std::span<const Bytes> keys, std::size_t count);

  ContainerId create_container(IoCtx& ctx, std::string label, std::optional<TierId> hint = std::nullopt);
  void add_member(IoCtx& ctx, ContainerId container, const ObjectId& object);
  void remove_member(IoCtx& ctx, ContainerId container, const ObjectId& object);
  std::vector<ObjectId> list_members(ContainerId container) const;

  void set_crash_plan(CrashPlan plan) { plan_ = plan; }
  // Drops all volatile state. Device contents and the log survive.
  void crash();
  bool crashed() const noexcept { return crashed_; }
  // Loads the last checkpoint and replays committed txns in commit order.
  void recover(IoCtx& ctx);
  void checkpoint(IoCtx& ctx);
  // Hash of the logical state: indices, containers, object metadata and
  // object contents.
  std::uint64_t state_hash();

  ObjectEngine& objects() noexcept { return objects_; }
  const KvStore& kv() const noexcept { return kv_; }
  const ContainerRegistry& containers() const noexcept { return containers_; }
  DevicePool& pool() noexcept { return pool_; }
  Fabric& fabric() noexcept { return fabric_; }
  telemetry::Addb* addb() noexcept { return addb_; }
  const StoreConfig& config() const noexcept { return config_; }
  const StoreStats& stats() const noexcept { return stats_; }
  std::uint64_t log_bytes() const noexcept { return log_.size(); }

 private:
  void check_live() const;
  void validate(const Txn& txn, NodeId from) const;
  void apply(IoCtx& ctx, const TxnOp& op);
  void bootstrap();
  void touch_meta(const ObjectId& id);
  VTime log_io(NodeId from, std::uint64_t bytes, VTime at);
  void commit_one(IoCtx& ctx, TxnOp op);
  void emit(const IoCtx& ctx, std::string metric, double value, telemetry::Tags tags);
  std::filesystem::path snapshot_path() const { return config_.dir / "meta.snap"; }

  StoreConfig config_;
  DevicePool& pool_;
  Fabric& fabric_;
  telemetry::Addb* addb_;
  ObjectEngine objects_;
  KvStore kv_;
  ContainerRegistry containers_;
  TxnLog log_;
  CrashPlan plan_;
  StoreStats stats_;
  bool crashed_ = false;
  VTime log_busy_ = 0;
  TxnId next_txn_ = 1;
  std::uint64_t lsn_ = 0;
  std::uint64_t next_object_seq_ = 1;
  IndexId next_index_ = kFirstUserIndex;
  ContainerId next_container_ = 1;
};

Bytes object_key(const ObjectId& id);

}  // namespace sage
