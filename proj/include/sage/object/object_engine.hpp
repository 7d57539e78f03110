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

#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sage/common/bytes.hpp"
#include "sage/common/fabric.hpp"
#include "sage/common/types.hpp"
#include "sage/core/block.hpp"
#include "sage/core/ids.hpp"
#include "sage/core/layout.hpp"
#include "sage/telemetry/addb.hpp"
#include "sage/tier/device.hpp"

namespace sage {

struct ObjectMeta {
  ObjectId id;
  std::uint64_t block_size = 4096;
  Layout layout;
  std::uint64_t size_blocks = 0;
  VTime created_at = 0;

  BlockSpec spec() const { return BlockSpec(block_size); }
  std::uint64_t size_bytes() const noexcept { return size_blocks * block_size; }
};

void encode_meta(ByteWriter& w, const ObjectMeta& meta);
ObjectMeta decode_meta(ByteReader& r);

// Identifies one stored unit of an object.
struct UnitKey {
  std::uint64_t extent_start = 0;
  DeviceId device = 0;
  std::uint64_t row = 0;
  auto operator<=>(const UnitKey&) const = default;
};

constexpr std::uint64_t kNoBlock = std::numeric_limits<std::uint64_t>::max();

// Where a unit lives on its device. A stale unit missed a write while its
// device was unavailable and must be reconstructed, never read.
struct UnitEntry {
  std::uint64_t physical = kNoBlock;
  bool stale = false;
};

struct UnitWrite {
  UnitKey key;
  Bytes data;
};

// Per-device block allocations a pending operation will need.
using CapacityBudget = std::map<DeviceId, std::uint64_t>;

// Block-granular objects over the device pool. Methods here apply effects
// directly; callers that need atomicity go through the transactional Store.
// Single writer per object.
class ObjectEngine {
 public:
  ObjectEngine(DevicePool& pool, Fabric& fabric, telemetry::Addb* addb = nullptr);

  bool exists(const ObjectId& id) const noexcept { return objects_.count(id) != 0; }
  const ObjectMeta& meta(const ObjectId& id) const;
  std::vector<ObjectId> objects() const;

  void create(const ObjectMeta& meta);
  void write(IoCtx& ctx, const ObjectId& id, std::uint64_t start_block, ByteView data);
  Bytes read(IoCtx& ctx, const ObjectId& id, std::uint64_t start_block, std::uint64_t block_count);
  void remove(const ObjectId& id);

  // Swaps the layout and installs `units` (already encoded for the new
  // layout). Units of devices or extents the new layout no longer uses are
  // released.
  void relayout(IoCtx& ctx, const ObjectId& id, const Layout& layout, std::span<const UnitWrite> units);

  // Pre-commit validation of a write: device availability and capacity.
  // Accumulates required allocations into `budget`.
  void check_write(const ObjectId& id, std::uint64_t start_block, std::uint64_t block_count, NodeId from,
                   CapacityBudget& budget) const;
  // Same check for an object that does not exist yet (created in the same txn).
  void check_new_write(const ObjectMeta& meta, std::uint64_t start_block, std::uint64_t block_count, NodeId from,
                       CapacityBudget& budget) const;
  void check_units(std::span<const UnitWrite> units, NodeId from, CapacityBudget& budget) const;
  void check_budget(const CapacityBudget& budget, Errc error) const;

  // Unit-level access for repair and function shipping.
  std::optional<UnitEntry> entry(const ObjectId& id, const UnitKey& key) const;
  std::vector<UnitKey> units_on_device(const ObjectId& id, DeviceId device) const;
  std::vector<ObjectId> objects_on_device(DeviceId device) const;
  bool unit_available(const UnitKey& key, const UnitEntry& entry, NodeId from) const;
  UnitRole role_of(const ObjectId& id, const UnitKey& key) const;

  // Contents of `keys`, reconstructing unavailable striped units from their
  // row peers. Throws unrecoverable_loss when more units are missing than
  // the layout tolerates.
  std::map<UnitKey, Bytes> fetch_units(IoCtx& ctx, const ObjectId& id, std::span<const UnitKey> keys,
                                       MsgKind kind = MsgKind::data_read);

  // The unit that serves block `block` for computation: the data unit for
  // striped layouts, the first usable replica for mirrored ones.
  struct BlockHome {
    std::uint64_t block;
    UnitKey key;
    bool written;    // an entry exists
    bool available;  // readable without reconstruction from `from`
  };
  std::vector<BlockHome> block_homes(const ObjectId& id, NodeId from) const;

  void on_device_wiped(DeviceId device);

  void encode(ByteWriter& w) const;
  // Replaces all state and re-claims device allocations.
  void decode(ByteReader& r);
  void clear();

  DevicePool& pool() noexcept { return pool_; }
  Fabric& fabric() noexcept { return fabric_; }

  // Suppresses object-level read/write telemetry while alive, so internal
  // copies (migration, repair, hashing) do not count as accesses.
  class Quiet {
   public:
    explicit Quiet(ObjectEngine& e) : e_(e) { ++e_.quiet_; }
    ~Quiet() { --e_.quiet_; }
    Quiet(const Quiet&) = delete;
    Quiet& operator=(const Quiet&) = delete;

   private:
    ObjectEngine& e_;
  };

  // Device I/O goes straight to online devices, skipping the fabric, while
  // alive. Used to redo logged writes during recovery: a device's backing
  // file outlives its node's crash.
  class Direct {
   public:
    explicit Direct(ObjectEngine& e) : e_(e) { ++e_.direct_; }
    ~Direct() { --e_.direct_; }
    Direct(const Direct&) = delete;
    Direct& operator=(const Direct&) = delete;

   private:
    ObjectEngine& e_;
  };

 private:
  struct ObjectState {
    ObjectMeta meta;
    std::map<UnitKey, UnitEntry> units;
  };

  ObjectState& state(const ObjectId& id);
  const ObjectState& state(const ObjectId& id) const;

  void check_write_impl(const ObjectMeta& meta, const std::map<UnitKey, UnitEntry>& units, std::uint64_t start_block,
                        std::uint64_t block_count, NodeId from, CapacityBudget& budget) const;

  // Keys of every unit (data and parity) in the row containing `key`.
  std::vector<UnitKey> row_peers(const ObjectState& st, const UnitKey& key) const;

  // Batched per-device reads of units known to be available.
  void read_units(IoCtx& ctx, const ObjectState& st, std::span<const UnitKey> keys, MsgKind kind,
                  std::map<UnitKey, Bytes>& out);
  // Batched per-device writes. Units on unavailable devices are marked stale.
  void write_units(IoCtx& ctx, ObjectState& st, std::vector<UnitWrite>& units);

  void emit(const IoCtx& ctx, std::string metric, double value, telemetry::Tags tags);
  bool reachable(NodeId from, NodeId to) const { return direct_ > 0 || fabric_.reachable(from, to); }
  VTime send(NodeId from, NodeId to, std::uint64_t bytes, MsgKind kind, VTime at) {
    return direct_ > 0 ? at : fabric_.transfer(from, to, bytes, kind, at);
  }

  DevicePool& pool_;
  Fabric& fabric_;
  telemetry::Addb* addb_;
  std::map<ObjectId, ObjectState> objects_;
  int quiet_ = 0;
  int direct_ = 0;
};

// Encodes relative blocks [0, n) of `data` for `sub` into units, skipping
// rows that are entirely zero.
std::vector<UnitWrite> build_units(const SubLayout& sub, std::uint64_t extent_start, ByteView data,
                                   std::uint64_t block_size);

}  // namespace sage
