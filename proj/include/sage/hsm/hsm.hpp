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

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sage/core/ids.hpp"
#include "sage/core/layout.hpp"
#include "sage/store/store.hpp"
#include "sage/telemetry/addb.hpp"

namespace sage::hsm {

enum class AccessKind { read, write };

struct ExtentKey {
  ObjectId object;
  std::uint64_t extent_start = 0;
  auto operator<=>(const ExtentKey&) const = default;
};

// Counters plus an exponentially decayed access rate: each access first
// decays the rate by exp(-lambda * dt), then adds lambda, with
// lambda = ln 2 / half_life. A steady stream of accesses at frequency f
// converges to roughly f accesses per second.
struct AccessStats {
  std::uint64_t read_count = 0;
  std::uint64_t write_count = 0;
  VTime last_access = 0;
  double rate = 0;  // as of last_access

  double rate_at(VTime t, double half_life) const noexcept;
};

class AccessTracker {
 public:
  explicit AccessTracker(double half_life = 100.0) : half_life_(half_life) {}

  const AccessStats& record(const ExtentKey& key, AccessKind kind, VTime t);
  std::optional<AccessStats> stats(const ExtentKey& key) const;
  void forget(const ObjectId& object);
  double half_life() const noexcept { return half_life_; }
  const std::map<ExtentKey, AccessStats>& all() const noexcept { return stats_; }

 private:
  double half_life_;
  std::map<ExtentKey, AccessStats> stats_;
};

struct Watermarks {
  double low = 0.70;
  double high = 0.90;
};

struct HsmPolicy {
  double promote_rate = 0.05;  // accesses per virtual second
  VTime demote_idle = 600;     // virtual seconds without access
  double half_life = 100;
  std::array<Watermarks, kTierCount> watermarks{};

  const Watermarks& marks(TierId tier) const { return watermarks.at(static_cast<std::size_t>(tier - kMinTier)); }
  // Throws Error(invalid_argument) unless 0 <= low < high <= 1 for every tier.
  void validate() const;
};

struct MigrationAction {
  ObjectId object;
  Extent extent;
  TierId from = 0;
  TierId to = 0;
  bool operator==(const MigrationAction&) const = default;
};

// One migratable unit as seen by the policy.
struct ExtentInfo {
  ExtentKey key;
  Extent extent;
  TierId tier = 0;
  std::uint64_t footprint_bytes = 0;
  AccessStats stats;
  bool tracked = false;  // false: never accessed since the tracker started
};

struct TierOccupancy {
  std::uint64_t used_bytes = 0;
  std::uint64_t capacity_bytes = 0;
};
using Occupancy = std::map<TierId, TierOccupancy>;

// Pure policy step. Idle extents move one tier down (coldest first), hot
// extents move to tier 1 (hottest first); a move is dropped when it would
// push its target above the high watermark. Tiers still above their high
// watermark afterwards shed their coldest extents down to the low mark.
std::vector<MigrationAction> evaluate(const HsmPolicy& policy, std::span<const ExtentInfo> extents,
                                      const Occupancy& occupancy, VTime now);

// Applies `actions` to `occupancy` using the footprints in `extents`.
Occupancy project(std::span<const MigrationAction> actions, std::span<const ExtentInfo> extents, Occupancy occupancy);

// Storage consumed by `block_count` blocks under `layout`.
std::uint64_t footprint(const SubLayout& layout, std::uint64_t block_count, std::uint64_t block_size);

class HsmEngine {
 public:
  HsmEngine(Store& store, HsmPolicy policy);
  ~HsmEngine();
  HsmEngine(const HsmEngine&) = delete;
  HsmEngine& operator=(const HsmEngine&) = delete;

  // Throws Error(unknown_object).
  const AccessStats& record_access(const ObjectId& object, std::uint64_t extent_start, AccessKind kind, VTime t);
  // Feeds record_access from object read/write telemetry.
  void subscribe(telemetry::Addb& addb);

  std::vector<ExtentInfo> survey() const;
  Occupancy occupancy() const;
  std::vector<MigrationAction> evaluate(VTime now) const;

  // Copies the extent onto devices of the target tier and swaps the layout
  // in one txn. Throws TargetFull or UnrecoverableLoss with no change.
  void migrate(IoCtx& ctx, const MigrationAction& action);
  // evaluate + migrate; returns actions applied. Actions that fail with
  // TargetFull are skipped.
  std::vector<MigrationAction> run_pass(IoCtx& ctx);

  const HsmPolicy& policy() const noexcept { return policy_; }
  AccessTracker& tracker() noexcept { return tracker_; }

 private:
  SubLayout place(const SubLayout& shape, TierId tier) const;

  Store& store_;
  HsmPolicy policy_;
  AccessTracker tracker_;
  telemetry::Addb* subscribed_ = nullptr;
  std::string plugin_id_;
};

}  // namespace sage::hsm
