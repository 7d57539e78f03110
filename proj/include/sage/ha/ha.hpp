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
#include <deque>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sage/common/error.hpp"
#include "sage/common/types.hpp"
#include "sage/core/ids.hpp"
#include "sage/store/store.hpp"

namespace sage::ha {

enum class SourceKind : std::uint8_t { device, node, service };
enum class EventKind : std::uint8_t { io_error, timeout, crash, offline };

std::string_view to_string(SourceKind k) noexcept;
std::string_view to_string(EventKind k) noexcept;

struct FailureEvent {
  VTime t = 0;
  SourceKind source_kind = SourceKind::device;
  std::uint64_t source = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::io_error;

  // Total order: (t, source, seq).
  auto key() const noexcept { return std::tuple(t, source_kind, source, seq); }
  bool operator==(const FailureEvent& o) const noexcept { return key() == o.key() && kind == o.kind; }
};

struct Thresholds {
  std::uint32_t k = 3;  // transient events per device within the window
  VTime window = 60;
};

// Events within the last `window` seconds, ordered, without duplicates.
class EventHistory {
 public:
  explicit EventHistory(VTime window = 60) : window_(window) {}

  // False when an event with the same (t, source, seq) is already held.
  bool ingest(const FailureEvent& e);
  void prune(VTime now);
  const std::vector<FailureEvent>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  VTime latest() const noexcept { return latest_; }

 private:
  VTime window_;
  VTime latest_ = 0;
  std::vector<FailureEvent> events_;
};

struct RepairProcedure {
  enum class Kind : std::uint8_t { none, rebuild_device, re_replicate, mark_permanent_loss };
  Kind kind = Kind::none;
  DeviceId target = 0;
  std::optional<DeviceId> spare;
  std::vector<ObjectId> objects;
  bool operator==(const RepairProcedure&) const = default;
};

std::string_view to_string(RepairProcedure::Kind k) noexcept;

// Devices the history declares failed: a crash or offline event, or at
// least k io_error/timeout events within the window ending at the latest
// event. Ascending device order.
std::vector<DeviceId> declared_failed(const EventHistory& history, const Thresholds& thresholds);

using SpareLookup = std::function<std::optional<DeviceId>(DeviceId)>;

// The procedure for the lowest declared device not in `handled`.
RepairProcedure decide(const EventHistory& history, const Thresholds& thresholds, const SpareLookup& spare_for,
                       const std::set<DeviceId>& handled = {});

struct RepairReport {
  std::uint64_t objects = 0;
  std::uint64_t units = 0;
  std::uint64_t bytes = 0;
  VTime started = 0;
  VTime finished = 0;
};

// UnrecoverableLoss carrying the objects that could not be rebuilt.
class RepairLoss : public Error {
 public:
  RepairLoss(DeviceId target, std::vector<ObjectId> objects);
  const std::vector<ObjectId>& objects() const noexcept { return objects_; }

 private:
  std::vector<ObjectId> objects_;
};

// Rebuilds every unit the target held onto the spare, or for re_replicate
// onto other devices of the same tier, one txn per object. Objects that
// cannot be reconstructed are reported through RepairLoss after the others
// have been repaired.
RepairReport execute_repair(IoCtx& ctx, Store& store, const RepairProcedure& procedure);

// Decision loop: collects events, decides, repairs.
class Monitor {
 public:
  Monitor(Store& store, Thresholds thresholds);

  void ingest(const FailureEvent& e);
  FailureEvent make_event(VTime t, SourceKind source_kind, std::uint64_t source, EventKind kind);
  // Decides and executes until nothing is left to do. Returns procedures run.
  std::vector<RepairProcedure> step(IoCtx& ctx);

  const EventHistory& history() const noexcept { return history_; }
  const std::set<DeviceId>& handled() const noexcept { return handled_; }
  const std::vector<ObjectId>& lost() const noexcept { return lost_; }
  const Thresholds& thresholds() const noexcept { return thresholds_; }

 private:
  Store& store_;
  Thresholds thresholds_;
  EventHistory history_;
  std::set<DeviceId> handled_;
  std::vector<ObjectId> lost_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace sage::ha
