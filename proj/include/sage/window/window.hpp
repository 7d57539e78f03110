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
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "sage/common/bytes.hpp"
#include "sage/common/types.hpp"
#include "sage/core/ids.hpp"
#include "sage/core/layout.hpp"
#include "sage/store/store.hpp"
#include "sage/tier/device.hpp"

namespace sage::sim {
class Cluster;
}

namespace sage::window {

using WindowId = std::uint64_t;

constexpr std::uint64_t kPageBytes = 4096;

enum class Backing : std::uint8_t { memory, storage };

std::string_view to_string(Backing b) noexcept;

struct WindowOptions {
  Backing backing = Backing::memory;
  std::optional<TierId> tier;     // storage: performance hint, tier 1 when absent
  std::optional<Layout> layout;   // storage: explicit placement
};

struct WindowInfo {
  WindowId id = 0;
  RankId owner = 0;
  NodeId node = 0;
  std::uint64_t size = 0;
  Backing backing = Backing::memory;
  ObjectId object;  // storage only
  bool operator==(const WindowInfo&) const = default;
};

struct WindowCounters {
  std::uint64_t puts = 0;
  std::uint64_t gets = 0;
  std::uint64_t syncs = 0;
  std::uint64_t bytes_put = 0;
  std::uint64_t bytes_got = 0;
  std::uint64_t bytes_synced = 0;
  std::uint64_t pages_in = 0;
};

// One-sided windows exposed to every rank. Memory windows live in the
// owner's DRAM. Storage windows are backed by an object and cached in the
// owner's memory a page at a time: puts are visible at once, sync makes
// them durable through one txn. A node crash drops the node's memory
// windows and its page caches; storage windows come back from the
// metadata store.
class Windows {
 public:
  using NodeOf = std::function<NodeId(RankId)>;

  Windows(Store& store, NodeOf node_of, DeviceProfile memory = default_memory_profile());
  // Also follows the cluster's crash and restart events.
  explicit Windows(sim::Cluster& cluster);
  ~Windows();
  Windows(const Windows&) = delete;
  Windows& operator=(const Windows&) = delete;

  // Throws invalid_argument for size 0 and OutOfCapacity when the backing
  // devices cannot hold the window.
  WindowId alloc(IoCtx& ctx, RankId owner, std::uint64_t size, const WindowOptions& options = {});
  // Throws OutOfBounds or UnknownWindow.
  void put(IoCtx& ctx, WindowId id, std::uint64_t offset, ByteView data);
  Bytes get(IoCtx& ctx, WindowId id, std::uint64_t offset, std::uint64_t length);
  // Flushes dirty pages of a storage window; a no-op for memory windows.
  void sync(IoCtx& ctx, WindowId id);

  bool exists(WindowId id) const { return windows_.count(id) != 0; }
  const WindowInfo& info(WindowId id) const;
  std::vector<WindowId> ids() const;
  std::uint64_t dirty_bytes(WindowId id) const;
  const WindowCounters& counters() const noexcept { return counters_; }

  // Volatile state of `node` is gone.
  void drop_node(NodeId node);
  // Everything volatile is gone (all nodes).
  void drop_all();
  // Re-attaches storage windows recorded in the metadata store.
  void reload();

 private:
  struct State {
    WindowInfo info;
    Bytes memory;                           // memory backing
    std::map<std::uint64_t, Bytes> pages;   // storage page cache
    std::set<std::uint64_t> dirty;
  };
  State& state(WindowId id);
  const State& state(WindowId id) const;
  void check_range(const State& s, std::uint64_t offset, std::uint64_t length) const;
  VTime memory_cost(std::uint64_t bytes) const;
  // Brings the pages in [first, last] into the cache.
  void page_in(IoCtx& ctx, State& s, std::uint64_t first, std::uint64_t last, std::optional<std::uint64_t> skip_lo,
               std::optional<std::uint64_t> skip_hi);
  Layout placement(NodeId node, TierId tier, std::uint64_t blocks) const;
  void emit(const IoCtx& ctx, const char* metric, double value, const State& s);

  Store& store_;
  NodeOf node_of_;
  DeviceProfile memory_;
  sim::Cluster* cluster_ = nullptr;
  std::vector<std::uint64_t> tokens_;
  std::map<WindowId, State> windows_;
  WindowId next_id_ = 1;
  WindowCounters counters_;
};

Bytes encode_window(const WindowInfo& info);
WindowInfo decode_window(ByteView bytes);

}  // namespace sage::window
