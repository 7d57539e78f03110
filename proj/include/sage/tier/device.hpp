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
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sage/common/bytes.hpp"
#include "sage/common/types.hpp"

namespace sage {

struct DeviceProfile {
  std::uint64_t capacity_bytes = 0;
  double read_bw = 0;   // bytes per virtual second
  double write_bw = 0;  // bytes per virtual second
  VTime latency = 0;    // virtual seconds per request

  bool operator==(const DeviceProfile&) const = default;
};

// Defaults for the four tiers. Invented figures that keep the ordering
// NVRAM < flash < fast disk < archive for latency and capacity.
DeviceProfile default_profile(TierId tier);

// DRAM profile used for memory-backed windows and page-cache hits.
DeviceProfile default_memory_profile();

void validate_profile(const DeviceProfile& profile);

struct DeviceConfig {
  DeviceId id = 0;
  NodeId node = 0;
  TierId tier = 1;
  DeviceProfile profile;
  bool spare = false;
};

enum class DeviceState : std::uint8_t { online, failed };

enum class DeviceEvent : std::uint8_t { failed, restored, restored_wiped };

struct IoResult {
  VTime done = 0;
  VTime cost = 0;
};

struct BlockWrite {
  std::uint64_t index;
  ByteView data;
};

struct DeviceCounters {
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t read_ops = 0;
  std::uint64_t write_ops = 0;
  VTime busy_time = 0;
};

// An emulated block device persisted in one backing file:
//
//   offset 0     "SAGEDEV1" | version u32 | block_size u64 | capacity u64
//   offset 4096  block 0, block 1, ... at fixed block_size strides
//
// All integers little-endian; capacity in bytes. Unwritten blocks read as
// zeros (the file is sparse). A device serializes its own operations; each
// request pays one latency plus its bytes over the tier bandwidth, queued
// behind earlier requests on the same device.
class Device {
 public:
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::uint64_t kHeaderBytes = 4096;

  using Listener = std::function<void(DeviceId, DeviceEvent)>;

  Device(const DeviceConfig& config, std::filesystem::path backing, std::uint64_t block_size,
         bool sync_writes = false);
  ~Device();
  Device(const Device&) = delete;
  Device& operator=(const Device&) = delete;

  DeviceId id() const noexcept { return config_.id; }
  NodeId node() const noexcept { return config_.node; }
  TierId tier() const noexcept { return config_.tier; }
  const DeviceProfile& profile() const noexcept { return config_.profile; }
  bool spare() const noexcept { return config_.spare; }
  void set_spare(bool spare) noexcept { config_.spare = spare; }
  std::uint64_t block_size() const noexcept { return block_size_; }
  std::uint64_t capacity_blocks() const noexcept { return capacity_blocks_; }
  const std::filesystem::path& backing() const noexcept { return path_; }

  bool online() const;
  DeviceState state() const;

  // Throws device_failed, out_of_capacity (index past capacity), bad_length.
  IoResult write_block(std::uint64_t index, ByteView data, VTime at);
  std::pair<Bytes, IoResult> read_block(std::uint64_t index, VTime at);

  // Scatter/gather forms: one request, one latency.
  IoResult write_blocks(std::span<const BlockWrite> writes, VTime at);
  IoResult read_blocks(std::span<const std::uint64_t> indices, std::vector<Bytes>& out, VTime at);

  void fail();
  void restore(bool wipe);

  // Block allocation. The allocation map is volatile; owners rebuild it with
  // claim() after a restart.
  std::optional<std::uint64_t> allocate();
  void release(std::uint64_t index);
  void claim(std::uint64_t index);
  void reset_allocations();
  std::uint64_t used_blocks() const;
  std::uint64_t free_blocks() const;

  DeviceCounters counters() const;
  void set_listener(Listener listener);

  // Drops queueing state (e.g. after the simulated node restarts).
  void reset_queue();

 private:
  void check_online() const;
  void check_index(std::uint64_t index) const;
  VTime cost(std::uint64_t bytes, double bw) const noexcept;
  void pwrite_all(const std::uint8_t* data, std::uint64_t len, std::uint64_t offset);
  void pread_all(std::uint8_t* data, std::uint64_t len, std::uint64_t offset) const;
  void write_header();
  void check_header();

  DeviceConfig config_;
  std::filesystem::path path_;
  std::uint64_t block_size_;
  std::uint64_t capacity_blocks_;
  bool sync_writes_;
  int fd_ = -1;

  mutable std::mutex mu_;
  DeviceState state_ = DeviceState::online;
  VTime busy_until_ = 0;
  DeviceCounters counters_;
  std::vector<bool> used_;
  std::uint64_t used_count_ = 0;
  std::uint64_t search_hint_ = 0;
  Listener listener_;
};

class DevicePool {
 public:
  DevicePool(std::filesystem::path dir, std::uint64_t block_size, bool sync_writes = false);

  Device& add(const DeviceConfig& config);
  Device& get(DeviceId id);
  const Device& get(DeviceId id) const;
  bool contains(DeviceId id) const noexcept;

  std::vector<DeviceId> ids() const;
  std::vector<DeviceId> in_tier(TierId tier, bool include_spares = false) const;
  std::vector<DeviceId> spares(TierId tier) const;
  std::vector<DeviceId> on_node(NodeId node) const;

  std::uint64_t block_size() const noexcept { return block_size_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

  struct TierUsage {
    std::uint64_t used_bytes = 0;
    std::uint64_t capacity_bytes = 0;
  };
  TierUsage tier_usage(TierId tier) const;

  void set_listener(const Device::Listener& listener);

 private:
  std::filesystem::path dir_;
  std::uint64_t block_size_;
  bool sync_writes_;
  std::map<DeviceId, std::unique_ptr<Device>> devices_;
};

}  // namespace sage
