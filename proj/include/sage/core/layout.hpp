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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sage/common/bytes.hpp"
#include "sage/common/types.hpp"

namespace sage {

struct Extent {
  std::uint64_t start_block = 0;
  std::uint64_t block_count = 0;

  std::uint64_t end_block() const noexcept { return start_block + block_count; }
  bool contains(std::uint64_t block) const noexcept { return block >= start_block && block < end_block(); }
  bool operator==(const Extent&) const = default;
};

// N data units plus P (0 or 1) XOR parity units per row, over N+P devices.
// The parity unit of row g sits at device position (N + g) mod (N + 1);
// data units fill the remaining positions in ascending order.
struct StripedLayout {
  std::uint32_t data_units = 1;
  std::uint32_t parity_units = 0;
  std::vector<DeviceId> devices;
  bool operator==(const StripedLayout&) const = default;
};

struct MirroredLayout {
  std::uint32_t replicas = 1;
  std::vector<DeviceId> devices;
  bool operator==(const MirroredLayout&) const = default;
};

using SubLayout = std::variant<StripedLayout, MirroredLayout>;

struct TieredEntry {
  Extent extent;
  SubLayout layout;
  bool operator==(const TieredEntry&) const = default;
};

// Disjoint extents, each with its own striped or mirrored sub-layout.
// Kept sorted by start block.
struct TieredLayout {
  std::vector<TieredEntry> entries;
  bool operator==(const TieredLayout&) const = default;
};

struct Layout {
  std::variant<StripedLayout, MirroredLayout, TieredLayout> kind;
  bool operator==(const Layout&) const = default;

  static Layout striped(std::uint32_t n, std::uint32_t p, std::vector<DeviceId> devices) {
    return {StripedLayout{n, p, std::move(devices)}};
  }
  static Layout mirrored(std::uint32_t r, std::vector<DeviceId> devices) {
    return {MirroredLayout{r, std::move(devices)}};
  }
  static Layout tiered(std::vector<TieredEntry> entries);
};

enum class UnitRole : std::uint8_t { data, parity };

// One stored unit of a layout. `row` is the unit's index within the
// device's share of the (sub-)layout; `extent_start` distinguishes the
// sub-layouts of a tiered layout (0 otherwise).
struct Placement {
  DeviceId device = 0;
  std::uint64_t row = 0;
  UnitRole role = UnitRole::data;
  std::uint64_t extent_start = 0;
  // Object block index for data units; first block of the row for parity.
  std::uint64_t block = 0;
  bool operator==(const Placement&) const = default;
};

// Throws Error(invalid_layout) describing the first violated constraint.
void validate_layout(const Layout& layout);
void validate_sublayout(const SubLayout& layout);

// Deterministic placement of every unit touched by `extent`: data units in
// block order, each parity unit once per touched row after that row's data.
// Throws Error(extent_outside_layout) for blocks a tiered layout does not cover.
std::vector<Placement> layout_map(const Layout& layout, const Extent& extent);

// Position of the parity unit for `row` within an N+1 device list.
constexpr std::uint32_t parity_position(std::uint32_t n, std::uint64_t row) noexcept {
  return static_cast<std::uint32_t>((n + row) % (n + 1));
}

// Device position holding data unit `j` (0-based within its row).
constexpr std::uint32_t data_position(std::uint32_t n, std::uint32_t p, std::uint64_t row, std::uint32_t j) noexcept {
  if (p == 0) return j;
  std::uint32_t pp = parity_position(n, row);
  return j < pp ? j : j + 1;
}

// Resolves the sub-layout responsible for `block`, and the block's index
// relative to that sub-layout. Non-tiered layouts cover every block.
using SubLayoutPtr = std::variant<const StripedLayout*, const MirroredLayout*>;
struct SubLayoutRef {
  SubLayoutPtr layout;
  std::uint64_t extent_start;
  std::uint64_t relative_block;
  std::optional<Extent> extent;
};
SubLayoutRef resolve(const Layout& layout, std::uint64_t block);

std::vector<DeviceId> devices_of(const SubLayout& layout);
SubLayout to_sublayout(SubLayoutPtr ptr);
SubLayoutPtr as_ptr(const SubLayout& sub) noexcept;
std::vector<DeviceId> devices_of(const Layout& layout);

// Units of storage per block of data: (N+P)/N for striped, R for mirrored.
double expansion(const SubLayout& layout) noexcept;

void encode_layout(ByteWriter& w, const Layout& layout);
Layout decode_layout(ByteReader& r);
std::string describe(const Layout& layout);

}  // namespace sage
