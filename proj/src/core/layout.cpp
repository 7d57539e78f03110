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

#include "sage/core/layout.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "sage/common/error.hpp"

namespace sage {
namespace {

void check_distinct(const std::vector<DeviceId>& devices) {
  std::set<DeviceId> seen(devices.begin(), devices.end());
  if (seen.size() != devices.size()) raise(Errc::invalid_layout, "device listed twice");
}

struct SubMapper {
  std::uint64_t extent_start;
  std::vector<Placement>& out;

  // Maps relative blocks [rb_begin, rb_end) of one sub-layout.
  void operator()(const StripedLayout& s, std::uint64_t rb_begin, std::uint64_t rb_end) const {
    const std::uint32_t n = s.data_units;
    for (std::uint64_t rb = rb_begin; rb < rb_end; ++rb) {
      const std::uint64_t row = rb / n;
      const auto j = static_cast<std::uint32_t>(rb % n);
      out.push_back({s.devices[data_position(n, s.parity_units, row, j)], row, UnitRole::data,
                     extent_start, extent_start + rb});
      const bool row_ends = (j == n - 1) || (rb + 1 == rb_end);
      if (s.parity_units == 1 && row_ends) {
        out.push_back({s.devices[parity_position(n, row)], row, UnitRole::parity, extent_start,
                       extent_start + row * n});
      }
    }
  }

  void operator()(const MirroredLayout& m, std::uint64_t rb_begin, std::uint64_t rb_end) const {
    for (std::uint64_t rb = rb_begin; rb < rb_end; ++rb) {
      for (std::uint32_t r = 0; r < m.replicas; ++r)
        out.push_back({m.devices[r], rb, UnitRole::data, extent_start, extent_start + rb});
    }
  }
};

void map_sub(const SubLayout& sub, std::uint64_t extent_start, std::uint64_t rb_begin, std::uint64_t rb_end,
             std::vector<Placement>& out) {
  SubMapper mapper{extent_start, out};
  std::visit([&](const auto& s) { mapper(s, rb_begin, rb_end); }, sub);
}

void encode_sub(ByteWriter& w, const SubLayout& sub) {
  if (const auto* s = std::get_if<StripedLayout>(&sub)) {
    w.u8(0);
    w.u32(s->data_units);
    w.u32(s->parity_units);
    w.u32(static_cast<std::uint32_t>(s->devices.size()));
    for (DeviceId d : s->devices) w.u32(d);
  } else {
    const auto& m = std::get<MirroredLayout>(sub);
    w.u8(1);
    w.u32(m.replicas);
    w.u32(static_cast<std::uint32_t>(m.devices.size()));
    for (DeviceId d : m.devices) w.u32(d);
  }
}

std::vector<DeviceId> read_devices(ByteReader& r) {
  std::uint32_t n = r.u32();
  if (n > r.remaining() / 4) raise(Errc::corrupt, "device list too long");
  std::vector<DeviceId> out(n);
  for (auto& d : out) d = r.u32();
  return out;
}

SubLayout decode_sub(ByteReader& r) {
  std::uint8_t tag = r.u8();
  if (tag == 0) {
    StripedLayout s;
    s.data_units = r.u32();
    s.parity_units = r.u32();
    s.devices = read_devices(r);
    return s;
  }
  if (tag == 1) {
    MirroredLayout m;
    m.replicas = r.u32();
    m.devices = read_devices(r);
    return m;
  }
  raise(Errc::corrupt, "unknown sub-layout tag");
}

void describe_sub(std::ostream& os, const SubLayout& sub) {
  if (const auto* s = std::get_if<StripedLayout>(&sub)) {
    os << "striped(" << s->data_units << "," << s->parity_units << ")[";
    for (std::size_t i = 0; i < s->devices.size(); ++i) os << (i ? "," : "") << "d" << s->devices[i];
    os << "]";
  } else {
    const auto& m = std::get<MirroredLayout>(sub);
    os << "mirrored(" << m.replicas << ")[";
    for (std::size_t i = 0; i < m.devices.size(); ++i) os << (i ? "," : "") << "d" << m.devices[i];
    os << "]";
  }
}

}  // namespace

Layout Layout::tiered(std::vector<TieredEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const TieredEntry& a, const TieredEntry& b) { return a.extent.start_block < b.extent.start_block; });
  return {TieredLayout{std::move(entries)}};
}

void validate_sublayout(const SubLayout& layout) {
  if (const auto* s = std::get_if<StripedLayout>(&layout)) {
    if (s->data_units < 1) raise(Errc::invalid_layout, "striped layout needs N >= 1");
    if (s->parity_units > 1) raise(Errc::invalid_layout, "striped layout supports P in {0,1}");
    if (s->devices.size() != s->data_units + s->parity_units)
      raise(Errc::invalid_layout, "striped layout needs exactly N+P devices");
    check_distinct(s->devices);
  } else {
    const auto& m = std::get<MirroredLayout>(layout);
    if (m.replicas < 1) raise(Errc::invalid_layout, "mirrored layout needs R >= 1");
    if (m.devices.size() != m.replicas) raise(Errc::invalid_layout, "mirrored layout needs exactly R devices");
    check_distinct(m.devices);
  }
}

void validate_layout(const Layout& layout) {
  if (const auto* t = std::get_if<TieredLayout>(&layout.kind)) {
    if (t->entries.empty()) raise(Errc::invalid_layout, "tiered layout has no extents");
    std::uint64_t prev_end = 0;
    for (std::size_t i = 0; i < t->entries.size(); ++i) {
      const auto& e = t->entries[i];
      if (e.extent.block_count == 0) raise(Errc::invalid_layout, "empty extent");
      if (i > 0 && e.extent.start_block < prev_end) raise(Errc::invalid_layout, "overlapping or unsorted extents");
      prev_end = e.extent.end_block();
      validate_sublayout(e.layout);
    }
    return;
  }
  std::visit(
      [](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (!std::is_same_v<T, TieredLayout>) validate_sublayout(SubLayout{l});
      },
      layout.kind);
}

std::vector<Placement> layout_map(const Layout& layout, const Extent& extent) {
  std::vector<Placement> out;
  if (extent.block_count == 0) return out;
  if (const auto* t = std::get_if<TieredLayout>(&layout.kind)) {
    std::uint64_t b = extent.start_block;
    const std::uint64_t end = extent.end_block();
    for (const auto& e : t->entries) {
      if (e.extent.end_block() <= b) continue;
      if (e.extent.start_block > b) break;
      const std::uint64_t stop = std::min(end, e.extent.end_block());
      map_sub(e.layout, e.extent.start_block, b - e.extent.start_block, stop - e.extent.start_block, out);
      b = stop;
      if (b == end) break;
    }
    if (b != end) raise(Errc::extent_outside_layout, "block " + std::to_string(b) + " not covered");
    return out;
  }
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (!std::is_same_v<T, TieredLayout>)
          map_sub(SubLayout{l}, 0, extent.start_block, extent.end_block(), out);
      },
      layout.kind);
  return out;
}

SubLayoutRef resolve(const Layout& layout, std::uint64_t block) {
  if (const auto* s = std::get_if<StripedLayout>(&layout.kind)) return {s, 0, block, std::nullopt};
  if (const auto* m = std::get_if<MirroredLayout>(&layout.kind)) return {m, 0, block, std::nullopt};
  const auto& t = std::get<TieredLayout>(layout.kind);
  auto it = std::upper_bound(t.entries.begin(), t.entries.end(), block,
                             [](std::uint64_t b, const TieredEntry& e) { return b < e.extent.start_block; });
  if (it == t.entries.begin()) raise(Errc::extent_outside_layout, "block " + std::to_string(block));
  --it;
  if (!it->extent.contains(block)) raise(Errc::extent_outside_layout, "block " + std::to_string(block));
  return {as_ptr(it->layout), it->extent.start_block, block - it->extent.start_block, it->extent};
}

std::vector<DeviceId> devices_of(const SubLayout& layout) {
  return std::visit([](const auto& l) { return l.devices; }, layout);
}

std::vector<DeviceId> devices_of(const Layout& layout) {
  std::set<DeviceId> all;
  if (const auto* t = std::get_if<TieredLayout>(&layout.kind)) {
    for (const auto& e : t->entries)
      for (DeviceId d : devices_of(e.layout)) all.insert(d);
  } else {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (!std::is_same_v<T, TieredLayout>) all.insert(l.devices.begin(), l.devices.end());
        },
        layout.kind);
  }
  return {all.begin(), all.end()};
}

SubLayout to_sublayout(SubLayoutPtr ptr) {
  return std::visit([](const auto* l) { return SubLayout{*l}; }, ptr);
}

SubLayoutPtr as_ptr(const SubLayout& sub) noexcept {
  if (const auto* s = std::get_if<StripedLayout>(&sub)) return s;
  return &std::get<MirroredLayout>(sub);
}

double expansion(const SubLayout& layout) noexcept {
  if (const auto* s = std::get_if<StripedLayout>(&layout))
    return static_cast<double>(s->data_units + s->parity_units) / s->data_units;
  return static_cast<double>(std::get<MirroredLayout>(layout).replicas);
}

void encode_layout(ByteWriter& w, const Layout& layout) {
  if (const auto* t = std::get_if<TieredLayout>(&layout.kind)) {
    w.u8(2);
    w.u32(static_cast<std::uint32_t>(t->entries.size()));
    for (const auto& e : t->entries) {
      w.u64(e.extent.start_block);
      w.u64(e.extent.block_count);
      encode_sub(w, e.layout);
    }
    return;
  }
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (!std::is_same_v<T, TieredLayout>) encode_sub(w, SubLayout{l});
      },
      layout.kind);
}

Layout decode_layout(ByteReader& r) {
  // Peek the tag without consuming it for the non-tiered cases.
  ByteReader probe = r;
  std::uint8_t tag = probe.u8();
  if (tag != 2) {
    SubLayout sub = decode_sub(r);
    if (auto* s = std::get_if<StripedLayout>(&sub)) return {std::move(*s)};
    return {std::get<MirroredLayout>(std::move(sub))};
  }
  r.u8();
  std::uint32_t n = r.u32();
  TieredLayout t;
  for (std::uint32_t i = 0; i < n; ++i) {
    Extent e{r.u64(), r.u64()};
    t.entries.push_back({e, decode_sub(r)});
  }
  return {std::move(t)};
}

std::string describe(const Layout& layout) {
  std::ostringstream os;
  if (const auto* t = std::get_if<TieredLayout>(&layout.kind)) {
    os << "tiered{";
    for (std::size_t i = 0; i < t->entries.size(); ++i) {
      const auto& e = t->entries[i];
      os << (i ? " " : "") << "[" << e.extent.start_block << "+" << e.extent.block_count << "]:";
      describe_sub(os, e.layout);
    }
    os << "}";
  } else {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (!std::is_same_v<T, TieredLayout>) describe_sub(os, SubLayout{l});
        },
        layout.kind);
  }
  return os.str();
}

}  // namespace sage
