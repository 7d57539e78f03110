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

#include "sage/ship/ship.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sage/common/error.hpp"
#include "sage/simd/kernels.hpp"

namespace sage::ship {
namespace {

Bytes u64_bytes(std::uint64_t v) {
  Bytes b(8);
  store_le64(b.data(), v);
  return b;
}

std::uint64_t as_u64(ByteView b) {
  if (b.size() != 8) raise(Errc::corrupt, "expected an 8-byte partial");
  return load_le64(b.data());
}

Bytes random_u64(std::mt19937_64& rng) { return u64_bytes(rng()); }

FunctionDesc checksum64() {
  FunctionDesc f;
  f.name = kChecksum64;
  f.identity = u64_bytes(kFnvOffsetBasis);
  // per block: fnv1a(index || block), folded by XOR around the offset basis
  f.map = [](std::uint64_t index, ByteView block, ByteView) {
    std::uint8_t idx[8];
    store_le64(idx, index);
    const std::uint64_t h = fnv1a64(block, fnv1a64(ByteView(idx, 8)));
    return u64_bytes(h ^ kFnvOffsetBasis);
  };
  f.combine = [](ByteView a, ByteView b) { return u64_bytes(as_u64(a) ^ as_u64(b) ^ kFnvOffsetBasis); };
  f.sample = random_u64;
  return f;
}

FunctionDesc sum_i64() {
  FunctionDesc f;
  f.name = kSumI64;
  f.identity = u64_bytes(0);
  f.map = [](std::uint64_t, ByteView block, ByteView) {
    if (block.size() % 8 != 0) raise(Errc::invalid_argument, "SUM_I64 needs 8-byte aligned blocks");
    return u64_bytes(simd::kernels().sum_u64(block.data(), block.size()));
  };
  f.combine = [](ByteView a, ByteView b) { return u64_bytes(as_u64(a) + as_u64(b)); };
  f.sample = random_u64;
  return f;
}

FunctionDesc count_match() {
  FunctionDesc f;
  f.name = kCountMatch;
  f.identity = u64_bytes(0);
  f.map = [](std::uint64_t, ByteView block, ByteView pattern) {
    if (pattern.empty() || block.size() % pattern.size() != 0)
      raise(Errc::invalid_argument, "COUNT_MATCH pattern length must divide the block size");
    const auto& k = simd::kernels();
    std::uint64_t n = 0;
    if (pattern.size() == 1) {
      n = k.count_byte(block.data(), block.size(), pattern[0]);
    } else if (pattern.size() == 8) {
      n = k.count_word(block.data(), block.size(), load_le64(pattern.data()));
    } else {
      for (std::size_t off = 0; off < block.size(); off += pattern.size())
        n += std::memcmp(block.data() + off, pattern.data(), pattern.size()) == 0 ? 1 : 0;
    }
    return u64_bytes(n);
  };
  f.combine = [](ByteView a, ByteView b) { return u64_bytes(as_u64(a) + as_u64(b)); };
  f.sample = random_u64;
  return f;
}

struct HistParams {
  double lo, hi;
  std::uint32_t bins;
};

HistParams parse_hist(ByteView params) {
  ByteReader r(params);
  HistParams p{r.f64(), r.f64(), r.u32()};
  if (p.bins == 0 || p.bins > kMaxPartialBytes / 8 || !(p.hi > p.lo))
    raise(Errc::invalid_argument, "HISTOGRAM needs lo < hi and 1..8192 bins");
  return p;
}

FunctionDesc histogram() {
  FunctionDesc f;
  f.name = kHistogram;
  // empty partial = no samples yet; combine widens it
  f.identity = {};
  f.map = [](std::uint64_t, ByteView block, ByteView params) {
    const HistParams p = parse_hist(params);
    std::vector<std::uint64_t> counts(p.bins, 0);
    const double width = (p.hi - p.lo) / p.bins;
    for (std::size_t off = 0; off + 8 <= block.size(); off += 8) {
      double v;
      std::memcpy(&v, block.data() + off, 8);
      if (!(v >= p.lo && v < p.hi)) continue;
      auto bin = static_cast<std::uint32_t>((v - p.lo) / width);
      counts[std::min(bin, p.bins - 1)] += 1;
    }
    ByteWriter w;
    for (auto c : counts) w.u64(c);
    return w.take();
  };
  f.combine = [](ByteView a, ByteView b) {
    if (a.empty()) return Bytes(b.begin(), b.end());
    if (b.empty()) return Bytes(a.begin(), a.end());
    if (a.size() != b.size()) raise(Errc::corrupt, "histogram partials differ in size");
    Bytes out(a.size());
    for (std::size_t i = 0; i < a.size(); i += 8) store_le64(out.data() + i, load_le64(a.data() + i) + load_le64(b.data() + i));
    return out;
  };
  f.sample = [](std::mt19937_64& rng) {
    ByteWriter w;
    for (int i = 0; i < 4; ++i) w.u64(rng() % 1000);
    return w.take();
  };
  return f;
}

}  // namespace

Bytes histogram_params(double lo, double hi, std::uint32_t bins) {
  ByteWriter w;
  w.f64(lo);
  w.f64(hi);
  w.u32(bins);
  return w.take();
}

std::vector<std::uint64_t> decode_histogram(ByteView partial) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i + 8 <= partial.size(); i += 8) out.push_back(load_le64(partial.data() + i));
  return out;
}

bool combiner_laws_hold(const FunctionDesc& desc, std::uint64_t seed, int trials) {
  std::mt19937_64 rng(seed);
  auto draw = [&] { return desc.sample ? desc.sample(rng) : random_u64(rng); };
  try {
    for (int i = 0; i < trials; ++i) {
      Bytes a = draw(), b = draw(), c = draw();
      if (desc.combine(a, b) != desc.combine(b, a)) return false;
      if (desc.combine(desc.combine(a, b), c) != desc.combine(a, desc.combine(b, c))) return false;
      if (desc.combine(desc.identity, a) != a) return false;
    }
  } catch (const Error&) {
    return false;
  }
  return true;
}

Shipper::Shipper(Store& store) : store_(store) {
  for (auto f : {checksum64(), sum_i64(), count_match(), histogram()}) register_function(std::move(f));
}

void Shipper::register_function(FunctionDesc desc, std::uint64_t seed) {
  if (desc.name.empty() || !desc.map || !desc.combine) raise(Errc::invalid_argument, "incomplete function descriptor");
  if (functions_.count(desc.name) != 0) raise(Errc::duplicate_function, desc.name);
  if (!combiner_laws_hold(desc, seed)) raise(Errc::combiner_not_associative, desc.name);
  functions_.emplace(desc.name, std::move(desc));
}

const FunctionDesc& Shipper::function(const std::string& name) const {
  auto it = functions_.find(name);
  if (it == functions_.end()) raise(Errc::unknown_function, name);
  return it->second;
}

std::vector<ObjectId> Shipper::resolve_target(const Target& target) const {
  if (const auto* id = std::get_if<ObjectId>(&target)) {
    if (!store_.exists(*id)) raise(Errc::unknown_target, id->to_string());
    return {*id};
  }
  const ContainerId c = std::get<ContainerId>(target);
  if (!store_.containers().contains(c)) raise(Errc::unknown_target, "container " + std::to_string(c));
  return store_.list_members(c);
}

ShipResult Shipper::ship(IoCtx& ctx, const std::string& name, ByteView params, const Target& target) {
  const FunctionDesc& fn = function(name);
  const auto objects = resolve_target(target);
  ObjectEngine& engine = store_.objects();
  Fabric& fabric = store_.fabric();
  DevicePool& pool = store_.pool();

  struct Work {
    ObjectId object;
    ObjectEngine::BlockHome home;
  };
  std::map<NodeId, std::vector<Work>> by_node;
  std::vector<Work> degraded;
  ShipResult result;
  for (const ObjectId& id : objects) {
    result.fetch_equivalent_bytes += engine.meta(id).size_bytes();
    for (const auto& home : engine.block_homes(id, ctx.node)) {
      if (home.available) by_node[pool.get(home.key.device).node()].push_back({id, home});
      else degraded.push_back({id, home});
    }
  }

  const std::uint64_t descriptor = name.size() + params.size();
  const VTime t0 = ctx.now;
  VTime done = t0;
  for (auto& [node, work] : by_node) {
    VTime arrive;
    try {
      arrive = fabric.transfer(ctx.node, node, descriptor, MsgKind::ship_exec, t0);
    } catch (const Error& e) {
      if (e.code() != Errc::node_down && e.code() != Errc::partitioned) throw;
      degraded.insert(degraded.end(), work.begin(), work.end());
      continue;
    }
    result.shipped_bytes += kEnvelopeBytes + descriptor;

    // Local pass on the storage node: its own units only.
    IoCtx local{node, arrive};
    Bytes partial = fn.identity;
    std::map<ObjectId, std::vector<const Work*>> per_object;
    for (const auto& w : work) per_object[w.object].push_back(&w);
    for (const auto& [id, items] : per_object) {
      const std::uint64_t bs = engine.meta(id).block_size;
      std::vector<UnitKey> keys;
      for (const Work* w : items)
        if (w->home.written) keys.push_back(w->home.key);
      auto contents = engine.fetch_units(local, id, keys);
      const Bytes zeros(bs, 0);
      for (const Work* w : items) {
        const Bytes& block = w->home.written ? contents.at(w->home.key) : zeros;
        partial = fn.combine(partial, fn.map(w->home.block, block, params));
      }
    }
    if (partial.size() > kMaxPartialBytes)
      raise(Errc::result_too_large, name + " produced " + std::to_string(partial.size()) + " bytes on node " +
                                        std::to_string(node));
    const VTime back = fabric.transfer(node, ctx.node, partial.size(), MsgKind::ship_result, local.now);
    result.shipped_bytes += kEnvelopeBytes + partial.size();
    done = std::max(done, back);
    result.partials[node] = std::move(partial);
  }

  if (!degraded.empty()) {
    IoCtx here{ctx.node, t0};
    Bytes partial = fn.identity;
    std::map<ObjectId, std::vector<const Work*>> per_object;
    for (const auto& w : degraded) per_object[w.object].push_back(&w);
    for (const auto& [id, items] : per_object) {
      const std::uint64_t bs = engine.meta(id).block_size;
      std::vector<UnitKey> keys;
      for (const Work* w : items)
        if (w->home.written) keys.push_back(w->home.key);
      auto contents = engine.fetch_units(here, id, keys, MsgKind::data_recon);
      const Bytes zeros(bs, 0);
      for (const Work* w : items) {
        const Bytes& block = w->home.written ? contents.at(w->home.key) : zeros;
        partial = fn.combine(partial, fn.map(w->home.block, block, params));
      }
    }
    result.degraded_blocks = degraded.size();
    if (auto it = result.partials.find(ctx.node); it != result.partials.end())
      it->second = fn.combine(it->second, partial);
    else
      result.partials[ctx.node] = std::move(partial);
    done = std::max(done, here.now);
  }

  result.aggregate = fn.identity;
  for (const auto& [node, p] : result.partials) result.aggregate = fn.combine(result.aggregate, p);
  result.nodes = result.partials.size();
  ctx.now = done;

  if (auto* addb = store_.addb())
    addb->emit(ctx.now, ctx.node, telemetry::Subsystem::ship, "ship", static_cast<double>(result.shipped_bytes),
               {{"fn", name},
                {"nodes", std::to_string(result.nodes)},
                {"fetch_equivalent", std::to_string(result.fetch_equivalent_bytes)},
                {"degraded", std::to_string(result.degraded_blocks)}});
  return result;
}

Bytes Shipper::fetch_and_compute(IoCtx& ctx, const std::string& name, ByteView params, const Target& target) {
  const FunctionDesc& fn = function(name);
  Bytes acc = fn.identity;
  for (const ObjectId& id : resolve_target(target)) {
    const ObjectMeta& m = store_.meta(id);
    Bytes data = store_.read(ctx, id, 0, m.size_blocks);
    for (std::uint64_t b = 0; b < m.size_blocks; ++b)
      acc = fn.combine(acc, fn.map(b, ByteView(data).subspan(b * m.block_size, m.block_size), params));
  }
  return acc;
}

}  // namespace sage::ship
