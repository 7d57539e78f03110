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

#include "sage/kv/kv_store.hpp"

#include "sage/common/error.hpp"

namespace sage {
namespace {
constexpr std::string_view kMagic = "SAGEIDX1";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void validate_key(ByteView key) {
  if (key.empty()) raise(Errc::invalid_argument, "index keys must be non-empty");
}

KvStore::Index& KvStore::at(IndexId id) {
  auto it = indices_.find(id);
  if (it == indices_.end()) raise(Errc::unknown_index, std::to_string(id));
  return it->second;
}

const KvStore::Index& KvStore::at(IndexId id) const {
  auto it = indices_.find(id);
  if (it == indices_.end()) raise(Errc::unknown_index, std::to_string(id));
  return it->second;
}

void KvStore::create(IndexId id, std::string name) {
  if (indices_.count(id) != 0) raise(Errc::already_exists, "index " + std::to_string(id));
  indices_[id] = Index{std::move(name), {}};
}

void KvStore::drop(IndexId id) {
  at(id);
  indices_.erase(id);
}

const std::string& KvStore::name(IndexId id) const { return at(id).name; }

std::vector<IndexId> KvStore::ids() const {
  std::vector<IndexId> out;
  for (const auto& [id, idx] : indices_) out.push_back(id);
  return out;
}

void KvStore::put(IndexId id, std::span<const Record> records) {
  Index& idx = at(id);
  for (const auto& r : records) validate_key(r.key);
  for (const auto& r : records) idx.records.insert_or_assign(r.key, r.value);
}

std::vector<std::optional<Bytes>> KvStore::get(IndexId id, std::span<const Bytes> keys) const {
  const Index& idx = at(id);
  std::vector<std::optional<Bytes>> out;
  out.reserve(keys.size());
  for (const auto& k : keys) {
    auto it = idx.records.find(k);
    out.push_back(it == idx.records.end() ? std::nullopt : std::optional<Bytes>(it->second));
  }
  return out;
}

std::vector<bool> KvStore::del(IndexId id, std::span<const Bytes> keys) {
  Index& idx = at(id);
  std::vector<bool> out;
  out.reserve(keys.size());
  for (const auto& k : keys) out.push_back(idx.records.erase(k) != 0);
  return out;
}

std::vector<std::vector<Record>> KvStore::next(IndexId id, std::span<const Bytes> keys, std::size_t count) const {
  if (count == 0) raise(Errc::invalid_argument, "next count must be at least 1");
  const Index& idx = at(id);
  std::vector<std::vector<Record>> out;
  out.reserve(keys.size());
  for (const auto& k : keys) {
    std::vector<Record> batch;
    for (auto it = idx.records.upper_bound(k); it != idx.records.end() && batch.size() < count; ++it)
      batch.push_back({it->first, it->second});
    out.push_back(std::move(batch));
  }
  return out;
}

std::size_t KvStore::size(IndexId id) const { return at(id).records.size(); }

const KvStore::Map& KvStore::records(IndexId id) const { return at(id).records; }

void KvStore::encode(ByteWriter& w) const {
  w.raw(kMagic);
  w.u32(kVersion);
  w.u64(indices_.size());
  for (const auto& [id, idx] : indices_) {
    w.u64(id);
    w.str(idx.name);
    w.u64(idx.records.size());
    for (const auto& [k, v] : idx.records) {
      w.blob(k);
      w.blob(v);
    }
  }
}

KvStore KvStore::decode(ByteReader& r) {
  if (to_string(r.raw(kMagic.size())) != kMagic) raise(Errc::corrupt, "bad index page magic");
  if (r.u32() != kVersion) raise(Errc::corrupt, "unsupported index page version");
  KvStore kv;
  const std::uint64_t n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    const IndexId id = r.u64();
    Index idx;
    idx.name = r.str();
    const std::uint64_t records = r.u64();
    for (std::uint64_t j = 0; j < records; ++j) {
      Bytes k = r.blob();
      idx.records.emplace(std::move(k), r.blob());
    }
    kv.indices_[id] = std::move(idx);
  }
  return kv;
}

}  // namespace sage
