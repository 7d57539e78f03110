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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sage/common/bytes.hpp"
#include "sage/common/types.hpp"

namespace sage {

struct Record {
  Bytes key;
  Bytes value;
  bool operator==(const Record&) const = default;
};

// Ordered key-value indices. Keys compare as unsigned byte strings.
class KvStore {
 public:
  using Map = std::map<Bytes, Bytes>;

  void create(IndexId id, std::string name);
  void drop(IndexId id);
  bool contains(IndexId id) const noexcept { return indices_.count(id) != 0; }
  const std::string& name(IndexId id) const;
  std::vector<IndexId> ids() const;

  void put(IndexId id, std::span<const Record> records);
  std::vector<std::optional<Bytes>> get(IndexId id, std::span<const Bytes> keys) const;
  // true per key that was present and removed
  std::vector<bool> del(IndexId id, std::span<const Bytes> keys);
  // Up to `count` records strictly after each probe key. An empty probe key
  // starts at the beginning of the index.
  std::vector<std::vector<Record>> next(IndexId id, std::span<const Bytes> keys, std::size_t count) const;

  std::size_t size(IndexId id) const;
  const Map& records(IndexId id) const;

  // Snapshot page format (magic SAGEIDX1).
  void encode(ByteWriter& w) const;
  static KvStore decode(ByteReader& r);
  void clear() { indices_.clear(); }

 private:
  struct Index {
    std::string name;
    Map records;
  };
  Index& at(IndexId id);
  const Index& at(IndexId id) const;

  std::map<IndexId, Index> indices_;
};

// Rejects empty keys.
void validate_key(ByteView key);

}  // namespace sage
