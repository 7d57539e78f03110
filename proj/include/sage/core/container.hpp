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
#include <set>
#include <string>
#include <vector>

#include "sage/common/bytes.hpp"
#include "sage/common/types.hpp"
#include "sage/core/ids.hpp"

namespace sage {

// A named grouping of objects. Membership never moves data; the placement
// hint is advisory.
struct Container {
  ContainerId id = 0;
  std::string label;
  std::set<ObjectId> members;
  std::optional<TierId> placement_hint;
};

// Mutations must be externally serialized.
class ContainerRegistry {
 public:
  ContainerId create(std::string label, std::optional<TierId> hint = std::nullopt);
  // Re-creates a container with a known id (log replay).
  void create_with_id(ContainerId id, std::string label, std::optional<TierId> hint);

  void add_member(ContainerId id, const ObjectId& object);
  // Throws unknown_object when `object` is not a member.
  void remove_member(ContainerId id, const ObjectId& object);
  std::vector<ObjectId> list_members(ContainerId id) const;

  // Removes `object` from every container it belongs to.
  void forget_object(const ObjectId& object);

  bool contains(ContainerId id) const { return containers_.count(id) != 0; }
  const Container& get(ContainerId id) const;
  std::vector<ContainerId> ids() const;
  ContainerId next_id() const noexcept { return next_id_; }

  void encode(ByteWriter& w) const;
  static ContainerRegistry decode(ByteReader& r);

 private:
  Container& at(ContainerId id);

  std::map<ContainerId, Container> containers_;
  ContainerId next_id_ = 1;
};

}  // namespace sage
