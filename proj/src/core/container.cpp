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

#include "sage/core/container.hpp"

#include "sage/common/error.hpp"

namespace sage {

ContainerId ContainerRegistry::create(std::string label, std::optional<TierId> hint) {
  ContainerId id = next_id_;
  create_with_id(id, std::move(label), hint);
  return id;
}

void ContainerRegistry::create_with_id(ContainerId id, std::string label, std::optional<TierId> hint) {
  if (containers_.count(id) != 0) raise(Errc::already_exists, "container " + std::to_string(id));
  containers_[id] = Container{id, std::move(label), {}, hint};
  if (id >= next_id_) next_id_ = id + 1;
}

Container& ContainerRegistry::at(ContainerId id) {
  auto it = containers_.find(id);
  if (it == containers_.end()) raise(Errc::unknown_container, std::to_string(id));
  return it->second;
}

const Container& ContainerRegistry::get(ContainerId id) const {
  auto it = containers_.find(id);
  if (it == containers_.end()) raise(Errc::unknown_container, std::to_string(id));
  return it->second;
}

void ContainerRegistry::add_member(ContainerId id, const ObjectId& object) { at(id).members.insert(object); }

void ContainerRegistry::remove_member(ContainerId id, const ObjectId& object) {
  if (at(id).members.erase(object) == 0) raise(Errc::unknown_object, object.to_string());
}

std::vector<ObjectId> ContainerRegistry::list_members(ContainerId id) const {
  const auto& members = get(id).members;
  return {members.begin(), members.end()};
}

void ContainerRegistry::forget_object(const ObjectId& object) {
  for (auto& [id, c] : containers_) c.members.erase(object);
}

std::vector<ContainerId> ContainerRegistry::ids() const {
  std::vector<ContainerId> out;
  for (const auto& [id, c] : containers_) out.push_back(id);
  return out;
}

void ContainerRegistry::encode(ByteWriter& w) const {
  w.u64(next_id_);
  w.u64(containers_.size());
  for (const auto& [id, c] : containers_) {
    w.u64(id);
    w.str(c.label);
    w.u8(c.placement_hint ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(c.placement_hint.value_or(0)));
    w.u64(c.members.size());
    for (const auto& m : c.members) {
      w.u64(m.hi);
      w.u64(m.lo);
    }
  }
}

ContainerRegistry ContainerRegistry::decode(ByteReader& r) {
  ContainerRegistry reg;
  reg.next_id_ = r.u64();
  std::uint64_t n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    Container c;
    c.id = r.u64();
    c.label = r.str();
    bool has_hint = r.u8() != 0;
    auto hint = static_cast<TierId>(r.u32());
    if (has_hint) c.placement_hint = hint;
    std::uint64_t members = r.u64();
    for (std::uint64_t k = 0; k < members; ++k) {
      ObjectId o;
      o.hi = r.u64();
      o.lo = r.u64();
      c.members.insert(o);
    }
    reg.containers_[c.id] = std::move(c);
  }
  return reg;
}

}  // namespace sage
