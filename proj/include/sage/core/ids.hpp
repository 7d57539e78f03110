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
#include <functional>
#include <string>

namespace sage {

// Opaque 128-bit object identifier.
struct ObjectId {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  auto operator<=>(const ObjectId&) const = default;

  // 32 lowercase hex digits, hi first.
  std::string to_string() const;
  static ObjectId parse(const std::string& hex);
};

}  // namespace sage

template <>
struct std::hash<sage::ObjectId> {
  std::size_t operator()(const sage::ObjectId& id) const noexcept {
    return std::hash<std::uint64_t>{}(id.hi * 0x9e3779b97f4a7c15ULL ^ id.lo);
  }
};
