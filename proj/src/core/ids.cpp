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

#include "sage/core/ids.hpp"

#include <cstdio>

#include "sage/common/error.hpp"

namespace sage {

std::string ObjectId::to_string() const {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return buf;
}

ObjectId ObjectId::parse(const std::string& hex) {
  if (hex.size() != 32) raise(Errc::invalid_argument, "object id must be 32 hex digits");
  auto part = [&](std::size_t off) {
    std::uint64_t v = 0;
    for (std::size_t i = off; i < off + 16; ++i) {
      char c = hex[i];
      int d;
      if (c >= '0' && c <= '9') d = c - '0';
      else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
      else raise(Errc::invalid_argument, "bad hex digit in object id");
      v = (v << 4) | static_cast<std::uint64_t>(d);
    }
    return v;
  };
  return {part(0), part(16)};
}

}  // namespace sage
