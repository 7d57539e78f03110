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

#include <bit>
#include <cstdint>

#include "sage/common/error.hpp"

namespace sage {

// Throws Error(not_power_of_two) unless size is a positive power of two.
inline void validate_block_size(std::uint64_t size) {
  if (!std::has_single_bit(size)) raise(Errc::not_power_of_two, std::to_string(size));
}

class BlockSpec {
 public:
  explicit BlockSpec(std::uint64_t block_size_bytes) : size_(block_size_bytes) {
    validate_block_size(size_);
    shift_ = static_cast<unsigned>(std::countr_zero(size_));
  }

  std::uint64_t block_size() const noexcept { return size_; }
  unsigned shift() const noexcept { return shift_; }
  bool operator==(const BlockSpec&) const = default;

 private:
  std::uint64_t size_;
  unsigned shift_;
};

struct BlockPos {
  std::uint64_t block;
  std::uint64_t intra;
  bool operator==(const BlockPos&) const = default;
};

inline BlockPos byte_to_block(std::uint64_t offset, const BlockSpec& spec) noexcept {
  return {offset >> spec.shift(), offset & (spec.block_size() - 1)};
}

}  // namespace sage
