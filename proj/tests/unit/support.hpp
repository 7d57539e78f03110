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

#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "sage/common/bytes.hpp"
#include "sage/common/fabric.hpp"
#include "sage/tier/device.hpp"

namespace sage::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sage-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline DeviceConfig device(DeviceId id, TierId tier = 2, NodeId node = 0, std::uint64_t capacity = 8ull << 20) {
  DeviceConfig c;
  c.id = id;
  c.node = node;
  c.tier = tier;
  c.profile = default_profile(tier);
  c.profile.capacity_bytes = capacity;
  return c;
}

// Pool with `count` tier-2 devices, ids 0..count-1, on node 0.
inline std::unique_ptr<DevicePool> make_pool(const std::filesystem::path& dir, int count,
                                             std::uint64_t block_size = 4096, std::uint64_t capacity = 8ull << 20) {
  auto pool = std::make_unique<DevicePool>(dir, block_size);
  for (int i = 0; i < count; ++i) pool->add(device(static_cast<DeviceId>(i), 2, 0, capacity));
  return pool;
}

inline Bytes filled(std::size_t n, std::uint8_t v) { return Bytes(n, v); }

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

}  // namespace sage::testing
