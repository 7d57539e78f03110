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

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "sage/common/bytes.hpp"
#include "sage/core/ids.hpp"
#include "sage/store/store.hpp"

namespace sage::ship {

constexpr std::uint64_t kMaxPartialBytes = 64 * 1024;

// A function that runs where the data lives: `map` turns one block into a
// partial result, `combine` merges partials. `combine` must be commutative
// and associative with `identity` as neutral element; registration checks
// this on random samples.
struct FunctionDesc {
  std::string name;
  std::function<Bytes(std::uint64_t block_index, ByteView block, ByteView params)> map;
  std::function<Bytes(ByteView a, ByteView b)> combine;
  Bytes identity;
  // Draws a plausible partial for the law checks. Defaults to 8 random bytes.
  std::function<Bytes(std::mt19937_64&)> sample;
};

// Names of the builtin functions.
inline constexpr const char* kChecksum64 = "CHECKSUM64";
inline constexpr const char* kSumI64 = "SUM_I64";
inline constexpr const char* kCountMatch = "COUNT_MATCH";  // params: the pattern
inline constexpr const char* kHistogram = "HISTOGRAM";     // params: histogram_params()

Bytes histogram_params(double lo, double hi, std::uint32_t bins);
std::vector<std::uint64_t> decode_histogram(ByteView partial);

using Target = std::variant<ObjectId, ContainerId>;

struct ShipResult {
  std::map<NodeId, Bytes> partials;
  Bytes aggregate;
  std::uint64_t shipped_bytes = 0;          // envelopes, descriptors and partials
  std::uint64_t fetch_equivalent_bytes = 0;  // logical size of the target
  std::uint64_t degraded_blocks = 0;         // reconstructed at the caller
  std::uint64_t nodes = 0;
};

class Shipper {
 public:
  explicit Shipper(Store& store);

  // Throws DuplicateFunction or CombinerNotAssociative.
  void register_function(FunctionDesc desc, std::uint64_t seed = 0x5eed);
  bool has(const std::string& name) const { return functions_.count(name) != 0; }
  const FunctionDesc& function(const std::string& name) const;

  // Runs `name` on every node holding data units of the target and folds
  // the partials at the caller. Blocks whose home is unreachable are
  // reconstructed at the caller instead.
  ShipResult ship(IoCtx& ctx, const std::string& name, ByteView params, const Target& target);

  // Reference result: reads the whole target at the caller and folds
  // locally.
  Bytes fetch_and_compute(IoCtx& ctx, const std::string& name, ByteView params, const Target& target);

 private:
  std::vector<ObjectId> resolve_target(const Target& target) const;

  Store& store_;
  std::map<std::string, FunctionDesc> functions_;
};

// The combiner-law check used at registration, exposed for tests.
bool combiner_laws_hold(const FunctionDesc& desc, std::uint64_t seed, int trials = 100);

}  // namespace sage::ship
