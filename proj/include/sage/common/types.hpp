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

namespace sage {

// Virtual seconds on the simulated clock. All performance figures are
// reported in this unit; nothing sleeps in real time.
using VTime = double;

using NodeId = std::uint32_t;
using DeviceId = std::uint32_t;
using RankId = std::uint32_t;
using IndexId = std::uint64_t;
using ContainerId = std::uint64_t;
using TxnId = std::uint64_t;

// 1 = NVRAM, 2 = flash, 3 = fast disk, 4 = archive.
using TierId = int;
constexpr TierId kMinTier = 1;
constexpr TierId kMaxTier = 4;
constexpr int kTierCount = 4;

constexpr std::uint64_t kEnvelopeBytes = 64;

// Where an engine call is issued from and when. Engines advance `now` by the
// modeled cost of the work they do on behalf of the caller.
struct IoCtx {
  NodeId node = 0;
  VTime now = 0.0;
};

}  // namespace sage
