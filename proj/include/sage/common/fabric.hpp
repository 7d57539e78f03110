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
#include <string_view>

#include "sage/common/types.hpp"

namespace sage {

enum class MsgKind : std::uint8_t {
  data_read,
  data_write,
  data_recon,
  index,
  txn_log,
  ship_exec,
  ship_result,
  stream,
  stream_ack,
  window,
  control,
};

std::string_view to_string(MsgKind kind) noexcept;

// True for message kinds that carry raw object data blocks.
constexpr bool carries_data(MsgKind kind) noexcept {
  return kind == MsgKind::data_read || kind == MsgKind::data_write || kind == MsgKind::data_recon;
}

// Transport seen by the engines. The simulated cluster implements it with
// link costs, partitions and node crashes; LoopbackFabric is the zero-cost
// single-node case.
class Fabric {
 public:
  virtual ~Fabric() = default;

  // Sends `payload_bytes` (plus a fixed envelope) from `from` to `to`,
  // issued at `at`. Returns the arrival time. Throws Error(node_down) or
  // Error(partitioned) when the message cannot be delivered.
  virtual VTime transfer(NodeId from, NodeId to, std::uint64_t payload_bytes, MsgKind kind, VTime at) = 0;

  virtual bool node_up(NodeId node) const = 0;

  // Whether a message from `from` to `to` would currently be delivered.
  virtual bool reachable(NodeId from, NodeId to) const { return node_up(from) && node_up(to); }
};

class LoopbackFabric final : public Fabric {
 public:
  VTime transfer(NodeId, NodeId, std::uint64_t, MsgKind, VTime at) override { return at; }
  bool node_up(NodeId) const override { return true; }
};

}  // namespace sage
