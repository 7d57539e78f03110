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

#include "sage/common/fabric.hpp"

namespace sage {

std::string_view to_string(MsgKind kind) noexcept {
  switch (kind) {
    case MsgKind::data_read: return "data_read";
    case MsgKind::data_write: return "data_write";
    case MsgKind::data_recon: return "data_recon";
    case MsgKind::index: return "index";
    case MsgKind::txn_log: return "txn_log";
    case MsgKind::ship_exec: return "ship_exec";
    case MsgKind::ship_result: return "ship_result";
    case MsgKind::stream: return "stream";
    case MsgKind::stream_ack: return "stream_ack";
    case MsgKind::window: return "window";
    case MsgKind::control: return "control";
  }
  return "unknown";
}

}  // namespace sage
