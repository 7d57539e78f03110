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

#include "sage/common/error.hpp"

namespace sage {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::not_power_of_two: return "NotPowerOfTwo";
    case Errc::extent_outside_layout: return "ExtentOutsideLayout";
    case Errc::invalid_layout: return "InvalidLayout";
    case Errc::unknown_container: return "UnknownContainer";
    case Errc::unknown_object: return "UnknownObject";
    case Errc::already_exists: return "AlreadyExists";
    case Errc::device_failed: return "DeviceFailed";
    case Errc::out_of_capacity: return "OutOfCapacity";
    case Errc::bad_length: return "BadLength";
    case Errc::unrecoverable_loss: return "UnrecoverableLoss";
    case Errc::unknown_index: return "UnknownIndex";
    case Errc::log_write_failed: return "LogWriteFailed";
    case Errc::invalid_state: return "InvalidState";
    case Errc::corrupt_log: return "CorruptLog";
    case Errc::corrupt: return "Corrupt";
    case Errc::target_full: return "TargetFull";
    case Errc::unknown_function: return "UnknownFunction";
    case Errc::unknown_target: return "UnknownTarget";
    case Errc::combiner_not_associative: return "CombinerNotAssociative";
    case Errc::duplicate_function: return "DuplicateFunction";
    case Errc::result_too_large: return "ResultTooLarge";
    case Errc::out_of_bounds: return "OutOfBounds";
    case Errc::unknown_window: return "UnknownWindow";
    case Errc::size_mismatch: return "SizeMismatch";
    case Errc::invalid_descriptor: return "InvalidDescriptor";
    case Errc::schema_mismatch: return "SchemaMismatch";
    case Errc::stream_terminated: return "StreamTerminated";
    case Errc::already_attached: return "AlreadyAttached";
    case Errc::not_a_producer: return "NotAProducer";
    case Errc::bad_config: return "BadConfig";
    case Errc::node_down: return "NodeDown";
    case Errc::partitioned: return "Partitioned";
    case Errc::duplicate_plugin: return "DuplicatePlugin";
    case Errc::capacity_exceeded: return "CapacityExceeded";
    case Errc::corrupt_export: return "CorruptExport";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(detail.empty() ? std::string(to_string(code))
                                        : std::string(to_string(code)) + ": " + detail),
      code_(code) {}

void raise(Errc code, const std::string& detail) { throw Error(code, detail); }

}  // namespace sage
