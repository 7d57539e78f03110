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
#include <stdexcept>
#include <string>
#include <string_view>

namespace sage {

enum class Errc : std::uint8_t {
  invalid_argument,
  not_power_of_two,
  extent_outside_layout,
  invalid_layout,
  unknown_container,
  unknown_object,
  already_exists,
  device_failed,
  out_of_capacity,
  bad_length,
  unrecoverable_loss,
  unknown_index,
  log_write_failed,
  invalid_state,
  corrupt_log,
  corrupt,
  target_full,
  unknown_function,
  unknown_target,
  combiner_not_associative,
  duplicate_function,
  result_too_large,
  out_of_bounds,
  unknown_window,
  size_mismatch,
  invalid_descriptor,
  schema_mismatch,
  stream_terminated,
  already_attached,
  not_a_producer,
  bad_config,
  node_down,
  partitioned,
  duplicate_plugin,
  capacity_exceeded,
  corrupt_export,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void raise(Errc code, const std::string& detail = {});

// Thrown by crash-injection hooks. Deliberately not an Error: engines must not
// swallow it as an ordinary failure.
class SimulatedCrash : public std::exception {
 public:
  explicit SimulatedCrash(std::string where) : where_(std::move(where)) {}
  const char* what() const noexcept override { return where_.c_str(); }

 private:
  std::string where_;
};

}  // namespace sage
