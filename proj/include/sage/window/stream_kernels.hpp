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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sage/window/window.hpp"

namespace sage::window {

enum class Kernel : std::uint8_t { copy, scale, add, triad };

std::string_view to_string(Kernel k) noexcept;

// Bytes a kernel moves per the usual STREAM accounting: 16 per element for
// copy and scale, 24 for add and triad.
constexpr std::uint64_t kernel_bytes(Kernel k, std::uint64_t n) noexcept {
  return (k == Kernel::copy || k == Kernel::scale ? 16 : 24) * n;
}

struct KernelResult {
  Kernel kernel = Kernel::copy;
  std::uint64_t bytes = 0;
  VTime time = 0;
  double bandwidth = 0;  // bytes per virtual second
  bool verified = false;
};

struct StreamResult {
  std::array<KernelResult, 4> kernels;
  bool verified = false;
};

// Runs copy, scale, add and triad in that order over three windows of n
// doubles each, `chunk` elements at a time, from `ctx`'s rank. Storage
// windows are synced at the end of every kernel. After each kernel the
// output window is compared element-wise with the same kernel applied to
// plain arrays. Throws SizeMismatch unless every window holds 8n bytes.
StreamResult run_stream(IoCtx& ctx, Windows& windows, WindowId a, WindowId b, WindowId c, double q, std::uint64_t n,
                        std::uint64_t chunk = 8192);

std::vector<double> read_doubles(IoCtx& ctx, Windows& windows, WindowId id, std::uint64_t n);
void write_doubles(IoCtx& ctx, Windows& windows, WindowId id, std::span<const double> values);

}  // namespace sage::window
