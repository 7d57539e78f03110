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

#include <cstring>

#include "sage/simd/kernels.hpp"

namespace sage::simd {
namespace {

void xor_into(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) dst[i] ^= src[i];
}

void copy(double* c, const double* a, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i];
}

void scale(double* b, const double* c, double q, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) b[i] = q * c[i];
}

void add(double* c, const double* a, const double* b, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void triad(double* a, const double* b, const double* c, double q, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) a[i] = b[i] + q * c[i];
}

std::uint64_t sum_u64(const std::uint8_t* p, std::size_t n_bytes) noexcept {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i + 8 <= n_bytes; i += 8) {
    std::uint64_t w = 0;
    for (int k = 0; k < 8; ++k) w |= static_cast<std::uint64_t>(p[i + k]) << (8 * k);
    sum += w;
  }
  return sum;
}

std::uint64_t count_byte(const std::uint8_t* p, std::size_t n, std::uint8_t v) noexcept {
  std::uint64_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += (p[i] == v);
  return count;
}

std::uint64_t count_word(const std::uint8_t* p, std::size_t n_bytes, std::uint64_t v) noexcept {
  std::uint64_t count = 0;
  for (std::size_t i = 0; i + 8 <= n_bytes; i += 8) {
    std::uint64_t w = 0;
    for (int k = 0; k < 8; ++k) w |= static_cast<std::uint64_t>(p[i + k]) << (8 * k);
    count += (w == v);
  }
  return count;
}

constexpr KernelTable kScalar{
    Isa::scalar, xor_into, copy, scale, add, triad, sum_u64, count_byte, count_word,
};

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

}  // namespace sage::simd
