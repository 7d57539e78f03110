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

#include <cstddef>
#include <cstdint>
#include <string_view>

// Data-parallel inner loops used by parity maintenance, the STREAM kernels
// and the builtin shipped functions. Each kernel has a scalar reference
// implementation and an AVX2 variant; the variant is chosen once at startup
// from CPUID and can be pinned with SAGE_ISA=scalar|avx2.
namespace sage::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
  Isa isa;
  // dst[i] ^= src[i]
  void (*xor_into)(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) noexcept;
  // c[i] = a[i]
  void (*copy)(double* c, const double* a, std::size_t n) noexcept;
  // b[i] = q * c[i]
  void (*scale)(double* b, const double* c, double q, std::size_t n) noexcept;
  // c[i] = a[i] + b[i]
  void (*add)(double* c, const double* a, const double* b, std::size_t n) noexcept;
  // a[i] = b[i] + q * c[i]
  void (*triad)(double* a, const double* b, const double* c, double q, std::size_t n) noexcept;
  // Wrapping sum of the little-endian 64-bit words in [p, p + n_bytes).
  // n_bytes must be a multiple of 8.
  std::uint64_t (*sum_u64)(const std::uint8_t* p, std::size_t n_bytes) noexcept;
  // Number of byte positions equal to v.
  std::uint64_t (*count_byte)(const std::uint8_t* p, std::size_t n, std::uint8_t v) noexcept;
  // Number of 8-byte aligned words equal to v. n_bytes multiple of 8.
  std::uint64_t (*count_word)(const std::uint8_t* p, std::size_t n_bytes, std::uint64_t v) noexcept;
};

const KernelTable& scalar_kernels() noexcept;

// nullptr when the build or the CPU lacks AVX2.
const KernelTable* avx2_kernels() noexcept;

Isa detected_isa() noexcept;

// The table every engine calls through.
const KernelTable& kernels() noexcept;

// Test hook: re-point kernels() at a specific table. Falls back to scalar
// when the requested ISA is unavailable. Returns the ISA actually selected.
Isa select_isa(Isa isa) noexcept;

}  // namespace sage::simd
