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

// Compiled with -mavx2 only; callers reach it through the dispatch table
// after a CPUID check.

#include "sage/simd/kernels.hpp"

#if defined(SAGE_HAVE_AVX2_TU)

#include <immintrin.h>

#include <bit>

namespace sage::simd {
namespace {

void xor_into(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) noexcept {
  std::size_t i = 0;
  for (; i + 128 <= n; i += 128) {
    for (std::size_t k = 0; k < 128; k += 32) {
      __m256i a = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i + k));
      __m256i b = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i + k));
      _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i + k), _mm256_xor_si256(a, b));
    }
  }
  for (; i + 32 <= n; i += 32) {
    __m256i a = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i));
    __m256i b = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_xor_si256(a, b));
  }
  for (; i < n; ++i) dst[i] ^= src[i];
}

void copy(double* c, const double* a, std::size_t n) noexcept {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(c + i, _mm256_loadu_pd(a + i));
  for (; i < n; ++i) c[i] = a[i];
}

void scale(double* b, const double* c, double q, std::size_t n) noexcept {
  const __m256d vq = _mm256_set1_pd(q);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(b + i, _mm256_mul_pd(vq, _mm256_loadu_pd(c + i)));
  for (; i < n; ++i) b[i] = q * c[i];
}

void add(double* c, const double* a, const double* b, std::size_t n) noexcept {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

// Separate multiply and add, no FMA: results must match the scalar kernel
// bit for bit.
void triad(double* a, const double* b, const double* c, double q, std::size_t n) noexcept {
  const __m256d vq = _mm256_set1_pd(q);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(vq, _mm256_loadu_pd(c + i));
    _mm256_storeu_pd(a + i, _mm256_add_pd(_mm256_loadu_pd(b + i), prod));
  }
  for (; i < n; ++i) a[i] = b[i] + q * c[i];
}

std::uint64_t sum_u64(const std::uint8_t* p, std::size_t n_bytes) noexcept {
  __m256i acc0 = _mm256_setzero_si256();
  __m256i acc1 = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 64 <= n_bytes; i += 64) {
    acc0 = _mm256_add_epi64(acc0, _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p + i)));
    acc1 = _mm256_add_epi64(acc1, _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p + i + 32)));
  }
  for (; i + 32 <= n_bytes; i += 32)
    acc0 = _mm256_add_epi64(acc0, _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p + i)));
  acc0 = _mm256_add_epi64(acc0, acc1);
  alignas(32) std::uint64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc0);
  std::uint64_t sum = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i + 8 <= n_bytes; i += 8) {
    std::uint64_t w;
    __builtin_memcpy(&w, p + i, 8);
    sum += w;
  }
  return sum;
}

std::uint64_t count_byte(const std::uint8_t* p, std::size_t n, std::uint8_t v) noexcept {
  const __m256i needle = _mm256_set1_epi8(static_cast<char>(v));
  std::uint64_t count = 0;
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i chunk = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p + i));
    auto mask = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(chunk, needle)));
    count += static_cast<std::uint64_t>(std::popcount(mask));
  }
  for (; i < n; ++i) count += (p[i] == v);
  return count;
}

std::uint64_t count_word(const std::uint8_t* p, std::size_t n_bytes, std::uint64_t v) noexcept {
  const __m256i needle = _mm256_set1_epi64x(static_cast<long long>(v));
  std::uint64_t count = 0;
  std::size_t i = 0;
  for (; i + 32 <= n_bytes; i += 32) {
    __m256i chunk = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p + i));
    auto mask = static_cast<std::uint32_t>(_mm256_movemask_pd(_mm256_castsi256_pd(_mm256_cmpeq_epi64(chunk, needle))));
    count += static_cast<std::uint64_t>(std::popcount(mask));
  }
  for (; i + 8 <= n_bytes; i += 8) {
    std::uint64_t w;
    __builtin_memcpy(&w, p + i, 8);
    count += (w == v);
  }
  return count;
}

constexpr KernelTable kAvx2{
    Isa::avx2, xor_into, copy, scale, add, triad, sum_u64, count_byte, count_word,
};

}  // namespace

const KernelTable* avx2_table_unchecked() noexcept { return &kAvx2; }

}  // namespace sage::simd

#else

namespace sage::simd {
const KernelTable* avx2_table_unchecked() noexcept { return nullptr; }
}  // namespace sage::simd

#endif
