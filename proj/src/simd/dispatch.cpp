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

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "sage/simd/kernels.hpp"

namespace sage::simd {

const KernelTable* avx2_table_unchecked() noexcept;

namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* initial_table() noexcept {
  const char* forced = std::getenv("SAGE_ISA");
  if (forced != nullptr && std::string_view(forced) == "scalar") return &scalar_kernels();
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

const KernelTable* avx2_kernels() noexcept {
  static const KernelTable* table = cpu_has_avx2() ? avx2_table_unchecked() : nullptr;
  return table;
}

Isa detected_isa() noexcept { return avx2_kernels() != nullptr ? Isa::avx2 : Isa::scalar; }

const KernelTable& kernels() noexcept { return *active().load(std::memory_order_relaxed); }

Isa select_isa(Isa isa) noexcept {
  const KernelTable* table = &scalar_kernels();
  if (isa == Isa::avx2 && avx2_kernels() != nullptr) table = avx2_kernels();
  active().store(table, std::memory_order_relaxed);
  return table->isa;
}

}  // namespace sage::simd
