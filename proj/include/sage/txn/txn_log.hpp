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
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sage/txn/txn_op.hpp"

namespace sage {

// Fault injection for the commit path. Budgets count down across commits;
// when one runs out the store raises SimulatedCrash.
struct CrashPlan {
  std::optional<std::uint64_t> log_bytes;  // bytes of log that still reach the file
  std::optional<std::uint64_t> apply_ops;  // ops that still get applied after a durable commit
};

struct LoggedTxn {
  TxnId id = 0;
  std::uint64_t lsn = 0;
  std::vector<TxnOp> ops;
};

// Redo log file: magic SAGELOG1, then length-prefixed records each carrying
// a 64-bit FNV-1a checksum of its payload.
class TxnLog {
 public:
  TxnLog(std::filesystem::path path, bool sync_writes);
  ~TxnLog();
  TxnLog(const TxnLog&) = delete;
  TxnLog& operator=(const TxnLog&) = delete;

  // Appends op records and a COMMIT marker. With a byte budget, writes at
  // most that many bytes and throws SimulatedCrash if it runs out.
  std::uint64_t append(TxnId id, std::uint64_t lsn, std::span<const TxnOp> ops,
                       std::optional<std::uint64_t>& byte_budget);

  struct Scan {
    std::vector<LoggedTxn> committed;  // in commit order
    std::uint64_t valid_bytes = 0;
    bool torn = false;  // a bad or partial record ended the scan
  };
  Scan scan() const;

  void truncate_to(std::uint64_t bytes);
  void reset();
  std::uint64_t size() const noexcept { return size_; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  void write_at(std::uint64_t offset, const std::uint8_t* data, std::uint64_t len);

  std::filesystem::path path_;
  bool sync_;
  int fd_ = -1;
  std::uint64_t size_ = 0;
};

}  // namespace sage
