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

#include "sage/txn/txn_log.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>

#include "sage/common/error.hpp"

namespace sage {
namespace {

constexpr std::string_view kMagic = "SAGELOG1";
constexpr std::uint64_t kRecordHeader = 16;
constexpr std::uint8_t kOpRecord = 0;
constexpr std::uint8_t kCommitRecord = 1;

void frame(ByteWriter& out, const Bytes& payload) {
  out.u64(payload.size());
  out.u64(fnv1a64(payload));
  out.raw(payload);
}

}  // namespace

TxnLog::TxnLog(std::filesystem::path path, bool sync_writes) : path_(std::move(path)), sync_(sync_writes) {
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
  if (fd_ < 0) raise(Errc::log_write_failed, path_.string() + ": " + std::strerror(errno));
  struct stat st {};
  ::fstat(fd_, &st);
  size_ = static_cast<std::uint64_t>(st.st_size);
  if (size_ == 0) reset();
}

TxnLog::~TxnLog() {
  if (fd_ >= 0) ::close(fd_);
}

void TxnLog::write_at(std::uint64_t offset, const std::uint8_t* data, std::uint64_t len) {
  while (len > 0) {
    ssize_t n = ::pwrite(fd_, data, len, static_cast<off_t>(offset));
    if (n < 0) {
      if (errno == EINTR) continue;
      raise(Errc::log_write_failed, path_.string() + ": " + std::strerror(errno));
    }
    data += n;
    offset += static_cast<std::uint64_t>(n);
    len -= static_cast<std::uint64_t>(n);
  }
}

std::uint64_t TxnLog::append(TxnId id, std::uint64_t lsn, std::span<const TxnOp> ops,
                             std::optional<std::uint64_t>& byte_budget) {
  ByteWriter out;
  for (const auto& op : ops) {
    ByteWriter p;
    p.u8(kOpRecord);
    p.u64(id);
    encode_op(p, op);
    frame(out, p.bytes());
  }
  ByteWriter c;
  c.u8(kCommitRecord);
  c.u64(id);
  c.u64(lsn);
  frame(out, c.bytes());

  const Bytes& buf = out.bytes();
  std::uint64_t len = buf.size();
  const bool torn = byte_budget && *byte_budget < len;
  if (byte_budget) {
    len = std::min(len, *byte_budget);
    *byte_budget -= len;
  }
  write_at(size_, buf.data(), len);
  size_ += len;
  if (sync_) ::fdatasync(fd_);
  if (torn) throw SimulatedCrash("log write torn after " + std::to_string(len) + " bytes");
  return len;
}

TxnLog::Scan TxnLog::scan() const {
  Scan result;
  Bytes data(size_);
  std::uint64_t got = 0;
  while (got < size_) {
    ssize_t n = ::pread(fd_, data.data() + got, size_ - got, static_cast<off_t>(got));
    if (n <= 0) break;
    got += static_cast<std::uint64_t>(n);
  }
  data.resize(got);
  if (data.size() < kMagic.size() || to_string(ByteView(data).first(kMagic.size())) != kMagic)
    raise(Errc::corrupt_log, path_.string() + ": bad magic");

  std::map<TxnId, std::vector<TxnOp>> pending;
  std::uint64_t pos = kMagic.size();
  result.valid_bytes = pos;
  while (pos < data.size()) {
    if (data.size() - pos < kRecordHeader) {
      result.torn = true;
      break;
    }
    const std::uint64_t len = load_le64(data.data() + pos);
    const std::uint64_t sum = load_le64(data.data() + pos + 8);
    if (len > data.size() - pos - kRecordHeader) {
      result.torn = true;
      break;
    }
    ByteView payload(data.data() + pos + kRecordHeader, len);
    if (fnv1a64(payload) != sum) {
      result.torn = true;
      break;
    }
    try {
      ByteReader r(payload);
      const std::uint8_t type = r.u8();
      const TxnId id = r.u64();
      if (type == kOpRecord) {
        pending[id].push_back(decode_op(r));
      } else if (type == kCommitRecord) {
        LoggedTxn t{id, r.u64(), {}};
        if (auto it = pending.find(id); it != pending.end()) {
          t.ops = std::move(it->second);
          pending.erase(it);
        }
        result.committed.push_back(std::move(t));
        result.valid_bytes = pos + kRecordHeader + len;
      } else {
        result.torn = true;
        break;
      }
    } catch (const Error&) {
      result.torn = true;
      break;
    }
    pos += kRecordHeader + len;
  }
  // Op records with no commit after them belong to a txn that never
  // committed; they are part of the torn tail, or a later txn reusing the id
  // would pick them up.
  if (result.valid_bytes < data.size()) result.torn = true;
  return result;
}

void TxnLog::truncate_to(std::uint64_t bytes) {
  if (::ftruncate(fd_, static_cast<off_t>(bytes)) != 0)
    raise(Errc::log_write_failed, path_.string() + ": " + std::strerror(errno));
  size_ = bytes;
}

void TxnLog::reset() {
  truncate_to(0);
  write_at(0, reinterpret_cast<const std::uint8_t*>(kMagic.data()), kMagic.size());
  size_ = kMagic.size();
  if (sync_) ::fdatasync(fd_);
}

}  // namespace sage
