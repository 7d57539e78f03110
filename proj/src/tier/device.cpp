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

#include "sage/tier/device.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <string>

#include "sage/common/error.hpp"

namespace sage {
namespace {

constexpr char kMagic[8] = {'S', 'A', 'G', 'E', 'D', 'E', 'V', '1'};

}  // namespace

DeviceProfile default_profile(TierId tier) {
  constexpr std::uint64_t MiB = 1ULL << 20;
  constexpr std::uint64_t GiB = 1ULL << 30;
  switch (tier) {
    case 1: return {256 * MiB, 10e9, 10e9, 1e-6};
    case 2: return {1 * GiB, 2e9, 2e9, 50e-6};
    case 3: return {4 * GiB, 200e6, 200e6, 5e-3};
    case 4: return {16 * GiB, 100e6, 100e6, 15e-3};
    default: raise(Errc::bad_config, "tier must be 1..4, got " + std::to_string(tier));
  }
}

DeviceProfile default_memory_profile() { return {64ULL << 30, 20e9, 20e9, 1e-7}; }

void validate_profile(const DeviceProfile& p) {
  if (p.capacity_bytes == 0 || !(p.read_bw > 0) || !(p.write_bw > 0) || !(p.latency > 0))
    raise(Errc::bad_config, "device profile values must be positive");
}

Device::Device(const DeviceConfig& config, std::filesystem::path backing, std::uint64_t block_size,
               bool sync_writes)
    : config_(config),
      path_(std::move(backing)),
      block_size_(block_size),
      capacity_blocks_(config.profile.capacity_bytes / block_size),
      sync_writes_(sync_writes) {
  validate_profile(config_.profile);
  if (capacity_blocks_ == 0) raise(Errc::bad_config, "device smaller than one block");
  bool exists = std::filesystem::exists(path_);
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
  if (fd_ < 0) raise(Errc::bad_config, "cannot open " + path_.string() + ": " + std::strerror(errno));
  if (exists && std::filesystem::file_size(path_) >= kHeaderBytes) {
    check_header();
  } else {
    write_header();
    if (::ftruncate(fd_, static_cast<off_t>(kHeaderBytes + capacity_blocks_ * block_size_)) != 0)
      raise(Errc::bad_config, "cannot size " + path_.string());
  }
  used_.assign(capacity_blocks_, false);
}

Device::~Device() {
  if (fd_ >= 0) ::close(fd_);
}

void Device::write_header() {
  ByteWriter w(kHeaderBytes);
  w.raw(ByteView(reinterpret_cast<const std::uint8_t*>(kMagic), sizeof kMagic));
  w.u32(kVersion);
  w.u64(block_size_);
  w.u64(capacity_blocks_ * block_size_);
  Bytes header = w.take();
  header.resize(kHeaderBytes, 0);
  pwrite_all(header.data(), header.size(), 0);
}

void Device::check_header() {
  Bytes header(28);
  pread_all(header.data(), header.size(), 0);
  if (std::memcmp(header.data(), kMagic, sizeof kMagic) != 0)
    raise(Errc::bad_config, path_.string() + " is not a device file");
  ByteReader r(ByteView(header).subspan(8));
  std::uint32_t version = r.u32();
  std::uint64_t bs = r.u64();
  std::uint64_t cap = r.u64();
  if (version != kVersion || bs != block_size_ || cap != capacity_blocks_ * block_size_)
    raise(Errc::bad_config, path_.string() + " geometry does not match the configuration");
}

void Device::pwrite_all(const std::uint8_t* data, std::uint64_t len, std::uint64_t offset) {
  while (len > 0) {
    ssize_t n = ::pwrite(fd_, data, len, static_cast<off_t>(offset));
    if (n < 0) {
      if (errno == EINTR) continue;
      raise(Errc::device_failed, "write " + path_.string() + ": " + std::strerror(errno));
    }
    data += n;
    len -= static_cast<std::uint64_t>(n);
    offset += static_cast<std::uint64_t>(n);
  }
}

void Device::pread_all(std::uint8_t* data, std::uint64_t len, std::uint64_t offset) const {
  while (len > 0) {
    ssize_t n = ::pread(fd_, data, len, static_cast<off_t>(offset));
    if (n < 0) {
      if (errno == EINTR) continue;
      raise(Errc::device_failed, "read " + path_.string() + ": " + std::strerror(errno));
    }
    if (n == 0) {  // past EOF: sparse tail
      std::memset(data, 0, len);
      return;
    }
    data += n;
    len -= static_cast<std::uint64_t>(n);
    offset += static_cast<std::uint64_t>(n);
  }
}

bool Device::online() const {
  std::lock_guard lock(mu_);
  return state_ == DeviceState::online;
}

DeviceState Device::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

void Device::check_online() const {
  if (state_ != DeviceState::online) raise(Errc::device_failed, "device " + std::to_string(config_.id));
}

void Device::check_index(std::uint64_t index) const {
  if (index >= capacity_blocks_)
    raise(Errc::out_of_capacity, "block " + std::to_string(index) + " beyond device " + std::to_string(config_.id));
}

VTime Device::cost(std::uint64_t bytes, double bw) const noexcept {
  return config_.profile.latency + static_cast<double>(bytes) / bw;
}

IoResult Device::write_block(std::uint64_t index, ByteView data, VTime at) {
  BlockWrite w{index, data};
  return write_blocks(std::span<const BlockWrite>(&w, 1), at);
}

std::pair<Bytes, IoResult> Device::read_block(std::uint64_t index, VTime at) {
  std::vector<Bytes> out;
  IoResult r = read_blocks(std::span<const std::uint64_t>(&index, 1), out, at);
  return {std::move(out.front()), r};
}

IoResult Device::write_blocks(std::span<const BlockWrite> writes, VTime at) {
  std::lock_guard lock(mu_);
  check_online();
  for (const auto& w : writes) {
    if (w.data.size() != block_size_)
      raise(Errc::bad_length, std::to_string(w.data.size()) + " bytes, block is " + std::to_string(block_size_));
    check_index(w.index);
  }
  for (const auto& w : writes) pwrite_all(w.data.data(), block_size_, kHeaderBytes + w.index * block_size_);
  if (sync_writes_ && !writes.empty()) ::fdatasync(fd_);
  const std::uint64_t bytes = writes.size() * block_size_;
  const VTime c = cost(bytes, config_.profile.write_bw);
  const VTime start = std::max(at, busy_until_);
  busy_until_ = start + c;
  counters_.bytes_written += bytes;
  counters_.write_ops += 1;
  counters_.busy_time += c;
  return {busy_until_, c};
}

IoResult Device::read_blocks(std::span<const std::uint64_t> indices, std::vector<Bytes>& out, VTime at) {
  std::lock_guard lock(mu_);
  check_online();
  for (std::uint64_t idx : indices) check_index(idx);
  out.clear();
  out.reserve(indices.size());
  for (std::uint64_t idx : indices) {
    Bytes block(block_size_);
    pread_all(block.data(), block_size_, kHeaderBytes + idx * block_size_);
    out.push_back(std::move(block));
  }
  const std::uint64_t bytes = indices.size() * block_size_;
  const VTime c = cost(bytes, config_.profile.read_bw);
  const VTime start = std::max(at, busy_until_);
  busy_until_ = start + c;
  counters_.bytes_read += bytes;
  counters_.read_ops += 1;
  counters_.busy_time += c;
  return {busy_until_, c};
}

void Device::fail() {
  Listener listener;
  {
    std::lock_guard lock(mu_);
    if (state_ == DeviceState::failed) return;
    state_ = DeviceState::failed;
    listener = listener_;
  }
  if (listener) listener(config_.id, DeviceEvent::failed);
}

void Device::restore(bool wipe) {
  Listener listener;
  {
    std::lock_guard lock(mu_);
    if (wipe) {
      if (::ftruncate(fd_, static_cast<off_t>(kHeaderBytes)) != 0 ||
          ::ftruncate(fd_, static_cast<off_t>(kHeaderBytes + capacity_blocks_ * block_size_)) != 0)
        raise(Errc::device_failed, "cannot wipe " + path_.string());
      std::fill(used_.begin(), used_.end(), false);
      used_count_ = 0;
      search_hint_ = 0;
    }
    state_ = DeviceState::online;
    listener = listener_;
  }
  if (listener) listener(config_.id, wipe ? DeviceEvent::restored_wiped : DeviceEvent::restored);
}

std::optional<std::uint64_t> Device::allocate() {
  std::lock_guard lock(mu_);
  if (used_count_ == capacity_blocks_) return std::nullopt;
  for (std::uint64_t i = search_hint_; i < capacity_blocks_; ++i) {
    if (!used_[i]) {
      used_[i] = true;
      ++used_count_;
      search_hint_ = i + 1;
      return i;
    }
  }
  for (std::uint64_t i = 0; i < search_hint_; ++i) {
    if (!used_[i]) {
      used_[i] = true;
      ++used_count_;
      search_hint_ = i + 1;
      return i;
    }
  }
  return std::nullopt;
}

void Device::release(std::uint64_t index) {
  std::lock_guard lock(mu_);
  if (index < capacity_blocks_ && used_[index]) {
    used_[index] = false;
    --used_count_;
    search_hint_ = std::min(search_hint_, index);
  }
}

void Device::claim(std::uint64_t index) {
  std::lock_guard lock(mu_);
  check_index(index);
  if (!used_[index]) {
    used_[index] = true;
    ++used_count_;
  }
}

void Device::reset_allocations() {
  std::lock_guard lock(mu_);
  std::fill(used_.begin(), used_.end(), false);
  used_count_ = 0;
  search_hint_ = 0;
}

std::uint64_t Device::used_blocks() const {
  std::lock_guard lock(mu_);
  return used_count_;
}

std::uint64_t Device::free_blocks() const {
  std::lock_guard lock(mu_);
  return capacity_blocks_ - used_count_;
}

DeviceCounters Device::counters() const {
  std::lock_guard lock(mu_);
  return counters_;
}

void Device::set_listener(Listener listener) {
  std::lock_guard lock(mu_);
  listener_ = std::move(listener);
}

void Device::reset_queue() {
  std::lock_guard lock(mu_);
  busy_until_ = 0;
}

DevicePool::DevicePool(std::filesystem::path dir, std::uint64_t block_size, bool sync_writes)
    : dir_(std::move(dir)), block_size_(block_size), sync_writes_(sync_writes) {
  std::filesystem::create_directories(dir_);
}

Device& DevicePool::add(const DeviceConfig& config) {
  if (devices_.count(config.id) != 0) raise(Errc::bad_config, "duplicate device id " + std::to_string(config.id));
  auto path = dir_ / ("d" + std::to_string(config.id) + ".dev");
  auto dev = std::make_unique<Device>(config, path, block_size_, sync_writes_);
  Device& ref = *dev;
  devices_.emplace(config.id, std::move(dev));
  return ref;
}

Device& DevicePool::get(DeviceId id) {
  auto it = devices_.find(id);
  if (it == devices_.end()) raise(Errc::invalid_argument, "unknown device " + std::to_string(id));
  return *it->second;
}

const Device& DevicePool::get(DeviceId id) const {
  auto it = devices_.find(id);
  if (it == devices_.end()) raise(Errc::invalid_argument, "unknown device " + std::to_string(id));
  return *it->second;
}

bool DevicePool::contains(DeviceId id) const noexcept { return devices_.count(id) != 0; }

std::vector<DeviceId> DevicePool::ids() const {
  std::vector<DeviceId> out;
  for (const auto& [id, d] : devices_) out.push_back(id);
  return out;
}

std::vector<DeviceId> DevicePool::in_tier(TierId tier, bool include_spares) const {
  std::vector<DeviceId> out;
  for (const auto& [id, d] : devices_)
    if (d->tier() == tier && (include_spares || !d->spare())) out.push_back(id);
  return out;
}

std::vector<DeviceId> DevicePool::spares(TierId tier) const {
  std::vector<DeviceId> out;
  for (const auto& [id, d] : devices_)
    if (d->tier() == tier && d->spare()) out.push_back(id);
  return out;
}

std::vector<DeviceId> DevicePool::on_node(NodeId node) const {
  std::vector<DeviceId> out;
  for (const auto& [id, d] : devices_)
    if (d->node() == node) out.push_back(id);
  return out;
}

DevicePool::TierUsage DevicePool::tier_usage(TierId tier) const {
  TierUsage u;
  for (const auto& [id, d] : devices_) {
    if (d->tier() != tier || d->spare()) continue;
    u.used_bytes += d->used_blocks() * block_size_;
    u.capacity_bytes += d->capacity_blocks() * block_size_;
  }
  return u;
}

void DevicePool::set_listener(const Device::Listener& listener) {
  for (auto& [id, d] : devices_) d->set_listener(listener);
}

}  // namespace sage
