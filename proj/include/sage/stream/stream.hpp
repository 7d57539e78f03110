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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "sage/common/bytes.hpp"
#include "sage/common/types.hpp"
#include "sage/core/ids.hpp"
#include "sage/store/store.hpp"

namespace sage::sim {
class Cluster;
}

namespace sage::stream {

using StreamId = std::uint64_t;

// Particle record: x, y, z, u, v, w, q, id as little-endian 8-byte scalars.
constexpr std::size_t kParticleBytes = 64;
constexpr std::size_t kChargeOffset = 48;

struct Particle {
  double x = 0, y = 0, z = 0;
  double u = 0, v = 0, w = 0;
  double q = 0;
  std::uint64_t id = 0;
  bool operator==(const Particle&) const = default;
};

Bytes encode_particle(const Particle& p);
Particle decode_particle(ByteView b);

struct StreamDescriptor {
  StreamId id = 1;
  std::vector<RankId> producers;
  std::vector<RankId> consumers;
  std::size_t element_bytes = kParticleBytes;
  // producer -> consumer; producers left out use position mod |consumers|.
  std::map<RankId, RankId> routing;
  std::size_t channel_capacity = 1024;  // elements buffered per consumer
  std::size_t batch_elements = 64;      // elements per message
  VTime consume_cost = 20e-9;           // consumer CPU per element
};

// Throws InvalidDescriptor.
void validate(const StreamDescriptor& d);

struct Element {
  RankId producer = 0;
  std::uint64_t seq = 0;
  ByteView bytes;
};

// Consumer-side work attached to a stream. `consume` sees elements in
// arrival order and advances ctx.now by what it costs; `finish` runs once
// at termination.
class Computation {
 public:
  virtual ~Computation() = default;
  virtual void consume(IoCtx& ctx, const Element& e) = 0;
  virtual void finish(IoCtx&) {}
};

// Appends every element to an object, a block at a time.
class WriteToObject final : public Computation {
 public:
  WriteToObject(Store& store, ObjectId object, std::size_t flush_blocks = 16);
  void consume(IoCtx& ctx, const Element& e) override;
  void finish(IoCtx& ctx) override;
  std::uint64_t bytes_written() const noexcept { return total_; }
  const ObjectId& object() const noexcept { return object_; }

 private:
  void flush(IoCtx& ctx, bool partial);

  Store& store_;
  ObjectId object_;
  std::size_t flush_bytes_;
  std::uint64_t block_size_;
  std::uint64_t next_block_ = 0;
  std::uint64_t total_ = 0;
  Bytes buffer_;
};

// Counts a little-endian f64 field into equal-width bins over [lo, hi).
class Histogram final : public Computation {
 public:
  Histogram(double lo, double hi, std::size_t bins, std::size_t offset = kChargeOffset);
  void consume(IoCtx& ctx, const Element& e) override;
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  std::uint64_t underflow() const noexcept { return under_; }
  std::uint64_t overflow() const noexcept { return over_; }
  // Bin of v, or nullopt outside [lo, hi).
  std::optional<std::size_t> bin(double v) const;

 private:
  double lo_, hi_;
  std::size_t offset_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t under_ = 0, over_ = 0;
};

// User plugin from a callback.
class Callback final : public Computation {
 public:
  using Fn = std::function<void(IoCtx&, const Element&)>;
  explicit Callback(Fn fn) : fn_(std::move(fn)) {}
  void consume(IoCtx& ctx, const Element& e) override { fn_(ctx, e); }

 private:
  Fn fn_;
};

struct DrainReport {
  std::map<RankId, std::uint64_t> per_consumer;
  std::uint64_t total = 0;
  std::vector<RankId> crashed_producers;
  std::vector<RankId> crashed_consumers;
  std::uint64_t lost_unacked = 0;   // buffered at a producer when it crashed
  std::size_t peak_buffered = 0;    // max elements waiting in any channel
  VTime finished = 0;
};

// Frames: u32 length, then stream id u64, seq u64, element bytes; all
// little-endian. One message carries consecutive elements of one producer.
Bytes encode_frames(StreamId id, std::uint64_t first_seq, std::span<const Bytes> elements);
struct Frame {
  StreamId stream = 0;
  std::uint64_t seq = 0;
  Bytes bytes;
};
// Throws Error(corrupt) on malformed input.
std::vector<Frame> decode_frames(ByteView wire);

// A parallel stream over the simulated cluster. Producers send, the engine
// batches, routes and delivers each element exactly once to its consumer.
class Stream {
 public:
  Stream(sim::Cluster& cluster, StreamDescriptor descriptor);
  ~Stream();
  Stream(const Stream&) = delete;
  Stream& operator=(const Stream&) = delete;

  // Throws AlreadyAttached, or invalid_argument for a non-consumer.
  void attach(RankId consumer, std::unique_ptr<Computation> computation);

  // Queues one element; a full batch is sent at once. ctx.now advances only
  // when the producer is held back by a full channel. Throws NotAProducer,
  // SchemaMismatch, StreamTerminated, or NodeDown for a crashed producer.
  void send(IoCtx& ctx, RankId producer, ByteView element);
  // Sends whatever the producer has queued.
  void flush(IoCtx& ctx, RankId producer);
  // Flushes every live producer, finishes the computations and reports.
  DrainReport terminate(IoCtx& ctx);

  const StreamDescriptor& descriptor() const noexcept { return desc_; }
  RankId route(RankId producer) const;
  bool terminated() const noexcept { return terminated_; }
  // Sequence numbers acknowledged to a producer, in order.
  const std::vector<std::uint64_t>& acked(RankId producer) const;
  // (producer, seq) in the order a consumer processed them.
  const std::vector<std::pair<RankId, std::uint64_t>>& deliveries(RankId consumer) const;
  VTime consumer_clock(RankId consumer) const;

 private:
  struct Producer {
    RankId rank = 0;
    NodeId node = 0;
    RankId consumer = 0;
    std::uint64_t next_seq = 0;
    std::vector<Bytes> pending;
    std::vector<std::uint64_t> acked;
    bool crashed = false;
  };
  struct Consumer {
    RankId rank = 0;
    NodeId node = 0;
    std::unique_ptr<Computation> computation;
    VTime busy = 0;
    std::priority_queue<VTime, std::vector<VTime>, std::greater<>> in_channel;  // finish times
    std::size_t peak = 0;
    std::uint64_t count = 0;
    std::vector<std::pair<RankId, std::uint64_t>> log;
    bool crashed = false;
  };

  Producer& producer(RankId rank);
  Consumer& consumer(RankId rank);
  void ship(IoCtx& ctx, Producer& p);
  void on_crash(NodeId node, VTime t);
  void reroute(const Consumer& lost);
  void emit(VTime t, NodeId node, const char* metric, double value, RankId producer, RankId consumer);

  sim::Cluster& cluster_;
  StreamDescriptor desc_;
  std::map<RankId, Producer> producers_;
  std::map<RankId, Consumer> consumers_;
  std::map<RankId, std::uint64_t> delivered_;  // next seq expected per producer, across consumers
  std::uint64_t lost_unacked_ = 0;
  std::uint64_t crash_token_ = 0;
  bool terminated_ = false;
};

}  // namespace sage::stream
