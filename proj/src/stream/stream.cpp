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

#include "sage/stream/stream.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>

#include "sage/common/error.hpp"
#include "sage/sim/cluster.hpp"

namespace sage::stream {
namespace {

constexpr std::size_t kFrameHeader = 4 + 8 + 8;
constexpr std::uint64_t kAckBytes = 16;

}  // namespace

Bytes encode_particle(const Particle& p) {
  ByteWriter w(kParticleBytes);
  w.f64(p.x);
  w.f64(p.y);
  w.f64(p.z);
  w.f64(p.u);
  w.f64(p.v);
  w.f64(p.w);
  w.f64(p.q);
  w.u64(p.id);
  return w.take();
}

Particle decode_particle(ByteView b) {
  if (b.size() != kParticleBytes) raise(Errc::schema_mismatch, "particle is 64 bytes");
  ByteReader r(b);
  Particle p;
  p.x = r.f64();
  p.y = r.f64();
  p.z = r.f64();
  p.u = r.f64();
  p.v = r.f64();
  p.w = r.f64();
  p.q = r.f64();
  p.id = r.u64();
  return p;
}

void validate(const StreamDescriptor& d) {
  auto bad = [](const std::string& why) { raise(Errc::invalid_descriptor, why); };
  if (d.producers.empty()) bad("no producers");
  if (d.consumers.empty()) bad("no consumers");
  if (d.element_bytes == 0) bad("zero element size");
  if (d.channel_capacity == 0) bad("zero channel capacity");
  if (d.batch_elements == 0 || d.batch_elements > d.channel_capacity) bad("batch must fit the channel");
  if (!(d.consume_cost >= 0)) bad("negative consume cost");
  const std::set<RankId> p(d.producers.begin(), d.producers.end());
  const std::set<RankId> c(d.consumers.begin(), d.consumers.end());
  if (p.size() != d.producers.size()) bad("duplicate producer");
  if (c.size() != d.consumers.size()) bad("duplicate consumer");
  for (RankId r : p)
    if (c.count(r) != 0) bad("rank " + std::to_string(r) + " both produces and consumes");
  for (const auto& [from, to] : d.routing) {
    if (p.count(from) == 0) bad("route from non-producer " + std::to_string(from));
    if (c.count(to) == 0) bad("route to non-consumer " + std::to_string(to));
  }
}

Bytes encode_frames(StreamId id, std::uint64_t first_seq, std::span<const Bytes> elements) {
  std::size_t total = 0;
  for (const auto& e : elements) total += kFrameHeader + e.size();
  ByteWriter w(total);
  for (std::size_t i = 0; i < elements.size(); ++i) {
    w.u32(static_cast<std::uint32_t>(elements[i].size()));
    w.u64(id);
    w.u64(first_seq + i);
    w.raw(elements[i]);
  }
  return w.take();
}

std::vector<Frame> decode_frames(ByteView wire) {
  std::vector<Frame> out;
  ByteReader r(wire);
  while (!r.done()) {
    Frame f;
    const auto len = r.u32();
    f.stream = r.u64();
    f.seq = r.u64();
    const auto body = r.raw(len);
    f.bytes.assign(body.begin(), body.end());
    out.push_back(std::move(f));
  }
  return out;
}

// --- computations ---------------------------------------------------------

WriteToObject::WriteToObject(Store& store, ObjectId object, std::size_t flush_blocks)
    : store_(store), object_(object), block_size_(store.meta(object).block_size) {
  flush_bytes_ = static_cast<std::size_t>(std::max<std::size_t>(flush_blocks, 1) * block_size_);
}

void WriteToObject::consume(IoCtx& ctx, const Element& e) {
  buffer_.insert(buffer_.end(), e.bytes.begin(), e.bytes.end());
  total_ += e.bytes.size();
  if (buffer_.size() >= flush_bytes_) flush(ctx, false);
}

void WriteToObject::finish(IoCtx& ctx) { flush(ctx, true); }

void WriteToObject::flush(IoCtx& ctx, bool partial) {
  const std::size_t whole = buffer_.size() / block_size_ * block_size_;
  std::size_t n = whole;
  if (partial && buffer_.size() > whole) {
    buffer_.resize(whole + block_size_, 0);  // zero tail
    n = buffer_.size();
  }
  if (n == 0) return;
  store_.write(ctx, object_, next_block_, ByteView(buffer_.data(), n));
  next_block_ += n / block_size_;
  // Only the unpadded remainder of a non-final flush is carried over.
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(partial ? buffer_.size() : n));
}

Histogram::Histogram(double lo, double hi, std::size_t bins, std::size_t offset)
    : lo_(lo), hi_(hi), offset_(offset), counts_(bins, 0) {
  if (bins == 0 || !(hi > lo)) raise(Errc::invalid_argument, "histogram needs bins > 0 and hi > lo");
}

std::optional<std::size_t> Histogram::bin(double v) const {
  if (!(v >= lo_) || !(v < hi_)) return std::nullopt;
  const auto n = counts_.size();
  auto i = static_cast<std::size_t>((v - lo_) / (hi_ - lo_) * static_cast<double>(n));
  return std::min(i, n - 1);
}

void Histogram::consume(IoCtx&, const Element& e) {
  if (e.bytes.size() < offset_ + 8) raise(Errc::schema_mismatch, "element too short for histogram field");
  const double v = std::bit_cast<double>(load_le64(e.bytes.data() + offset_));
  if (auto i = bin(v)) {
    ++counts_[*i];
  } else if (v < lo_) {
    ++under_;
  } else {
    ++over_;  // NaN lands here too
  }
}

// --- stream ---------------------------------------------------------------

Stream::Stream(sim::Cluster& cluster, StreamDescriptor descriptor) : cluster_(cluster), desc_(std::move(descriptor)) {
  validate(desc_);
  for (RankId r : desc_.consumers) {
    Consumer c;
    c.rank = r;
    c.node = cluster_.node_of(r);
    consumers_.emplace(r, std::move(c));
  }
  for (std::size_t i = 0; i < desc_.producers.size(); ++i) {
    Producer p;
    p.rank = desc_.producers[i];
    p.node = cluster_.node_of(p.rank);
    auto it = desc_.routing.find(p.rank);
    p.consumer = it != desc_.routing.end() ? it->second : desc_.consumers[i % desc_.consumers.size()];
    producers_.emplace(p.rank, std::move(p));
  }
  crash_token_ = cluster_.on_crash([this](NodeId n, VTime t) { on_crash(n, t); });
}

Stream::~Stream() { cluster_.remove_listener(crash_token_); }

Stream::Producer& Stream::producer(RankId rank) {
  auto it = producers_.find(rank);
  if (it == producers_.end()) raise(Errc::not_a_producer, "rank " + std::to_string(rank));
  return it->second;
}

Stream::Consumer& Stream::consumer(RankId rank) {
  auto it = consumers_.find(rank);
  if (it == consumers_.end()) raise(Errc::invalid_argument, "rank " + std::to_string(rank) + " is not a consumer");
  return it->second;
}

void Stream::attach(RankId rank, std::unique_ptr<Computation> computation) {
  auto& c = consumer(rank);
  if (c.computation) raise(Errc::already_attached, "consumer " + std::to_string(rank));
  c.computation = std::move(computation);
}

RankId Stream::route(RankId rank) const {
  auto it = producers_.find(rank);
  if (it == producers_.end()) raise(Errc::not_a_producer, "rank " + std::to_string(rank));
  return it->second.consumer;
}

const std::vector<std::uint64_t>& Stream::acked(RankId rank) const {
  auto it = producers_.find(rank);
  if (it == producers_.end()) raise(Errc::not_a_producer, "rank " + std::to_string(rank));
  return it->second.acked;
}

const std::vector<std::pair<RankId, std::uint64_t>>& Stream::deliveries(RankId rank) const {
  auto it = consumers_.find(rank);
  if (it == consumers_.end()) raise(Errc::invalid_argument, "not a consumer");
  return it->second.log;
}

VTime Stream::consumer_clock(RankId rank) const {
  auto it = consumers_.find(rank);
  if (it == consumers_.end()) raise(Errc::invalid_argument, "not a consumer");
  return it->second.busy;
}

void Stream::send(IoCtx& ctx, RankId rank, ByteView element) {
  if (terminated_) raise(Errc::stream_terminated, "stream " + std::to_string(desc_.id));
  auto& p = producer(rank);
  if (element.size() != desc_.element_bytes)
    raise(Errc::schema_mismatch,
          "element of " + std::to_string(element.size()) + " bytes, expected " + std::to_string(desc_.element_bytes));
  if (p.crashed || !cluster_.node_up(p.node)) raise(Errc::node_down, "producer " + std::to_string(rank));
  p.pending.emplace_back(element.begin(), element.end());
  ++p.next_seq;
  if (p.pending.size() >= desc_.batch_elements) ship(ctx, p);
}

void Stream::flush(IoCtx& ctx, RankId rank) {
  if (terminated_) raise(Errc::stream_terminated, "stream " + std::to_string(desc_.id));
  auto& p = producer(rank);
  if (p.crashed) raise(Errc::node_down, "producer " + std::to_string(rank));
  ship(ctx, p);
}

void Stream::ship(IoCtx& ctx, Producer& p) {
  if (p.pending.empty()) return;
  auto& c = consumer(p.consumer);
  if (c.crashed) raise(Errc::node_down, "no live consumer for producer " + std::to_string(p.rank));
  if (!c.computation) raise(Errc::invalid_state, "consumer " + std::to_string(c.rank) + " has no computation");

  const std::uint64_t n = p.pending.size();
  const std::uint64_t first = p.next_seq - n;
  const Bytes wire = encode_frames(desc_.id, first, p.pending);
  // Partitions throw after logging the drop; the batch stays queued.
  const VTime arrived = cluster_.fabric().transfer(p.node, c.node, wire.size(), MsgKind::stream, ctx.now);

  // Channel admission: wait for enough earlier elements to finish.
  while (!c.in_channel.empty() && c.in_channel.top() <= arrived) c.in_channel.pop();
  VTime accepted = arrived;
  while (c.in_channel.size() + n > desc_.channel_capacity) {
    accepted = std::max(accepted, c.in_channel.top());
    c.in_channel.pop();
  }

  VTime clock = std::max(c.busy, accepted);
  std::vector<VTime> finished;
  finished.reserve(n);
  for (auto& f : decode_frames(wire)) {
    if (f.stream != desc_.id) raise(Errc::corrupt, "frame for another stream");
    auto& expect = delivered_[p.rank];
    if (f.seq < expect) continue;  // already delivered
    if (f.seq > expect) raise(Errc::invalid_state, "gap in producer sequence");
    ++expect;
    IoCtx cctx{c.node, clock};
    c.computation->consume(cctx, Element{p.rank, f.seq, f.bytes});
    clock = cctx.now + desc_.consume_cost;
    finished.push_back(clock);
    c.log.emplace_back(p.rank, f.seq);
    ++c.count;
  }
  c.busy = clock;
  for (VTime t : finished) c.in_channel.push(t);
  c.peak = std::max(c.peak, c.in_channel.size());

  for (std::uint64_t s = first; s < first + n; ++s) p.acked.push_back(s);
  p.pending.clear();
  try {
    cluster_.fabric().transfer(c.node, p.node, kAckBytes, MsgKind::stream_ack, accepted);
  } catch (const Error&) {
    // The ack is lost; the consumer already owns the batch.
  }
  // Producers block only while the channel is full.
  if (accepted > arrived) ctx.now = std::max(ctx.now, accepted);
  emit(accepted, c.node, "batch", static_cast<double>(n), p.rank, c.rank);
}

void Stream::on_crash(NodeId node, VTime t) {
  if (terminated_) return;
  for (auto& [rank, p] : producers_) {
    if (p.node != node || p.crashed) continue;
    p.crashed = true;
    lost_unacked_ += p.pending.size();
    p.pending.clear();
    emit(t, node, "producer_lost", 1, rank, p.consumer);
  }
  for (auto& [rank, c] : consumers_) {
    if (c.node != node || c.crashed) continue;
    c.crashed = true;
    emit(t, node, "consumer_lost", 1, 0, rank);
    reroute(c);
  }
}

void Stream::reroute(const Consumer& lost) {
  std::vector<RankId> live;
  for (const auto& [rank, c] : consumers_)
    if (!c.crashed) live.push_back(rank);
  if (live.empty()) return;
  std::size_t i = 0;
  for (auto& [rank, p] : producers_)
    if (p.consumer == lost.rank) p.consumer = live[i++ % live.size()];
}

DrainReport Stream::terminate(IoCtx& ctx) {
  if (terminated_) raise(Errc::stream_terminated, "stream " + std::to_string(desc_.id));
  VTime latest = ctx.now;
  for (auto& [rank, p] : producers_) {
    if (p.crashed) continue;
    IoCtx pctx{p.node, ctx.now};
    ship(pctx, p);
    latest = std::max(latest, pctx.now);
  }
  terminated_ = true;

  DrainReport report;
  for (auto& [rank, c] : consumers_) {
    report.per_consumer[rank] = c.count;
    report.total += c.count;
    report.peak_buffered = std::max(report.peak_buffered, c.peak);
    if (c.crashed) {
      report.crashed_consumers.push_back(rank);
      continue;
    }
    if (c.computation) {
      IoCtx cctx{c.node, std::max(c.busy, ctx.now)};
      c.computation->finish(cctx);
      c.busy = cctx.now;
    }
    latest = std::max(latest, c.busy);
  }
  for (const auto& [rank, p] : producers_)
    if (p.crashed) report.crashed_producers.push_back(rank);
  report.lost_unacked = lost_unacked_;
  report.finished = latest;
  ctx.now = latest;
  emit(latest, ctx.node, "drained", static_cast<double>(report.total), 0, 0);
  return report;
}

void Stream::emit(VTime t, NodeId node, const char* metric, double value, RankId producer, RankId consumer) {
  cluster_.addb().emit(t, node, telemetry::Subsystem::stream, metric, value,
                       {{"stream", std::to_string(desc_.id)},
                        {"producer", std::to_string(producer)},
                        {"consumer", std::to_string(consumer)}});
}

}  // namespace sage::stream
