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
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sage/common/types.hpp"

namespace sage::telemetry {

enum class Subsystem : std::uint8_t { object, index, txn, hsm, ship, ha, window, stream, net };

std::string_view to_string(Subsystem s) noexcept;
std::optional<Subsystem> parse_subsystem(std::string_view s) noexcept;

using Tags = std::vector<std::pair<std::string, std::string>>;

struct AddbRecord {
  VTime t = 0;
  NodeId node = 0;
  std::uint64_t seq = 0;  // per node, strictly increasing in emission order
  Subsystem subsystem = Subsystem::object;
  std::string metric;
  double value = 0;
  Tags tags;

  const std::string* tag(std::string_view key) const noexcept;
};

struct AddbFilter {
  std::optional<Subsystem> subsystem;
  std::optional<std::string> metric;
  std::optional<std::string> metric_prefix;
  std::optional<NodeId> node;

  bool matches(const AddbRecord& r) const noexcept;
};

constexpr VTime kMinTime = -std::numeric_limits<double>::infinity();
constexpr VTime kMaxTime = std::numeric_limits<double>::infinity();

// Append-only telemetry store with FDMI-style subscriptions. Subscribers
// see records synchronously at emission, through a const reference.
class Addb {
 public:
  using Callback = std::function<void(const AddbRecord&)>;

  const AddbRecord& emit(VTime t, NodeId node, Subsystem subsystem, std::string metric, double value,
                         Tags tags = {});

  // Records matching `filter` with t in [t0, t1), ordered by (t, node, seq).
  std::vector<AddbRecord> query(const AddbFilter& filter, VTime t0 = kMinTime, VTime t1 = kMaxTime) const;

  // Throws Error(duplicate_plugin) when the id is taken.
  void fdmi_register(const std::string& plugin_id, AddbFilter filter, Callback callback);
  void fdmi_deregister(const std::string& plugin_id);

  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<AddbRecord>& log() const noexcept { return records_; }
  std::vector<AddbRecord> ordered() const;
  void clear();

  // One record per line: t, node, subsystem, metric, value, tags
  // (tags as k=v pairs joined by ';'), tab separated.
  void export_tsv(std::ostream& os) const;
  std::string export_tsv() const;
  std::uint64_t trace_hash() const;

 private:
  struct Subscription {
    AddbFilter filter;
    Callback callback;
  };

  std::vector<AddbRecord> records_;
  std::map<NodeId, std::uint64_t> next_seq_;
  std::map<std::string, Subscription> subscriptions_;
};

// Throws Error(corrupt_export) on malformed lines.
std::vector<AddbRecord> parse_tsv(std::istream& is);
std::string format_number(double v);

}  // namespace sage::telemetry
