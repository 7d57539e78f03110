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

#include "sage/telemetry/addb.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "sage/common/bytes.hpp"
#include "sage/common/error.hpp"

namespace sage::telemetry {
namespace {

constexpr std::string_view kNames[] = {"object", "index", "txn", "hsm", "ship", "ha", "window", "stream", "net"};

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == '\t' || c == '\n' || c == ';' || c == '=') c = '_';
  return s;
}

bool before(const AddbRecord& a, const AddbRecord& b) noexcept {
  if (a.t != b.t) return a.t < b.t;
  if (a.node != b.node) return a.node < b.node;
  return a.seq < b.seq;
}

double parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) raise(Errc::corrupt_export, "bad number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

std::string_view to_string(Subsystem s) noexcept { return kNames[static_cast<std::size_t>(s)]; }

std::optional<Subsystem> parse_subsystem(std::string_view s) noexcept {
  for (std::size_t i = 0; i < std::size(kNames); ++i)
    if (kNames[i] == s) return static_cast<Subsystem>(i);
  return std::nullopt;
}

const std::string* AddbRecord::tag(std::string_view key) const noexcept {
  for (const auto& [k, v] : tags)
    if (k == key) return &v;
  return nullptr;
}

bool AddbFilter::matches(const AddbRecord& r) const noexcept {
  if (subsystem && *subsystem != r.subsystem) return false;
  if (metric && *metric != r.metric) return false;
  if (metric_prefix && r.metric.compare(0, metric_prefix->size(), *metric_prefix) != 0) return false;
  if (node && *node != r.node) return false;
  return true;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, ptr};
}

const AddbRecord& Addb::emit(VTime t, NodeId node, Subsystem subsystem, std::string metric, double value,
                             Tags tags) {
  AddbRecord rec;
  rec.t = t;
  rec.node = node;
  rec.seq = next_seq_[node]++;
  rec.subsystem = subsystem;
  rec.metric = sanitize(std::move(metric));
  rec.value = value;
  for (auto& [k, v] : tags) rec.tags.emplace_back(sanitize(std::move(k)), sanitize(std::move(v)));
  records_.push_back(std::move(rec));
  const std::size_t index = records_.size() - 1;

  if (!subscriptions_.empty()) {
    std::vector<Callback> targets;
    for (const auto& [id, sub] : subscriptions_)
      if (sub.filter.matches(records_[index])) targets.push_back(sub.callback);
    // Callbacks may emit; work on a copy so the vector can grow.
    const AddbRecord copy = records_[index];
    for (const auto& cb : targets) cb(copy);
  }
  return records_[index];
}

std::vector<AddbRecord> Addb::query(const AddbFilter& filter, VTime t0, VTime t1) const {
  std::vector<AddbRecord> out;
  for (const auto& r : records_)
    if (r.t >= t0 && r.t < t1 && filter.matches(r)) out.push_back(r);
  std::stable_sort(out.begin(), out.end(), before);
  return out;
}

void Addb::fdmi_register(const std::string& plugin_id, AddbFilter filter, Callback callback) {
  if (subscriptions_.count(plugin_id) != 0) raise(Errc::duplicate_plugin, plugin_id);
  subscriptions_.emplace(plugin_id, Subscription{std::move(filter), std::move(callback)});
}

void Addb::fdmi_deregister(const std::string& plugin_id) { subscriptions_.erase(plugin_id); }

std::vector<AddbRecord> Addb::ordered() const {
  std::vector<AddbRecord> out = records_;
  std::stable_sort(out.begin(), out.end(), before);
  return out;
}

void Addb::clear() {
  records_.clear();
  next_seq_.clear();
}

void Addb::export_tsv(std::ostream& os) const {
  for (const auto& r : ordered()) {
    os << format_number(r.t) << '\t' << r.node << '\t' << to_string(r.subsystem) << '\t' << r.metric << '\t'
       << format_number(r.value) << '\t';
    for (std::size_t i = 0; i < r.tags.size(); ++i) os << (i ? ";" : "") << r.tags[i].first << '=' << r.tags[i].second;
    os << '\n';
  }
}

std::string Addb::export_tsv() const {
  std::ostringstream os;
  export_tsv(os);
  return os.str();
}

std::uint64_t Addb::trace_hash() const { return fnv1a64(export_tsv()); }

std::vector<AddbRecord> parse_tsv(std::istream& is) {
  std::vector<AddbRecord> out;
  std::map<NodeId, std::uint64_t> seqs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 6) raise(Errc::corrupt_export, "line " + std::to_string(lineno) + ": expected 6 fields");
    AddbRecord r;
    r.t = parse_double(fields[0]);
    unsigned long node = 0;
    auto [p, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), node);
    if (ec != std::errc() || p != fields[1].data() + fields[1].size())
      raise(Errc::corrupt_export, "line " + std::to_string(lineno) + ": bad node");
    r.node = static_cast<NodeId>(node);
    r.seq = seqs[r.node]++;
    auto sub = parse_subsystem(fields[2]);
    if (!sub) raise(Errc::corrupt_export, "line " + std::to_string(lineno) + ": bad subsystem");
    r.subsystem = *sub;
    r.metric = std::string(fields[3]);
    r.value = parse_double(fields[4]);
    if (!fields[5].empty()) {
      for (auto kv : split(fields[5], ';')) {
        auto eq = kv.find('=');
        if (eq == std::string_view::npos) raise(Errc::corrupt_export, "line " + std::to_string(lineno) + ": bad tag");
        r.tags.emplace_back(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace sage::telemetry
