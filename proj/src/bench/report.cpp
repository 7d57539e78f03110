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

#include "sage/bench/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sage/bench/workloads.hpp"
#include "sage/common/error.hpp"

namespace sage::bench {
namespace {

std::uint64_t as_count(double v) { return v > 0 ? static_cast<std::uint64_t>(v) : 0; }

}  // namespace

RunReport make_report(std::span<const telemetry::AddbRecord> records) {
  RunReport rep;
  bool any_check = false, all_ok = true;
  const std::string prefix = kMetricPrefix;
  for (const auto& r : records) {
    ++rep.records;
    ++rep.records_by_subsystem[std::string(telemetry::to_string(r.subsystem))];
    if (r.subsystem == telemetry::Subsystem::object && (r.metric == "dev_read_bytes" || r.metric == "dev_write_bytes")) {
      const auto* tier = r.tag("tier");
      if (tier == nullptr) continue;
      const auto t = static_cast<TierId>(std::stoul(*tier));
      (r.metric == "dev_read_bytes" ? rep.bytes_read_by_tier : rep.bytes_written_by_tier)[t] += as_count(r.value);
    } else if (r.subsystem == telemetry::Subsystem::net) {
      if (r.metric == "messages") rep.net_messages += as_count(r.value);
      else if (r.metric == "bytes_sent") rep.net_bytes_sent += as_count(r.value);
      else if (r.metric == "bytes_received") rep.net_bytes_received += as_count(r.value);
      else if (r.metric == "bytes_dropped") rep.net_bytes_dropped += as_count(r.value);
    } else if (r.metric.rfind(prefix, 0) == 0) {
      MetricRow row;
      row.name = r.metric.substr(prefix.size());
      row.value = r.value;
      for (const auto& [k, v] : r.tags) {
        if (k == "workload") row.workload = v;
        else row.params.emplace_back(k, v);
      }
      if (row.name == "verified") {
        any_check = true;
        all_ok = all_ok && r.value == 1;
      }
      rep.metrics.push_back(std::move(row));
    }
  }
  rep.verified = any_check && all_ok;
  return rep;
}

RunReport make_report(const telemetry::Addb& addb) {
  const auto ordered = addb.ordered();
  return make_report(ordered);
}

RunReport load_report(const std::filesystem::path& tsv) {
  std::ifstream in(tsv);
  if (!in) raise(Errc::corrupt_export, "cannot open " + tsv.string());
  const auto records = telemetry::parse_tsv(in);
  return make_report(records);
}

nlohmann::json RunReport::to_json() const {
  using nlohmann::json;
  json j;
  j["records"] = records;
  j["records_by_subsystem"] = records_by_subsystem;
  json rd = json::object(), wr = json::object();
  for (const auto& [t, b] : bytes_read_by_tier) rd[std::to_string(t)] = b;
  for (const auto& [t, b] : bytes_written_by_tier) wr[std::to_string(t)] = b;
  j["bytes_read_by_tier"] = rd;
  j["bytes_written_by_tier"] = wr;
  j["net"] = {{"messages", net_messages},
              {"bytes_sent", net_bytes_sent},
              {"bytes_received", net_bytes_received},
              {"bytes_dropped", net_bytes_dropped}};
  json rows = json::array();
  for (const auto& m : metrics) {
    json params = json::object();
    for (const auto& [k, v] : m.params) params[k] = v;
    rows.push_back({{"workload", m.workload}, {"metric", m.name}, {"params", params}, {"value", m.value}});
  }
  j["metrics"] = rows;
  j["verified"] = verified;
  return j;
}

std::string RunReport::table() const {
  std::ostringstream os;
  char line[256];
  os << "records            " << records << '\n';
  for (const auto& [s, n] : records_by_subsystem) {
    std::snprintf(line, sizeof line, "  %-16s %llu\n", s.c_str(), static_cast<unsigned long long>(n));
    os << line;
  }
  os << "tier  bytes_read  bytes_written\n";
  for (TierId t = kMinTier; t <= kMaxTier; ++t) {
    auto get = [t](const std::map<TierId, std::uint64_t>& m) {
      auto it = m.find(t);
      return static_cast<unsigned long long>(it == m.end() ? 0 : it->second);
    };
    std::snprintf(line, sizeof line, "%4u  %10llu  %13llu\n", static_cast<unsigned>(t), get(bytes_read_by_tier),
                  get(bytes_written_by_tier));
    os << line;
  }
  std::snprintf(line, sizeof line, "net   messages %llu  sent %llu  received %llu  dropped %llu\n",
                static_cast<unsigned long long>(net_messages), static_cast<unsigned long long>(net_bytes_sent),
                static_cast<unsigned long long>(net_bytes_received), static_cast<unsigned long long>(net_bytes_dropped));
  os << line;
  if (!metrics.empty()) os << "workload    metric                     value         params\n";
  for (const auto& m : metrics) {
    std::string params;
    for (const auto& [k, v] : m.params) params += (params.empty() ? "" : " ") + k + "=" + v;
    std::snprintf(line, sizeof line, "%-11s %-26s %-13.6g %s\n", m.workload.c_str(), m.name.c_str(), m.value,
                  params.c_str());
    os << line;
  }
  os << "verified           " << (verified ? "yes" : "no") << '\n';
  return os.str();
}

}  // namespace sage::bench
