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

#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "sage/bench/report.hpp"
#include "sage/bench/workloads.hpp"
#include "sage/common/error.hpp"
#include "support.hpp"

using namespace sage;
using namespace sage::bench;
using sage::testing::TempDir;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::invalid_argument;
}

double metric(const RunReport& r, const std::string& name, const telemetry::Tags& params) {
  for (const auto& m : r.metrics)
    if (m.name == name && m.params == params) return m.value;
  FAIL("metric " << name << " missing");
  return 0;
}

WorkloadConfig small(const std::string& workload) {
  WorkloadConfig c;
  c.workload = workload;
  c.seed = 9;
  c.cluster.seed = 9;
  c.stream.n = 3000;
  c.stream.chunk = 700;
  c.dht.local_volume = 64;
  c.dht.ops = 400;
  c.checkpoint.particles = 1200;
  c.checkpoint.processes = {2, 3};
  c.offload.sim_ranks = {15, 32};
  c.offload.steps = 3;
  c.offload.particles_per_rank = 256;
  c.offload.threshold = 3.0;
  return c;
}

}  // namespace

TEST_CASE("dht capacity arithmetic") {
  const auto c = dht_capacity(8, 1000, 4);
  CHECK(c.per_process == 5000);
  CHECK(c.global == 40000);
  CHECK(c.global_without_overflow == 8000);
  CHECK(code_of([] { dht_capacity(1ull << 40, 1ull << 30, 4); }) == Errc::capacity_exceeded);
}

TEST_CASE("workload config validation and round trip") {
  auto c = small("dht");
  c.offload.threshold = std::numeric_limits<double>::infinity();
  const auto back = WorkloadConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(std::isinf(back.offload.threshold));

  auto bad = small("nope");
  CHECK(code_of([&] { bad.validate(); }) == Errc::bad_config);
  bad = small("checkpoint");
  bad.checkpoint.particles = 1001;
  CHECK(code_of([&] { bad.validate(); }) == Errc::bad_config);
  bad = small("stream");
  bad.stream.n = 0;
  CHECK(code_of([&] { bad.validate(); }) == Errc::bad_config);
  bad = small("offload");
  bad.offload.consumers = 20;
  CHECK(code_of([&] { bad.validate(); }) == Errc::bad_config);
  CHECK(code_of([] { WorkloadConfig::from_json(nlohmann::json{{"dht", {{"processes", "x"}}}}); }) == Errc::bad_config);
}

TEST_CASE("stream workload verifies and orders backings") {
  TempDir dir;
  const auto res = run_stream(small("stream"), dir.path());
  CHECK(res.verified);
  const auto rep = make_report(res.addb);
  CHECK(rep.verified);
  for (const char* k : {"copy", "scale", "add", "triad"}) {
    CAPTURE(k);
    const double mem = metric(rep, "bandwidth", {{"backing", "memory"}, {"kernel", k}});
    const double sto = metric(rep, "bandwidth", {{"backing", "storage"}, {"kernel", k}});
    CHECK(sto <= mem);
    const double bytes = metric(rep, "bytes", {{"backing", "memory"}, {"kernel", k}});
    CHECK(bytes == (std::string(k) == "copy" || std::string(k) == "scale" ? 16.0 : 24.0) * 3000);
  }
}

TEST_CASE("dht workload finds every key on both backings") {
  TempDir dir;
  const auto res = run_dht(small("dht"), dir.path());
  CHECK(res.verified);
  const auto rep = make_report(res.addb);
  CHECK(metric(rep, "capacity_global", {}) == 8 * 64 * 5);
  CHECK(metric(rep, "found", {{"backing", "storage"}, {"processes", "8"}}) ==
        metric(rep, "keys", {{"backing", "storage"}, {"processes", "8"}}));

  auto tight = small("dht");
  tight.dht.overflow = 0;
  tight.dht.local_volume = 16;
  TempDir d2;
  CHECK(code_of([&] { run_dht(tight, d2.path()); }) == Errc::capacity_exceeded);
}

TEST_CASE("checkpoint restarts bit-exact, and not without sync") {
  TempDir dir;
  auto c = small("checkpoint");
  const auto res = run_checkpoint(c, dir.path());
  CHECK(res.verified);
  const auto rep = make_report(res.addb);
  CHECK(metric(rep, "ratio", {{"processes", "3"}}) > 0);

  c.checkpoint.crash_before_sync = true;
  c.checkpoint.processes = {2};
  TempDir d2;
  const auto lost = run_checkpoint(c, d2.path());
  CHECK_FALSE(lost.verified);
  const auto rep2 = make_report(lost.addb);
  CHECK(metric(rep2, "mismatched_particles", {{"mode", "windows"}, {"processes", "2"}}) == 1200);
  CHECK(metric(rep2, "mismatched_particles", {{"mode", "baseline"}, {"processes", "2"}}) == 0);
  CHECK_FALSE(rep2.verified);
}

TEST_CASE("offload conserves streamed particles") {
  TempDir dir;
  const auto res = run_offload(small("offload"), dir.path());
  CHECK(res.verified);
  const auto rep = make_report(res.addb);
  CHECK(metric(rep, "elements", {{"mode", "offload"}, {"sim_ranks", "15"}, {"consumers", "1"}}) > 0);
  CHECK(metric(rep, "improvement", {{"sim_ranks", "32"}, {"consumers", "2"}}) > 0);

  auto none = small("offload");
  none.offload.threshold = std::numeric_limits<double>::infinity();
  none.offload.sim_ranks = {15};
  TempDir d2;
  const auto empty = run_offload(none, d2.path());
  CHECK(empty.verified);
  CHECK(metric(make_report(empty.addb), "elements", {{"mode", "offload"}, {"sim_ranks", "15"}, {"consumers", "1"}}) ==
        0);
}

TEST_CASE("report of an empty run is zeroed") {
  telemetry::Addb empty;
  const auto rep = make_report(empty);
  CHECK(rep.records == 0);
  CHECK(rep.metrics.empty());
  CHECK(rep.bytes_written_by_tier.empty());
  CHECK_FALSE(rep.verified);
  CHECK(rep.table().find("records            0") != std::string::npos);
}

TEST_CASE("report from the export equals the in-memory report and a hand tally") {
  TempDir dir;
  const auto res = run_dht(small("dht"), dir.path());
  const auto path = dir / "addb.tsv";
  {
    std::ofstream out(path);
    res.addb.export_tsv(out);
  }
  const auto from_file = load_report(path);
  CHECK(from_file == make_report(res.addb));

  // Independent tally straight from the text lines.
  std::ifstream in(path);
  std::string line;
  std::map<std::string, double> written;
  std::uint64_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) f.push_back(cell);
    if (f.size() >= 6 && f[2] == "object" && f[3] == "dev_write_bytes") {
      const auto pos = f[5].find("tier=");
      written[f[5].substr(pos + 5, 1)] += std::stod(f[4]);
    }
  }
  CHECK(from_file.records == lines);
  for (const auto& [tier, bytes] : written)
    CHECK(static_cast<double>(from_file.bytes_written_by_tier.at(static_cast<TierId>(std::stoi(tier)))) == bytes);
  CHECK_FALSE(written.empty());

  std::ofstream(dir / "bad.tsv") << "1\t0\tobject\n";
  CHECK(code_of([&] { load_report(dir / "bad.tsv"); }) == Errc::corrupt_export);
  CHECK(code_of([&] { load_report(dir / "missing.tsv"); }) == Errc::corrupt_export);
}

TEST_CASE("bytes per tier match device counters") {
  TempDir dir;
  auto cluster = sim::Cluster::spawn(sim::ClusterConfig::uniform(2, 1), 4, dir.path());
  auto& store = cluster->store();
  IoCtx ctx{2, 0};
  const auto a = store.create_object(ctx, 4096, Layout::striped(2, 1, {0, 1, 4})).id;
  const auto b = store.create_object(ctx, 4096, Layout::mirrored(2, {2, 6})).id;
  const Bytes data(4096 * 8, 0x5a);
  store.write(ctx, a, 0, data);
  store.write(ctx, b, 3, data);
  store.read(ctx, a, 2, 4);
  store.read(ctx, b, 3, 8);

  const auto rep = make_report(cluster->addb());
  std::map<TierId, std::uint64_t> rd, wr;
  for (auto id : cluster->pool().ids()) {
    const auto& d = cluster->pool().get(id);
    if (d.counters().bytes_read) rd[d.tier()] += d.counters().bytes_read;
    if (d.counters().bytes_written) wr[d.tier()] += d.counters().bytes_written;
  }
  CHECK(rep.bytes_read_by_tier == rd);
  CHECK(rep.bytes_written_by_tier == wr);
}

TEST_CASE("workloads are deterministic per seed") {
  for (const char* w : {"stream", "dht", "checkpoint", "offload"}) {
    CAPTURE(w);
    TempDir d1, d2;
    const auto c = small(w);
    CHECK(run_workload(c, d1.path()).addb.trace_hash() == run_workload(c, d2.path()).addb.trace_hash());
  }
}
