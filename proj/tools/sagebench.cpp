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

// Command-line driver: write a config, run a workload, report on telemetry.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "sage/bench/report.hpp"
#include "sage/bench/workloads.hpp"
#include "sage/common/error.hpp"

namespace fs = std::filesystem;
using sage::bench::WorkloadConfig;

namespace {

WorkloadConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) sage::raise(sage::Errc::bad_config, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    sage::raise(sage::Errc::bad_config, path + ": " + e.what());
  }
  return WorkloadConfig::from_json(j);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiered object storage simulator and workload runner"};
  app.require_subcommand(1);

  std::string config_path, workload, out;
  std::optional<std::uint64_t> seed;

  auto* init = app.add_subcommand("init", "write a default configuration file");
  init->add_option("--out", out, "configuration file to write")->required();
  init->add_option("--workload", workload, "workload to preselect");
  init->add_option("--seed", seed, "seed to preselect");

  auto* run = app.add_subcommand("run", "run a workload and write addb.tsv and results.json");
  run->add_option("--config", config_path, "configuration file (defaults when absent)");
  run->add_option("--workload", workload, "stream, dht, checkpoint or offload");
  run->add_option("--seed", seed, "global seed");
  run->add_option("--out", out, "output directory")->required();

  std::string tsv;
  auto* report = app.add_subcommand("report", "summarize an addb.tsv export");
  report->add_option("export", tsv, "addb.tsv file")->required();
  report->add_option("--out", out, "also write the report as JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*init) {
      WorkloadConfig c;
      if (!workload.empty()) c.workload = workload;
      if (seed) c.seed = *seed;
      c.cluster.seed = c.seed;
      c.validate();
      write_file(out, c.to_json().dump(2) + "\n");
      std::cout << "wrote " << out << '\n';
      return 0;
    }
    if (*run) {
      WorkloadConfig c = load_config(config_path);
      if (!workload.empty()) c.workload = workload;
      if (seed) c.seed = *seed;
      c.cluster.seed = c.seed;
      c.validate();
      const fs::path dir(out);
      const fs::path work = dir / "clusters";
      fs::create_directories(dir);
      fs::remove_all(work);  // every run starts from empty devices
      const auto result = sage::bench::run_workload(c, work);
      fs::remove_all(work);
      write_file(dir / "addb.tsv", result.addb.export_tsv());
      const auto rep = sage::bench::make_report(result.addb);
      nlohmann::json j = rep.to_json();
      j["workload"] = c.workload;
      j["config"] = c.to_json();
      j["trace_hash"] = result.addb.trace_hash();
      write_file(dir / "results.json", j.dump(2) + "\n");
      std::cout << rep.table();
      return result.verified && rep.verified ? 0 : 1;
    }
    const auto rep = sage::bench::load_report(tsv);
    std::cout << rep.table();
    if (!out.empty()) write_file(out, rep.to_json().dump(2) + "\n");
    return 0;
  } catch (const sage::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
