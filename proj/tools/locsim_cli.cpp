// Copyright 2026 The locsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: single runs, crash sweeps and figure CSVs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "locsim/error.hpp"
#include "locsim/metrics.hpp"
#include "locsim/sim_harness.hpp"

namespace {

// Relative output paths resolve against LOCSIM_OUTPUT_DIR when it is set.
std::string resolve(const std::string& path) {
  const char* dir = std::getenv("LOCSIM_OUTPUT_DIR");
  if (path.empty() || dir == nullptr || *dir == '\0' || std::filesystem::path(path).is_absolute()) {
    return path;
  }
  return (std::filesystem::path(dir) / path).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loose-ordering persistence simulator"};
  std::string protocol = "locwal";
  std::string workload = "btree";
  locsim::WorkloadSpec spec;
  std::uint32_t sd = 16;
  std::uint32_t latency = 168;
  bool sweep = false;
  std::size_t sample = 0;
  std::string output;
  std::string figures;
  std::string event_log;
  unsigned threads = 0;

  app.add_option("--protocol", protocol, "swal, hwal, ecwal, locwal, baseline or all")->capture_default_str();
  app.add_option("--sd", sd, "speculation degree (locwal)")->capture_default_str();
  app.add_option("--workload", workload, "btree, hash, rbtree or sps")->capture_default_str();
  app.add_option("--tx-size", spec.tx_size, "structure operations per transaction")->capture_default_str();
  app.add_option("--ops", spec.ops, "operations in the measured trace")->capture_default_str();
  app.add_option("--prefill", spec.prefill, "operations applied before the trace")->capture_default_str();
  app.add_option("--mem-latency-ns", latency, "persistent write latency (1 cycle = 1 ns)")->capture_default_str();
  app.add_option("--seed", spec.seed, "workload seed")->capture_default_str();
  app.add_flag("--crash-sweep", sweep, "inject crashes at persist boundaries and check recovery");
  app.add_option("--sample", sample, "crash sweep: stratified with this many random points (0 = exhaustive)");
  app.add_option("--output,-o", output, "CSV output file (default stdout)");
  app.add_option("--figures", figures, "write per-figure CSVs into this directory");
  app.add_option("--event-log", event_log, "NDJSON event log of a single run");
  app.add_option("--threads", threads, "worker threads for figure sweeps (0 = all cores)");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto kind = locsim::parse_workload(workload);
    if (!kind) throw locsim::Error(locsim::ErrorCode::kInvalidConfig, "unknown workload " + workload);
    spec.kind = *kind;
    spec.validate();

    if (!figures.empty()) {
      locsim::write_figure_csvs(resolve(figures), spec, threads);
      std::cerr << "figure CSVs written to " << resolve(figures) << '\n';
      return 0;
    }

    std::vector<locsim::ProtocolMode> modes;
    if (protocol == "all") {
      modes = {locsim::ProtocolMode::kSWAL, locsim::ProtocolMode::kHWAL, locsim::ProtocolMode::kECWAL,
               locsim::ProtocolMode::kLOCWAL};
    } else {
      const auto m = locsim::parse_protocol(protocol);
      if (!m) throw locsim::Error(locsim::ErrorCode::kInvalidConfig, "unknown protocol " + protocol);
      modes = {*m};
    }

    std::ofstream file;
    if (!output.empty()) {
      file.open(resolve(output));
      if (!file) throw locsim::Error(locsim::ErrorCode::kIo, "cannot open " + resolve(output));
    }
    std::ostream& out = output.empty() ? std::cout : file;

    if (sweep) {
      const locsim::GeneratedWorkload g = locsim::generate(spec);
      std::vector<locsim::SweepSummary> all;
      bool ok = true;
      for (locsim::ProtocolMode m : modes) {
        locsim::EngineConfig cfg =
            locsim::engine_config(locsim::ExperimentCell{m, sd, spec, latency});
        locsim::SweepOptions opt;
        opt.keep_all = true;
        opt.artifact_dir = resolve("crash_artifacts");
        if (sample > 0) {
          cfg.keep_records = true;
          opt.points = locsim::stratified_points(locsim::run(cfg, g.trace, true), sample, spec.seed);
        }
        locsim::SweepSummary s = locsim::crash_sweep(cfg, g.trace, opt);
        std::cerr << s.protocol << " sd=" << s.sd << ": " << s.points << " crash points, "
                  << s.failures << " failures\n";
        ok = ok && s.failures == 0;
        all.push_back(std::move(s));
      }
      locsim::write_sweep_csv(out, all);
      return ok ? 0 : 1;
    }

    locsim::write_csv_header(out);
    for (locsim::ProtocolMode m : modes) {
      locsim::ExperimentCell cell{m, sd, spec, latency};
      if (!event_log.empty()) {
        std::ofstream ev(resolve(event_log));
        const locsim::GeneratedWorkload g = locsim::generate(spec);
        locsim::run(locsim::engine_config(cell), g.trace, false, &ev);
      }
      locsim::write_csv_row(out, locsim::run_cell(cell));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
