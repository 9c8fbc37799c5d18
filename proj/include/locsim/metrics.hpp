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

// Experiment cells, normalized metrics rows and their CSV form.

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "locsim/sim_harness.hpp"

namespace locsim {

struct ExperimentCell {
  ProtocolMode mode = ProtocolMode::kLOCWAL;
  std::uint32_t sd = 16;
  WorkloadSpec workload;
  std::uint32_t mem_latency = 168;
};

struct MetricsRow {
  std::string protocol;
  std::uint32_t sd = 0;
  std::string workload;
  std::uint32_t tx_size = 0;
  std::uint32_t mem_latency = 0;
  std::uint64_t seed = 0;
  std::uint64_t txs = 0;
  std::uint64_t committed = 0;
  std::uint64_t cycles = 0;
  std::uint64_t baseline_cycles = 0;
  double normalized_throughput = 0;
  std::uint64_t program_bytes = 0;
  std::uint64_t memory_bytes = 0;
  double traffic_ratio = 0;
  double pset = 0;
  PersistCounts persists;
  StallCycles stalls;
  std::uint64_t commit_records = 0;
  std::uint64_t skipped_blocks = 0;
  std::uint64_t dependency_pairs = 0;
  std::uint64_t truncations = 0;
};

EngineConfig engine_config(const ExperimentCell& cell);

/// Runs the cell and its same-seed baseline.
MetricsRow run_cell(const ExperimentCell& cell);

/// One row per cell, in input order. Cells run on up to `threads` threads.
std::vector<MetricsRow> experiment_matrix(const std::vector<ExperimentCell>& cells,
                                          unsigned threads = 0);

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const MetricsRow& row);
void write_csv(std::ostream& out, const std::vector<MetricsRow>& rows);

/// Sweeps behind each figure CSV, built around `base`.
std::vector<ExperimentCell> protocol_cells(const WorkloadSpec& base);               // fig8, fig9
std::vector<ExperimentCell> sd_cells(const WorkloadSpec& base);                     // fig10
std::vector<ExperimentCell> tx_size_cells(const WorkloadSpec& base);                // fig11
std::vector<ExperimentCell> latency_cells(const WorkloadSpec& base);                // fig12

/// Writes fig8_throughput.csv .. fig12_latency.csv into `dir`.
void write_figure_csvs(const std::string& dir, const WorkloadSpec& base, unsigned threads = 0);

}  // namespace locsim
