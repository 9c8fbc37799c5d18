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

#include "locsim/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "locsim/error.hpp"

namespace locsim {

EngineConfig engine_config(const ExperimentCell& cell) {
  EngineConfig c;
  c.mode = cell.mode;
  c.sd = cell.sd;
  c.memory.latency = cell.mem_latency;
  c.keep_records = false;
  return c;
}

MetricsRow run_cell(const ExperimentCell& cell) {
  const GeneratedWorkload g = generate(cell.workload);
  const RunResult r = run(engine_config(cell), g.trace, false);
  ExperimentCell base = cell;
  base.mode = ProtocolMode::kBaseline;
  const RunResult b = run(engine_config(base), g.trace, false);

  MetricsRow row;
  row.protocol = r.metrics.protocol;
  row.sd = cell.sd;
  row.workload = r.metrics.workload;
  row.tx_size = cell.workload.tx_size;
  row.mem_latency = cell.mem_latency;
  row.seed = cell.workload.seed;
  row.txs = r.metrics.txs;
  row.committed = r.metrics.committed;
  row.cycles = r.metrics.cycles;
  row.baseline_cycles = b.metrics.cycles;
  row.normalized_throughput =
      row.cycles == 0 ? 0.0 : static_cast<double>(row.baseline_cycles) / static_cast<double>(row.cycles);
  row.program_bytes = r.metrics.program_bytes;
  row.memory_bytes = r.metrics.memory_bytes;
  row.traffic_ratio = r.metrics.traffic_ratio();
  row.pset = r.metrics.pset;
  row.persists = r.metrics.persists;
  row.stalls = r.metrics.stalls;
  row.commit_records = r.metrics.commit_records;
  row.skipped_blocks = r.metrics.engine.skipped_blocks;
  row.dependency_pairs = r.metrics.engine.dependency_pairs;
  row.truncations = r.metrics.engine.truncations;
  return row;
}

std::vector<MetricsRow> experiment_matrix(const std::vector<ExperimentCell>& cells, unsigned threads) {
  std::vector<MetricsRow> rows(cells.size());
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, cells.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cells.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        rows[i] = run_cell(cells[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

void write_csv_header(std::ostream& out) {
  out << "protocol,sd,workload,tx_size,mem_latency_ns,seed,txs,committed,cycles,baseline_cycles,"
         "normalized_throughput,program_bytes,memory_bytes,traffic_ratio,pset,"
         "data_persists,meta_persists,dep_persists,commit_persists,checkpoint_persists,"
         "stall_intra_tx,stall_inter_tx,stall_window,stall_flush,stall_log_full,"
         "commit_records,skipped_blocks,dependency_pairs,truncations\n";
}

void write_csv_row(std::ostream& out, const MetricsRow& r) {
  out << r.protocol << ',' << r.sd << ',' << r.workload << ',' << r.tx_size << ',' << r.mem_latency
      << ',' << r.seed << ',' << r.txs << ',' << r.committed << ',' << r.cycles << ','
      << r.baseline_cycles << ',' << r.normalized_throughput << ',' << r.program_bytes << ','
      << r.memory_bytes << ',' << r.traffic_ratio << ',' << r.pset << ',' << r.persists.data << ','
      << r.persists.meta << ',' << r.persists.dep << ',' << r.persists.commit << ','
      << r.persists.checkpoint << ',' << r.stalls.intra_tx << ',' << r.stalls.inter_tx << ','
      << r.stalls.window << ',' << r.stalls.flush << ',' << r.stalls.log_full << ','
      << r.commit_records << ',' << r.skipped_blocks << ',' << r.dependency_pairs << ','
      << r.truncations << '\n';
}

void write_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  write_csv_header(out);
  for (const MetricsRow& r : rows) write_csv_row(out, r);
}

namespace {

constexpr ProtocolMode kProtocols[] = {ProtocolMode::kSWAL, ProtocolMode::kHWAL, ProtocolMode::kECWAL,
                                       ProtocolMode::kLOCWAL};

}  // namespace

std::vector<ExperimentCell> protocol_cells(const WorkloadSpec& base) {
  std::vector<ExperimentCell> cells;
  for (WorkloadKind k : {WorkloadKind::kBTree, WorkloadKind::kHash, WorkloadKind::kRBTree, WorkloadKind::kSPS}) {
    for (ProtocolMode m : kProtocols) {
      ExperimentCell c;
      c.mode = m;
      c.workload = base;
      c.workload.kind = k;
      cells.push_back(c);
    }
  }
  return cells;
}

std::vector<ExperimentCell> sd_cells(const WorkloadSpec& base) {
  std::vector<ExperimentCell> cells;
  for (std::uint32_t sd : {1U, 2U, 4U, 8U, 16U, 32U}) {
    ExperimentCell c;
    c.sd = sd;
    c.workload = base;
    c.workload.kind = WorkloadKind::kBTree;
    cells.push_back(c);
  }
  return cells;
}

std::vector<ExperimentCell> tx_size_cells(const WorkloadSpec& base) {
  std::vector<ExperimentCell> cells;
  for (std::uint32_t ts : {2U, 4U, 8U, 16U, 32U}) {
    for (ProtocolMode m : {ProtocolMode::kHWAL, ProtocolMode::kLOCWAL}) {
      ExperimentCell c;
      c.mode = m;
      c.workload = base;
      c.workload.kind = WorkloadKind::kBTree;
      c.workload.tx_size = ts;
      cells.push_back(c);
    }
  }
  return cells;
}

std::vector<ExperimentCell> latency_cells(const WorkloadSpec& base) {
  std::vector<ExperimentCell> cells;
  for (std::uint32_t lat : {35U, 95U, 168U, 1000U}) {
    for (ProtocolMode m : {ProtocolMode::kHWAL, ProtocolMode::kLOCWAL}) {
      ExperimentCell c;
      c.mode = m;
      c.mem_latency = lat;
      c.workload = base;
      c.workload.kind = WorkloadKind::kBTree;
      cells.push_back(c);
    }
  }
  return cells;
}

void write_figure_csvs(const std::string& dir, const WorkloadSpec& base, unsigned threads) {
  std::filesystem::create_directories(dir);
  auto emit = [&](const std::string& name, const std::vector<MetricsRow>& rows) {
    std::ofstream out(dir + "/" + name);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + dir + "/" + name);
    write_csv(out, rows);
  };
  const auto proto = experiment_matrix(protocol_cells(base), threads);
  emit("fig8_throughput.csv", proto);
  emit("fig9_traffic.csv", proto);
  emit("fig10_speculation_degree.csv", experiment_matrix(sd_cells(base), threads));
  emit("fig11_tx_size.csv", experiment_matrix(tx_size_cells(base), threads));
  emit("fig12_latency.csv", experiment_matrix(latency_cells(base), threads));
}

}  // namespace locsim
