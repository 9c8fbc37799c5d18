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

// Experiment runner: drives a trace through the engine, injects crashes at
// persist-completion boundaries, recovers, and checks against an oracle.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "locsim/recovery.hpp"
#include "locsim/tx_engine.hpp"
#include "locsim/workloads.hpp"

namespace locsim {

struct RunMetrics {
  std::string protocol;
  std::uint32_t sd = 0;
  std::string workload;
  std::uint64_t txs = 0;
  std::uint64_t committed = 0;
  std::uint64_t aborted = 0;
  std::uint64_t cycles = 0;  // until the last transaction is durable
  std::uint64_t program_bytes = 0;
  std::uint64_t memory_bytes = 0;
  PersistCounts persists;
  StallCycles stalls;
  std::uint64_t commit_records = 0;
  double pset = 0;
  EngineStats engine;

  double throughput() const {  // committed transactions per cycle
    return cycles == 0 ? 0.0 : static_cast<double>(committed) / static_cast<double>(cycles);
  }
  double traffic_ratio() const {
    return program_bytes == 0 ? 0.0
                              : static_cast<double>(memory_bytes) / static_cast<double>(program_bytes);
  }
};

struct RunResult {
  RunMetrics metrics;
  PersistentImage start_image;  // includes the empty log head
  PersistentImage final_image;
  std::vector<TxSummary> history;
  std::vector<PersistRecord> records;
  std::vector<PersistId> completion_order;
  std::vector<Truncation> truncations;
};

/// Executes `trace` from its initial image. With `quiesce`, all committed
/// data is checkpointed and the log emptied after the run is timed.
RunResult run(const EngineConfig& config, const Trace& trace, bool quiesce = true,
              std::ostream* event_log = nullptr);

/// Initial persistent image of a trace under `config`.
PersistentImage initial_image(const EngineConfig& config, const Trace& trace);

/// Per-transaction final write set (last value per block) in issue order.
std::vector<std::map<BlockAddr, Block>> write_sets(const Trace& trace);

/// Home contents after applying `committed` write sets, in order, to
/// `initial`. Zero blocks are dropped.
std::map<BlockAddr, Block> oracle_replay(const std::map<BlockAddr, Block>& initial,
                                         const std::vector<const std::map<BlockAddr, Block>*>& committed);

struct CrashPointResult {
  std::uint64_t k = 0;
  PersistKind last_kind = PersistKind::kData;  // kind of persist k (k > 0)
  std::size_t recovered = 0;
  std::size_t acked = 0;
  bool pass = true;
  std::string failure;
};

struct SweepOptions {
  /// Crash points to test; empty means every k in [0, total].
  std::optional<std::vector<std::uint64_t>> points;
  std::string artifact_dir;  // failure images and persist prefixes go here
  bool keep_all = false;     // keep passing points in `results`
};

struct SweepSummary {
  std::string protocol;
  std::uint32_t sd = 0;
  std::uint64_t total_persists = 0;
  std::uint64_t points = 0;
  std::uint64_t failures = 0;
  std::vector<CrashPointResult> results;  // failures, or all with keep_all
};

SweepSummary crash_sweep(const EngineConfig& config, const Trace& trace,
                         const SweepOptions& options = {});

/// Stratified sample: every group, metadata, dependency-record and commit
/// boundary plus `random_fill` uniform points.
std::vector<std::uint64_t> stratified_points(const RunResult& run, std::size_t random_fill,
                                             std::uint64_t seed);

void write_sweep_csv(std::ostream& out, const std::vector<SweepSummary>& sweeps);

}  // namespace locsim
