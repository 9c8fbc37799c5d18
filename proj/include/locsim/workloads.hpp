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

// Transaction traces and the synthetic data-structure workloads that
// produce them. Structures live directly in the simulated address space;
// see README.md for the layouts.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "locsim/log_layout.hpp"

namespace locsim {

enum class OpKind : std::uint8_t { kRead, kWrite, kCompute };

struct TraceOp {
  OpKind kind = OpKind::kRead;
  BlockAddr addr = 0;
  std::uint32_t bytes = 0;  // bytes stored by the program (writes)
  std::uint64_t cycles = 0;  // compute
  Block data{};             // full block contents after the store
};

struct TraceTx {
  std::vector<TraceOp> ops;
  bool abort = false;  // ends with tx_abort instead of tx_commit
};

struct Trace {
  std::string workload;
  std::map<BlockAddr, Block> initial;  // home contents before the trace
  std::vector<TraceTx> txs;

  /// Average number of distinct blocks written per committed transaction.
  double pset() const;
  std::uint64_t program_bytes() const;
};

enum class WorkloadKind : std::uint8_t { kBTree, kHash, kRBTree, kSPS };
const char* workload_name(WorkloadKind kind);
std::optional<WorkloadKind> parse_workload(std::string_view name);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::kBTree;
  std::uint32_t ops = 2000;     // structure operations in the measured trace
  std::uint32_t tx_size = 4;    // operations per transaction
  std::uint64_t seed = 1;
  std::uint32_t prefill = 1000;  // operations applied to the initial image
  std::uint32_t compute_per_op = 100;  // cycles of CPU work per operation
  std::uint32_t hash_buckets = 256;
  std::uint32_t sps_entries = 256;
  double delete_fraction = 0.1;  // btree and hash
  double key_locality = 0.9;     // probability the next key continues a run

  void validate() const;
};

using BlockReader = std::function<Block(BlockAddr)>;

struct GeneratedWorkload {
  Trace trace;
  /// Key/value contents the structure must hold after the trace commits.
  std::map<std::uint64_t, std::uint64_t> reference;
  /// Decodes the structure from memory into the same shape as `reference`.
  std::function<std::map<std::uint64_t, std::uint64_t>(const BlockReader&)> decode;
  /// Every block the structure occupies after the trace, with contents.
  std::map<BlockAddr, Block> final_memory;
};

GeneratedWorkload generate(const WorkloadSpec& spec);

/// Unstructured trace for crash testing: `txs` transactions of 1..max_blocks
/// writes over `addr_space` blocks, some aborted.
struct RandomTraceSpec {
  std::uint32_t txs = 20;
  std::uint32_t max_blocks = 8;
  std::uint32_t addr_space = 24;
  double abort_rate = 0.1;
  double read_only_rate = 0.05;
  std::uint64_t seed = 1;
};
Trace random_trace(const RandomTraceSpec& spec);

}  // namespace locsim
