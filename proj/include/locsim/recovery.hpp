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

// Crash recovery over a persistent-memory image: scan the valid log, decide
// commit status per window by counting (or by commit records under WAL),
// enforce in-order commit, and replay committed blocks to home.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "locsim/log_layout.hpp"
#include "locsim/memory_image.hpp"

namespace locsim {

struct ScannedUnit {
  std::uint32_t unit = 0;
  std::uint64_t sid = 0;
  UnitKind kind = UnitKind::kInvalid;
  std::uint16_t window_seq = 0;
  MetaBlock meta;                       // groups
  std::vector<Block> data;              // groups: the seven data slots
  DepUnit dep;                          // dependency-record units
  std::optional<CommitRecord> commit;   // commit-record units
};

struct ScannedWindow {
  std::uint16_t window_seq = 0;
  std::vector<ScannedUnit> units;
  std::optional<DepRecord> dep;
  bool closed = false;  // a dependency record or a later window exists
};

struct LogScan {
  bool head_valid = false;
  LogHead head;
  std::vector<ScannedWindow> windows;
  std::uint32_t units_scanned = 0;
  std::uint32_t stop_unit = 0;  // first unit not accepted
  std::uint64_t stop_sid = 0;   // sid the scanner expected there
  std::string stop_reason;
};

/// Reads the head and walks units from its start while SIDs are consecutive
/// and each unit is intact. A corrupt head yields an empty scan.
LogScan scan_valid_log(const PersistentImage& image);

struct TxCountStatus {
  TxId txid = 0;
  bool aborted = false;
  std::uint32_t logged = 0;
  std::optional<std::uint16_t> txcnt;
  std::uint32_t effective = 0;  // logged plus credited dependency pairs
  bool committed = false;
};

/// Step one: per member, count its tags and find its unique txcnt (from a
/// final tag or a CountEntry). Throws kCorruptLog on conflicting txcnts.
std::vector<TxCountStatus> count_commit_status(const ScannedWindow& window,
                                               const std::vector<TxId>& members);

/// Step two: credits pair counts from committed successors and keeps the
/// longest prefix of members whose counts all reconcile. Unknown txids in
/// pairs are ignored and reported through `diagnostics`.
void apply_dependency_pairs(const ScannedWindow& window, std::vector<TxCountStatus>& status,
                            std::vector<std::string>* diagnostics = nullptr);

struct RecoveredTx {
  std::uint16_t window_seq = 0;
  TxId txid = 0;
  friend bool operator==(const RecoveredTx&, const RecoveredTx&) = default;
};

struct WindowDiagnostics {
  std::uint16_t window_seq = 0;
  std::size_t units = 0;
  bool has_dep_record = false;
  bool closed = false;
  std::vector<TxCountStatus> members;
};

struct RecoveryReport {
  bool head_valid = false;
  LogHead head;
  std::vector<RecoveredTx> committed;  // commit issue order
  std::vector<RecoveredTx> discarded;
  std::uint64_t replayed_blocks = 0;
  std::uint32_t units_scanned = 0;
  std::uint32_t torn_unit = 0;
  std::string stop_reason;
  std::vector<WindowDiagnostics> windows;
  std::vector<std::string> diagnostics;

  std::string to_json() const;
  friend bool operator==(const RecoveryReport& a, const RecoveryReport& b) {
    return a.to_json() == b.to_json();
  }
};

/// Step three: orders windows and members, demotes everything after the
/// first not-committed transaction, and copies committed blocks home.
RecoveryReport enforce_in_order_and_replay(const LogScan& scan, PersistentImage& image);

/// Full recovery; returns the report and writes the recovered home area
/// into `image` (the log area is left as found).
RecoveryReport recover(PersistentImage& image);

}  // namespace locsim
