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

// Transactional interface and Tx State Table, driving the cache and the
// persistence controller under one of the protocol modes.

#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "locsim/cache_model.hpp"
#include "locsim/persistence_controller.hpp"

namespace locsim {

/// Home addresses at or above this value are reserved for S-WAL log copies.
inline constexpr BlockAddr kShadowBase = 0x80000000U;
inline constexpr std::size_t kMaxLiveTx = kValidTxIds;

struct EngineConfig {
  ProtocolMode mode = ProtocolMode::kLOCWAL;
  std::uint32_t sd = 16;
  CacheConfig cache;
  MemoryConfig memory;
  bool keep_records = true;
  bool keep_events = false;

  void validate() const;
};

enum class TxState : std::uint8_t { kInvalid = 0, kActive = 1, kCommitted = 2, kAborted = 3 };
enum class TxPhase : std::uint8_t { kLogWrite = 0, kInPlaceWrite = 1, kComplete = 2 };
const char* tx_state_name(TxState s);

/// One TxST entry; packs into 48 bits.
struct TxStateEntry {
  std::uint8_t cid = 0;
  std::uint8_t tid = 0;
  TxId txid = 0;
  std::uint16_t txcnt = 0;
  TxState state = TxState::kInvalid;
  TxPhase phase = TxPhase::kLogWrite;
  std::uint16_t wrts = 0;

  std::uint64_t pack() const;
  static TxStateEntry unpack(std::uint64_t bits);
  friend bool operator==(const TxStateEntry&, const TxStateEntry&) = default;
};
inline constexpr std::size_t kTxStateEntryBits = 48;

struct TxHandle {
  std::uint64_t seq = kNoTx;
  TxId txid = 0;
  std::uint64_t window = 0;
};

struct StallCycles {
  std::uint64_t intra_tx = 0;  // commit record waiting for the tx's log blocks
  std::uint64_t inter_tx = 0;  // waiting for the previous tx to be durable
  std::uint64_t window = 0;    // speculation-window drain
  std::uint64_t flush = 0;     // explicit tx_flush
  std::uint64_t log_full = 0;  // forced truncation

  std::uint64_t total() const { return intra_tx + inter_tx + window + flush + log_full; }
};

struct EngineStats {
  std::uint64_t begun = 0;
  std::uint64_t committed = 0;
  std::uint64_t aborted = 0;
  std::uint64_t read_only = 0;
  std::uint64_t commit_records = 0;
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t program_bytes = 0;
  std::uint64_t access_cycles = 0;
  std::uint64_t compute_cycles = 0;
  StallCycles stalls;
  std::uint64_t inter_tx_stall_events = 0;
  std::uint64_t windows_closed = 0;
  std::uint64_t skipped_blocks = 0;
  std::uint64_t logged_blocks = 0;
  std::uint64_t relogs = 0;
  std::uint64_t carrier_relogs = 0;
  std::uint64_t rescued_blocks = 0;
  std::uint64_t dependency_pairs = 0;
  std::uint64_t truncations = 0;
  std::uint64_t phase_mismatches = 0;
  std::uint64_t pset_blocks = 0;  // distinct blocks written, summed over committed txs
};

/// What the harness needs to know about each issued transaction.
struct TxSummary {
  std::uint64_t seq = 0;
  TxId txid = 0;
  std::uint64_t window = 0;
  std::optional<std::uint16_t> window_seq;
  TxState state = TxState::kInvalid;
  bool has_writes = false;
  bool durable = false;
  std::uint64_t ack_order = 0;  // completions needed before durability was known
  std::uint16_t txcnt = 0;
  std::uint32_t logged = 0;
  std::uint32_t skipped = 0;
};

/// A log-head write that dropped every transaction before `first_kept_seq`
/// from the log (their data is home by then).
struct Truncation {
  PersistId head = kNoPersist;
  std::uint64_t first_kept_seq = 0;
};

struct EngineEvent {
  std::uint64_t time = 0;
  const char* kind = "";
  std::uint64_t seq = 0;
  std::uint64_t value = 0;
};

/// An open or not-yet-truncated speculation window (one per transaction
/// outside LOC-WAL).
struct SpeculationWindow {
  std::uint64_t id = 0;
  TxId first_txid = 0;
  std::vector<std::uint64_t> members;
  bool sealed = false;
  bool closed = false;
  bool durable = false;
  std::vector<DependencyPair> pairs;
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::size_t> pair_index;
  std::map<BlockAddr, std::uint64_t> latest_writer;
  std::map<BlockAddr, std::uint64_t> final_writes;  // filled once durable
  PersistId key = kNoPersist;
};

class TxEngine final : public TxStatusView, public MemorySide {
 public:
  TxEngine(const EngineConfig& config, PersistentImage initial);
  TxEngine(const TxEngine&) = delete;
  TxEngine& operator=(const TxEngine&) = delete;

  TxHandle tx_begin();
  void tx_write(const TxHandle& h, BlockAddr addr, const Block& data, std::uint32_t bytes_stored = kBlockSize);
  Block tx_read(const TxHandle& h, BlockAddr addr);
  void tx_commit(const TxHandle& h);
  void tx_abort(const TxHandle& h);
  void tx_flush(const TxHandle& h);
  /// LastCommittedTxID, or nullopt before any transaction is durable.
  std::optional<TxId> check_max_commit() const { return last_committed_; }

  /// Non-transactional accesses.
  Block read(BlockAddr addr);
  void write(BlockAddr addr, const Block& data, std::uint32_t bytes_stored = kBlockSize);
  /// Charges CPU work.
  void compute(std::uint64_t cycles);

  /// Closes the open window, waits for durability and marks the run end.
  void finish();
  /// finish(), then checkpoints every committed block and empties the log.
  void quiesce();

  const EngineConfig& config() const { return config_; }
  std::uint64_t now() const { return ctrl_.now(); }
  std::uint64_t finish_time() const { return finish_time_; }
  const EngineStats& stats() const { return stats_; }
  const PersistenceController& controller() const { return ctrl_; }
  const CacheHierarchy& cache() const { return cache_; }
  CacheHierarchy& cache() { return cache_; }
  const std::vector<TxSummary>& history() const { return history_; }
  const std::vector<EngineEvent>& events() const { return events_; }
  const std::vector<Truncation>& truncations() const { return truncations_; }
  std::size_t live_count() const;
  std::optional<TxStateEntry> entry(std::uint64_t seq) const;
  const SpeculationWindow* window(std::uint64_t id) const;
  /// Newline-delimited JSON: engine events, then persist records.
  void write_event_log(std::ostream& out) const;

  // TxStatusView
  bool is_committed(std::uint64_t seq) const override;
  // MemorySide
  Block load_home(BlockAddr addr) override;
  EvictAction on_evict(VersionedCacheLine& line, bool version_overflow) override;

 private:
  struct TxRec {
    TxStateEntry e;
    std::uint64_t seq = 0;
    std::uint64_t window = 0;
    std::vector<BlockAddr> write_order;
    std::unordered_set<BlockAddr> write_set;
    std::uint32_t attributed = 0;
    std::uint32_t dirty_lines = 0;
    std::uint32_t logged = 0;
    std::uint32_t skipped = 0;
    bool carrier = false;
    bool gate_passed = false;
    std::optional<BlockAddr> last_logged;
    PersistId key = kNoPersist;
    bool key_required = true;
    bool freeable = false;
  };

  TxRec& active_rec(const TxHandle& h);
  TxRec* rec(std::uint64_t seq);
  SpeculationWindow& win(std::uint64_t id);
  TxContext ctx(const TxRec& r) const;
  bool loc() const { return config_.mode == ProtocolMode::kLOCWAL; }
  bool swal() const { return config_.mode == ProtocolMode::kSWAL; }
  void charge(std::uint32_t latency);
  void note(const char* kind, std::uint64_t seq, std::uint64_t value);
  void stall(std::uint64_t StallCycles::*bucket, PersistId until);

  void log_tx_block(TxRec& r, BlockAddr addr, const Block& data, bool final);
  void log_dirty_lines(TxRec& r, bool allow_final, std::optional<std::unordered_set<BlockAddr>> only = {});
  void settle(TxRec& r);
  void add_pair(SpeculationWindow& w, std::uint64_t a, std::uint64_t b);
  void close_window(SpeculationWindow& w);
  void seal_if_needed(SpeculationWindow& w);
  void advance_durable();
  void on_durable(TxRec& r, TxSummary& s);
  void home_write(BlockAddr addr, const Block& data, std::uint64_t ord);
  void checkpoint_all();
  void make_log_space(std::uint32_t units);
  void collect();
  void on_completion(const PersistRecord& rec, std::uint64_t order);

  EngineConfig config_;
  PersistenceController ctrl_;
  CacheHierarchy cache_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_window_id_ = 1;
  std::uint64_t next_durable_seq_ = 0;
  std::optional<TxId> last_committed_;
  std::map<std::uint64_t, TxRec> live_;
  std::vector<TxSummary> history_;
  std::deque<SpeculationWindow> windows_;
  std::unordered_map<PersistId, std::vector<std::uint64_t>> group_owners_;
  std::unordered_map<PersistId, std::pair<BlockAddr, std::uint64_t>> home_inflight_;
  std::unordered_map<BlockAddr, std::uint64_t> home_issued_ord_;
  std::unordered_map<BlockAddr, std::uint64_t> home_done_ord_;
  std::unordered_map<BlockAddr, Block> home_view_;  // latest issued home contents
  std::unordered_map<std::uint64_t, std::vector<BlockAddr>> final_write_set_;
  struct Superseded {
    std::uint64_t ord = 0;
    std::uint64_t owner = 0;
    Block data{};
  };
  // Committed versions reclaimed from the cache before reaching home; the
  // same data sits in the log and is checkpointed from there.
  std::map<BlockAddr, Superseded> superseded_;
  std::size_t first_pending_window_ = 0;
  std::vector<EngineEvent> events_;
  std::vector<Truncation> truncations_;
  EngineStats stats_;
  std::uint64_t finish_time_ = 0;
  bool in_log_space_ = false;
};

/// Address of the S-WAL log copy for `addr`.
inline BlockAddr shadow_addr(BlockAddr addr) { return kShadowBase | addr; }

}  // namespace locsim
