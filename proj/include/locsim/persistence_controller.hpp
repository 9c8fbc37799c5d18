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

// Simulated memory controller: banked persistent-memory write timing, the
// completion event queue, and the memory-log writer (block groups,
// dependency records, commit records, log head).

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string_view>
#include <vector>

#include "locsim/log_layout.hpp"
#include "locsim/memory_image.hpp"

namespace locsim {

enum class ProtocolMode : std::uint8_t { kBaseline, kSWAL, kHWAL, kECWAL, kLOCWAL };

const char* protocol_name(ProtocolMode mode);
std::optional<ProtocolMode> parse_protocol(std::string_view name);
inline bool uses_commit_records(ProtocolMode m) {
  return m == ProtocolMode::kSWAL || m == ProtocolMode::kHWAL;
}

struct MemoryConfig {
  std::uint32_t banks = 8;
  std::uint32_t latency = 168;  // cycles per 64-byte write (1 cycle = 1 ns)
  std::uint64_t log_blocks = kDefaultLogAreaBytes / kBlockSize;

  void validate() const;
};

enum class PersistKind : std::uint8_t { kData, kMeta, kDep, kCommit, kCheckpoint, kLogHead };
const char* persist_kind_name(PersistKind kind);

using PersistId = std::uint64_t;  // issue order, starting at 1
inline constexpr PersistId kNoPersist = 0;

struct PersistRecord {
  PersistId id = kNoPersist;
  PersistKind kind = PersistKind::kData;
  Region region = Region::kLog;
  std::uint64_t index = 0;
  std::uint32_t bank = 0;
  std::uint64_t issue_time = 0;
  std::uint64_t complete_time = 0;
  Block data{};
};

/// Persist counts by category. Log-head writes are metadata.
struct PersistCounts {
  std::uint64_t data = 0;
  std::uint64_t meta = 0;
  std::uint64_t dep = 0;
  std::uint64_t commit = 0;
  std::uint64_t checkpoint = 0;

  std::uint64_t total() const { return data + meta + dep + commit + checkpoint; }
  std::uint64_t bytes() const { return total() * kBlockSize; }
};

/// A persistent speculation window as laid out in the log.
struct LogWindowSpan {
  std::uint16_t window_seq = 0;
  std::uint32_t first_unit = 0;
  std::uint64_t first_sid = 0;
};

class PersistenceController {
 public:
  using CompletionHook = std::function<void(const PersistRecord&, std::uint64_t order)>;
  using GroupHook = std::function<void(PersistId meta, const std::vector<std::uint64_t>& owners)>;
  using LogFullHook = std::function<void(std::uint32_t units_needed)>;

  PersistenceController(const MemoryConfig& config, PersistentImage initial, LogHead head_flags,
                        bool keep_records);

  // --- clock and events
  std::uint64_t now() const { return now_; }
  /// Moves the clock forward and applies every completion up to it.
  void advance_to(std::uint64_t t);
  void tick(std::uint64_t cycles) { advance_to(now_ + cycles); }
  /// Advances to the completion of `id` (no-op if already done); returns the
  /// cycles waited.
  std::uint64_t wait_for(PersistId id);
  /// Completes every outstanding persist; returns cycles waited.
  std::uint64_t drain();

  PersistId issue(PersistKind kind, Region region, std::uint64_t index, const Block& data,
                  std::uint32_t bank, std::uint64_t at);
  PersistId issue(PersistKind kind, Region region, std::uint64_t index, const Block& data,
                  std::uint32_t bank) {
    return issue(kind, region, index, data, bank, now_);
  }
  PersistId issue_home(BlockAddr addr, const Block& data, std::uint64_t at);

  std::uint64_t completion_time(PersistId id) const;
  bool completed(PersistId id) const { return id == kNoPersist || done_.at(id); }
  /// The log persist that completes last among all issued so far.
  PersistId log_frontier() const { return log_frontier_; }
  /// Larger of two persists in completion order.
  PersistId later(PersistId a, PersistId b) const;

  void set_completion_hook(CompletionHook hook) { on_complete_ = std::move(hook); }
  void set_group_hook(GroupHook hook) { on_group_ = std::move(hook); }
  void set_log_full_hook(LogFullHook hook) { on_log_full_ = std::move(hook); }

  // --- log writer
  /// Starts a new log window; its window_seq is assigned when its first
  /// unit is allocated. `tag` is the caller's window identity.
  void begin_log_window(std::uint64_t tag);
  std::uint16_t ensure_window_seq();
  std::optional<std::uint16_t> current_window_seq() const;

  /// Appends a data block to the open group (opening one if needed).
  PersistId log_block(const BlkTag& tag, const Block& data, std::uint64_t owner);
  /// Issues the metadata block of a partially filled group.
  PersistId flush_group();
  bool group_open() const { return group_.has_value(); }
  std::vector<PersistId> write_dep_record(DepRecord record);
  PersistId write_commit_record(TxId txid, std::uint16_t txcnt);

  /// Moves the head start to the window `keep_tag` (or to the log end when
  /// empty) and persists the head. Units are reusable once it completes.
  PersistId truncate(std::optional<std::uint64_t> keep_tag, TxId anchor);
  std::optional<LogWindowSpan> window_span(std::uint64_t tag) const;
  std::vector<std::uint64_t> log_window_tags() const;

  std::uint32_t log_units() const { return units_; }
  std::uint64_t units_used() const { return next_sid_ - durable_start_sid_; }
  std::uint64_t next_sid() const { return next_sid_; }
  const LogHead& head() const { return head_; }

  // --- results
  const PersistentImage& image() const { return image_; }
  const PersistentImage& initial_image() const { return initial_; }
  const std::vector<PersistRecord>& records() const { return records_; }
  /// Issue ids in global completion order, for the persists completed so far.
  const std::vector<PersistId>& completion_order() const { return order_; }
  const PersistCounts& counts() const { return counts_; }
  const MemoryConfig& config() const { return config_; }

 private:
  struct Pending {
    std::uint64_t time;
    PersistId id;
    bool operator>(const Pending& o) const { return time != o.time ? time > o.time : id > o.id; }
  };
  struct OpenGroup {
    std::uint32_t unit = 0;
    std::uint64_t sid = 0;
    std::uint16_t window_seq = 0;
    std::vector<BlkTag> tags;
    std::vector<Block> data;
    std::vector<std::uint64_t> owners;
  };

  std::uint32_t allocate_unit(std::uint64_t* sid);
  void reserve_units(std::uint32_t n);
  void apply(const PersistRecord& rec);

  MemoryConfig config_;
  PersistentImage initial_;
  PersistentImage image_;
  bool keep_records_;
  std::uint64_t now_ = 0;
  std::vector<std::uint64_t> bank_free_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
  std::vector<PersistRecord> records_;       // all records when keep_records_
  std::map<PersistId, PersistRecord> live_;  // outstanding records otherwise
  std::vector<std::uint64_t> complete_times_;
  std::vector<bool> done_;
  std::vector<PersistId> order_;
  PersistId next_id_ = 1;
  PersistId log_frontier_ = kNoPersist;
  PersistCounts counts_;
  CompletionHook on_complete_;
  GroupHook on_group_;
  LogFullHook on_log_full_;

  std::uint32_t units_ = 0;
  std::uint32_t next_unit_ = 0;
  std::uint64_t next_sid_ = 1;
  std::uint64_t durable_start_sid_ = 1;
  std::optional<std::pair<PersistId, std::uint64_t>> pending_head_;  // (write, start sid)
  LogHead head_;
  std::uint16_t next_window_seq_ = 0;
  std::optional<std::uint64_t> window_tag_;
  std::optional<std::uint16_t> window_seq_;
  std::map<std::uint64_t, LogWindowSpan> spans_;
  std::optional<OpenGroup> group_;
};

}  // namespace locsim
