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

// Inclusive three-level cache with transactional tags and multi-versioning
// in the last-level cache.
//
// Data lives only in the LLC; L1 and L2 are modelled as tag arrays that
// decide access latency. A block may have several resident LLC versions,
// one per writing transaction. Versions that leave the LLC before reaching
// their home location are parked in a staging store (the memory-controller
// side buffer), from which reads and writes can pull them back.

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include "locsim/log_layout.hpp"

namespace locsim {

inline constexpr std::uint64_t kNoTx = std::numeric_limits<std::uint64_t>::max();

/// Identity of the transaction issuing an access. `seq` is the 64-bit issue
/// sequence number (TxIDs are its low 8 bits); kNoTx for plain accesses.
struct TxContext {
  std::uint64_t seq = kNoTx;
  TxId txid = 0;
  std::uint8_t cid = 0;
  std::uint8_t tid = 0;

  bool transactional() const { return seq != kNoTx; }
};

struct CacheLevelConfig {
  std::size_t size_bytes = 0;
  std::size_t ways = 0;
  std::uint32_t latency = 0;

  std::size_t sets() const { return size_bytes / kBlockSize / ways; }
};

struct CacheConfig {
  CacheLevelConfig l1{32 * 1024, 2, 1};
  CacheLevelConfig l2{256 * 1024, 8, 8};
  CacheLevelConfig llc{1024 * 1024, 16, 21};

  void validate() const;
};

struct VersionedCacheLine {
  bool valid = false;
  BlockAddr home_addr = 0;
  Block data{};
  std::uint8_t cid = 0;
  std::uint8_t tid = 0;
  TxId txid = 0;
  std::uint64_t owner = kNoTx;  // issue sequence of the owning transaction
  bool tx_dirty = false;        // not yet written to the memory log
  bool dirty = false;           // not yet written to the home location
  std::uint64_t version_ord = 0;
  std::uint64_t lru = 0;

  bool transactional() const { return owner != kNoTx; }
};

/// Answers commit visibility for the cache's read rule.
class TxStatusView {
 public:
  virtual ~TxStatusView() = default;
  virtual bool is_committed(std::uint64_t seq) const = 0;
};

enum class EvictAction { kDrop, kStage };

/// The memory side of the hierarchy: home contents and LLC eviction handling.
class MemorySide {
 public:
  virtual ~MemorySide() = default;
  virtual Block load_home(BlockAddr addr) = 0;
  /// Called for every line leaving the LLC. The handler may log or write the
  /// line (updating its flags) and decides whether it must be kept staged.
  virtual EvictAction on_evict(VersionedCacheLine& line, bool version_overflow) = 0;
};

struct LevelStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
};

struct CacheStats {
  LevelStats l1;
  LevelStats l2;
  LevelStats llc;
  std::uint64_t version_overflows = 0;
  std::uint64_t staged_fetches = 0;
  std::uint64_t reclaimed_versions = 0;
  std::uint64_t max_versions_per_block = 0;
};

struct AccessResult {
  std::uint32_t latency = 0;
  Block data{};
};

struct WriteResult {
  std::uint32_t latency = 0;
  bool new_version = false;  // a version line was created for the writer
  bool relogged = false;     // writer's own logged line became tx-dirty again
};

class CacheHierarchy {
 public:
  CacheHierarchy(const CacheConfig& config, std::uint32_t memory_latency, const TxStatusView& status,
                 MemorySide& memory);

  const CacheConfig& config() const { return config_; }
  void set_memory_latency(std::uint32_t cycles) { memory_latency_ = cycles; }

  /// Returns the newest version visible to `ctx`: its own, else the newest
  /// committed one, else the home contents.
  AccessResult read(BlockAddr addr, const TxContext& ctx);

  /// Transactional or plain write of a whole block.
  WriteResult write(BlockAddr addr, const Block& data, const TxContext& ctx);

  /// Removes every version of `addr` older than `committed_seq`'s version,
  /// resident or staged. `on_removed` sees each removed line first.
  std::size_t reclaim_versions(BlockAddr addr, std::uint64_t committed_seq,
                               const std::function<void(const VersionedCacheLine&)>& on_removed = {});

  /// Drops every version of `addr` owned by `seq` (abort).
  std::size_t drop_versions(BlockAddr addr, std::uint64_t seq);

  /// The resident or staged line of `addr` owned by `seq`, if any.
  VersionedCacheLine* find(BlockAddr addr, std::uint64_t seq);
  bool is_resident(BlockAddr addr, std::uint64_t seq) const;

  /// All versions of addr (resident first, then staged), oldest first.
  std::vector<const VersionedCacheLine*> versions(BlockAddr addr) const;
  std::size_t resident_versions(BlockAddr addr) const;

  /// Evicts the chosen victim of `addr`'s LLC set as if a new version had to
  /// be admitted. Returns false when the set has a free way.
  bool handle_version_overflow(BlockAddr addr);

  /// Visits every resident and staged line.
  void for_each_line(const std::function<void(VersionedCacheLine&)>& fn);

  /// Removes a staged line (after it was written home).
  void unstage(BlockAddr addr, std::uint64_t owner);
  std::size_t staged_count() const;

  const CacheStats& stats() const { return stats_; }

  /// Extra tag bits per line: 9 in L1/L2 (tid + txid), 12 in the LLC
  /// (cid + tid + txid + tx_dirty).
  static constexpr std::uint32_t kUpperTagBits = 9;
  static constexpr std::uint32_t kLlcTagBits = 12;
  std::uint64_t tag_overhead_bits() const;

 private:
  struct TagLine {
    bool valid = false;
    BlockAddr addr = 0;
    std::uint64_t lru = 0;
  };
  struct TagArray {
    CacheLevelConfig cfg;
    std::vector<TagLine> lines;
    bool touch(BlockAddr addr, std::uint64_t stamp);  // true on hit
    void fill(BlockAddr addr, std::uint64_t stamp, BlockAddr* evicted, bool* did_evict);
    void invalidate(BlockAddr addr);
  };

  std::size_t llc_set(BlockAddr addr) const { return addr % llc_sets_; }
  VersionedCacheLine* llc_way(std::size_t set, std::size_t way) {
    return &llc_[set * config_.llc.ways + way];
  }
  VersionedCacheLine* newest_visible_resident(BlockAddr addr, const TxContext& ctx);
  const VersionedCacheLine* newest_visible_staged(BlockAddr addr, const TxContext& ctx) const;
  bool visible(const VersionedCacheLine& line, const TxContext& ctx) const;
  std::uint64_t newest_ord(BlockAddr addr, std::uint64_t* owner) const;
  VersionedCacheLine* insert(VersionedCacheLine line);
  void evict(VersionedCacheLine* line, bool overflow);
  std::size_t choose_victim(std::size_t set, bool* overflow) const;
  std::uint32_t touch_upper(BlockAddr addr, bool llc_hit);
  void drop_upper_if_absent(BlockAddr addr);
  VersionedCacheLine* pull_staged(BlockAddr addr, std::uint64_t owner);
  void note_versions(BlockAddr addr);

  CacheConfig config_;
  std::uint32_t memory_latency_;
  const TxStatusView& status_;
  MemorySide& memory_;
  TagArray l1_;
  TagArray l2_;
  std::size_t llc_sets_ = 0;
  std::vector<VersionedCacheLine> llc_;
  std::unordered_map<BlockAddr, std::vector<VersionedCacheLine>> staged_;
  std::uint64_t clock_ = 0;
  std::uint64_t plain_ord_ = 0;
  CacheStats stats_;
};

}  // namespace locsim
