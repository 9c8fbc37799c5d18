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

// Bit-exact layout of the memory log area.
//
// The log area is an array of 64-byte blocks. Block 0 holds the log head;
// blocks 1..7 are unused padding so that the body starts on an 8-block
// boundary. The body is a circular sequence of 8-block *units*. Slot 7 of
// every unit is its header block and is always persisted after slots 0..6.
// Three unit kinds exist:
//
//   block group     slots 0..6 hold logged data, slot 7 is a MetaBlock
//   dep record      slots 0..k hold dependency-record payload
//   commit record   only slot 7 is written
//
// All multi-byte fields are little-endian.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "locsim/error.hpp"

namespace locsim {

inline constexpr std::size_t kBlockSize = 64;
inline constexpr std::size_t kGroupDataSlots = 7;
inline constexpr std::size_t kUnitBlocks = 8;
inline constexpr std::size_t kHeaderSlot = 7;
inline constexpr std::size_t kLogBodyOffset = 8;

using Block = std::array<std::uint8_t, kBlockSize>;
using TxId = std::uint8_t;
using BlockAddr = std::uint32_t;

inline constexpr std::uint32_t kMaxTxCnt = 32768;
inline constexpr std::uint64_t kMaxSid = (1ULL << 48) - 1;
inline constexpr std::uint16_t kWindowSeqMask = 0x0fff;
inline constexpr std::size_t kTxIdSlots = 256;
inline constexpr std::size_t kValidTxIds = 128;
inline constexpr std::size_t kDepBufferBytes = 32 * 1024;
inline constexpr std::size_t kDefaultLogAreaBytes = 32ULL * 1024 * 1024;

struct BlkTag {
  std::uint8_t cid = 0;     // 3 bits
  std::uint8_t tid = 0;     // 1 bit
  TxId txid = 0;            // 8 bits
  std::uint16_t txcnt = 0;  // 16 bits, 0 on non-final blocks
  BlockAddr addr = 0;       // 32 bits, units of 64-byte blocks

  bool empty() const { return cid == 0 && tid == 0 && txid == 0 && txcnt == 0 && addr == 0; }
  friend bool operator==(const BlkTag&, const BlkTag&) = default;
};

/// Packs a tag into its 64-bit word: cid[0:3] tid[3] txid[4:12] txcnt[12:28]
/// addr[28:60], bits 60..63 reserved zero. Throws kFieldOverflow on widths.
std::uint64_t encode_blk_tag(const BlkTag& tag);
/// Inverse of encode_blk_tag. Throws kFieldOverflow if reserved bits are set.
BlkTag decode_blk_tag(std::uint64_t word);

struct MetaBlock {
  std::uint64_t sid = 0;
  std::uint16_t window_seq = 0;
  std::uint8_t checksum = 0;
  std::array<BlkTag, kGroupDataSlots> tags{};

  std::size_t used_slots() const;
  friend bool operator==(const MetaBlock&, const MetaBlock&) = default;
};

/// 4-bit fold of the digests of the data blocks occupying used slots.
std::uint8_t group_checksum(std::span<const Block> data, std::uint8_t used_mask);

/// Encodes a group's metadata block. `tags` may hold at most 7 entries; slot
/// i of `data` is covered by the checksum iff tags[i] is non-empty.
Block encode_meta_block(std::uint64_t sid, std::uint16_t window_seq,
                        std::span<const BlkTag> tags, std::span<const Block> data);

enum class DecodeStatus { kOk, kTorn, kNotAGroup };

struct MetaDecode {
  DecodeStatus status = DecodeStatus::kTorn;
  MetaBlock meta;
};

/// Decodes `block` as the metadata of a group whose data slots are `data`
/// (7 blocks). Reports kTorn when the stored checksum does not match.
MetaDecode decode_meta_block(const Block& block, std::span<const Block> data);

// ---------------------------------------------------------------------------

inline constexpr std::uint8_t kTagKindDep = 0xD;
inline constexpr std::uint8_t kTagKindCommit = 0xC;

struct DependencyPair {
  TxId tx_a = 0;
  TxId tx_b = 0;
  std::uint16_t n = 0;
  friend bool operator==(const DependencyPair&, const DependencyPair&) = default;
};

/// txcnt of a committed member whose count is not carried by any logged
/// block (every one of its blocks was logged early or was coalesced away).
struct CountEntry {
  TxId txid = 0;
  std::uint16_t txcnt = 0;
  friend bool operator==(const CountEntry&, const CountEntry&) = default;
};

struct DepRecord {
  std::uint16_t window_seq = 0;
  TxId first_txid = 0;
  std::uint8_t member_count = 0;  // at most 128
  std::array<std::uint64_t, 2> aborted{};  // bit i: member first_txid+i aborted
  std::vector<CountEntry> counts;
  std::vector<DependencyPair> pairs;

  bool is_aborted(std::size_t member_index) const {
    return (aborted[member_index / 64] >> (member_index % 64)) & 1U;
  }
  void set_aborted(std::size_t member_index) {
    aborted[member_index / 64] |= 1ULL << (member_index % 64);
  }
  friend bool operator==(const DepRecord&, const DepRecord&) = default;
};

/// One encoded dependency-record unit: payload blocks go to slots
/// 0..payload.size()-1, the header to slot 7.
struct DepUnit {
  std::vector<Block> payload;
  Block header{};
};

/// Number of 64-byte blocks the record occupies (headers plus payload).
std::size_t dep_record_blocks(std::size_t entry_count);
/// Whether a record with this many counts+pairs fits the 32 KB buffer.
bool dep_record_fits(std::size_t entry_count);

/// Encodes a record into one or more units with consecutive SIDs starting at
/// `first_sid`. Throws kDepBufferOverflow beyond 32 KB.
std::vector<DepUnit> encode_dep_record(const DepRecord& record, std::uint64_t first_sid);

/// Decodes units produced by encode_dep_record. Returns nullopt on any
/// inconsistency (missing unit, bad checksum, wrong kind).
std::optional<DepRecord> decode_dep_record(std::span<const DepUnit> units);

struct CommitRecord {
  std::uint64_t sid = 0;
  std::uint16_t window_seq = 0;
  TxId txid = 0;
  std::uint16_t txcnt = 0;
  friend bool operator==(const CommitRecord&, const CommitRecord&) = default;
};

Block encode_commit_record(const CommitRecord& record);

/// Classification of a unit header block, used by the log scanner.
enum class UnitKind { kGroup, kDep, kCommit, kInvalid };

struct UnitHeader {
  UnitKind kind = UnitKind::kInvalid;
  std::uint64_t sid = 0;
  std::uint16_t window_seq = 0;
  std::uint8_t checksum = 0;
  std::array<std::uint64_t, kGroupDataSlots> words{};
};

/// Parses the common 8-byte header and the seven trailing words without
/// checking the payload checksum.
UnitHeader parse_unit_header(const Block& block);

struct DepUnitInfo {
  std::uint8_t unit_index = 0;
  std::uint8_t unit_count = 0;
  std::uint8_t payload_blocks = 0;
};
DepUnitInfo parse_dep_unit_info(const UnitHeader& header);

std::optional<CommitRecord> decode_commit_record(const Block& block);

// ---------------------------------------------------------------------------

struct LogHead {
  bool commit_record_rule = false;  // WAL recovery: commit records decide
  bool anchored_windows = false;    // open windows must start at the anchor
  std::uint32_t start_unit = 0;
  std::uint32_t end_unit = 0;
  std::uint64_t start_sid = 1;
  std::uint16_t start_window_seq = 0;
  TxId anchor_txid = 0;  // first txid of the window starting at start_unit
  std::uint32_t unit_count = 0;
  friend bool operator==(const LogHead&, const LogHead&) = default;
};

Block encode_log_head(const LogHead& head);
std::optional<LogHead> decode_log_head(const Block& block);

/// Block index (within the log area) of slot `slot` of body unit `unit`.
inline std::uint64_t unit_block_index(std::uint32_t unit, std::size_t slot) {
  return kLogBodyOffset + static_cast<std::uint64_t>(unit) * kUnitBlocks + slot;
}

/// Units in a log area of `log_blocks` blocks.
inline std::uint32_t units_in_log(std::uint64_t log_blocks) {
  return log_blocks <= kLogBodyOffset
             ? 0
             : static_cast<std::uint32_t>((log_blocks - kLogBodyOffset) / kUnitBlocks);
}

// ---------------------------------------------------------------------------
// TxID circular arithmetic. 256 slots, at most 128 consecutive valid.

/// Offset of `id` from `base` in circular order, in [0, 256).
inline std::size_t txid_offset(TxId id, TxId base) {
  return static_cast<std::uint8_t>(id - base);
}

bool txid_in_window(TxId id, TxId window_base);

/// True iff `a` was issued before `b`. Both must lie in the 128 valid slots
/// anchored at `window_base`; throws kTxIdOutOfWindow otherwise.
bool txid_precedes(TxId a, TxId b, TxId window_base);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace locsim
