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

#include "locsim/log_layout.hpp"

#include <algorithm>
#include <cstring>

namespace locsim {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFieldOverflow: return "FieldOverflow";
    case ErrorCode::kTooManyTags: return "TooManyTags";
    case ErrorCode::kTxIdOutOfWindow: return "TxIdOutOfWindow";
    case ErrorCode::kDepBufferOverflow: return "DepBufferOverflow";
    case ErrorCode::kTxIdExhausted: return "TxIdExhausted";
    case ErrorCode::kWindowBusy: return "WindowBusy";
    case ErrorCode::kInactiveTx: return "InactiveTx";
    case ErrorCode::kTxTooLarge: return "TxTooLarge";
    case ErrorCode::kLogAreaFull: return "LogAreaFull";
    case ErrorCode::kCorruptLog: return "CorruptLog";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

namespace {

constexpr std::uint32_t kHeadMagic = 0x48434f4c;  // "LOCH"
constexpr std::uint16_t kHeadVersion = 1;
constexpr std::size_t kHeadChecksumOffset = 56;
constexpr std::size_t kEntryBytes = 4;
constexpr std::size_t kEntriesPerBlock = kBlockSize / kEntryBytes;
constexpr std::size_t kMaxDepBlocks = kDepBufferBytes / kBlockSize;

void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}
void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}
std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t header_word(std::uint64_t sid, std::uint16_t window_seq, std::uint8_t checksum) {
  if (sid > kMaxSid) throw Error(ErrorCode::kFieldOverflow, "sid exceeds 48 bits");
  if (window_seq > kWindowSeqMask) throw Error(ErrorCode::kFieldOverflow, "window_seq exceeds 12 bits");
  return sid | (static_cast<std::uint64_t>(window_seq) << 48) |
         (static_cast<std::uint64_t>(checksum & 0xf) << 60);
}

std::uint8_t reserved_nibble(std::uint64_t word) { return static_cast<std::uint8_t>(word >> 60); }

std::uint8_t fold4(std::uint64_t h) {
  std::uint8_t r = 0;
  for (int i = 0; i < 16; ++i) r ^= static_cast<std::uint8_t>((h >> (4 * i)) & 0xf);
  return r;
}

std::uint8_t low_mask(std::size_t n) { return static_cast<std::uint8_t>((1U << n) - 1); }

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static const char* kDigits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

std::uint64_t encode_blk_tag(const BlkTag& tag) {
  if (tag.cid > 7) throw Error(ErrorCode::kFieldOverflow, "cid exceeds 3 bits");
  if (tag.tid > 1) throw Error(ErrorCode::kFieldOverflow, "tid exceeds 1 bit");
  if (tag.txcnt > kMaxTxCnt) throw Error(ErrorCode::kFieldOverflow, "txcnt exceeds 32K blocks");
  return static_cast<std::uint64_t>(tag.cid) | (static_cast<std::uint64_t>(tag.tid) << 3) |
         (static_cast<std::uint64_t>(tag.txid) << 4) |
         (static_cast<std::uint64_t>(tag.txcnt) << 12) |
         (static_cast<std::uint64_t>(tag.addr) << 28);
}

BlkTag decode_blk_tag(std::uint64_t word) {
  if (reserved_nibble(word) != 0) throw Error(ErrorCode::kFieldOverflow, "reserved tag bits set");
  BlkTag t;
  t.cid = static_cast<std::uint8_t>(word & 0x7);
  t.tid = static_cast<std::uint8_t>((word >> 3) & 0x1);
  t.txid = static_cast<TxId>((word >> 4) & 0xff);
  t.txcnt = static_cast<std::uint16_t>((word >> 12) & 0xffff);
  t.addr = static_cast<BlockAddr>((word >> 28) & 0xffffffffULL);
  return t;
}

std::size_t MetaBlock::used_slots() const {
  return static_cast<std::size_t>(std::count_if(tags.begin(), tags.end(),
                                                [](const BlkTag& t) { return !t.empty(); }));
}

std::uint8_t group_checksum(std::span<const Block> data, std::uint8_t used_mask) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < kGroupDataSlots; ++i) {
    if (!((used_mask >> i) & 1U)) continue;
    if (i >= data.size()) throw Error(ErrorCode::kFieldOverflow, "missing data block for used slot");
    std::uint8_t digest[8];
    put_u64(digest, fnv1a64(data[i]));
    h = fnv1a64(digest, h);
  }
  return fold4(h);
}

Block encode_meta_block(std::uint64_t sid, std::uint16_t window_seq, std::span<const BlkTag> tags,
                        std::span<const Block> data) {
  if (tags.size() > kGroupDataSlots) throw Error(ErrorCode::kTooManyTags, "more than 7 tags");
  std::uint8_t mask = 0;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!tags[i].empty()) mask |= static_cast<std::uint8_t>(1U << i);
  }
  Block out{};
  put_u64(out.data(), header_word(sid, window_seq, group_checksum(data, mask)));
  for (std::size_t i = 0; i < tags.size(); ++i) {
    put_u64(out.data() + 8 * (i + 1), encode_blk_tag(tags[i]));
  }
  return out;
}

UnitHeader parse_unit_header(const Block& block) {
  UnitHeader h;
  const std::uint64_t w = get_u64(block.data());
  h.sid = w & kMaxSid;
  h.window_seq = static_cast<std::uint16_t>((w >> 48) & kWindowSeqMask);
  h.checksum = reserved_nibble(w);
  for (std::size_t i = 0; i < kGroupDataSlots; ++i) h.words[i] = get_u64(block.data() + 8 * (i + 1));
  const std::uint8_t kind = reserved_nibble(h.words[0]);
  if (kind == 0) {
    const bool clean = std::all_of(h.words.begin(), h.words.end(),
                                   [](std::uint64_t x) { return reserved_nibble(x) == 0; });
    h.kind = clean ? UnitKind::kGroup : UnitKind::kInvalid;
  } else if (kind == kTagKindDep) {
    h.kind = UnitKind::kDep;
  } else if (kind == kTagKindCommit) {
    h.kind = UnitKind::kCommit;
  } else {
    h.kind = UnitKind::kInvalid;
  }
  return h;
}

MetaDecode decode_meta_block(const Block& block, std::span<const Block> data) {
  MetaDecode r;
  const UnitHeader h = parse_unit_header(block);
  if (h.kind != UnitKind::kGroup) {
    r.status = DecodeStatus::kNotAGroup;
    return r;
  }
  r.meta.sid = h.sid;
  r.meta.window_seq = h.window_seq;
  r.meta.checksum = h.checksum;
  std::uint8_t mask = 0;
  for (std::size_t i = 0; i < kGroupDataSlots; ++i) {
    r.meta.tags[i] = decode_blk_tag(h.words[i]);
    if (!r.meta.tags[i].empty()) mask |= static_cast<std::uint8_t>(1U << i);
  }
  if (mask != 0 && data.size() < kGroupDataSlots) {
    r.status = DecodeStatus::kTorn;
    return r;
  }
  r.status = group_checksum(data, mask) == h.checksum ? DecodeStatus::kOk : DecodeStatus::kTorn;
  return r;
}

// ---------------------------------------------------------------------------

std::size_t dep_record_blocks(std::size_t entry_count) {
  const std::size_t payload = (entry_count + kEntriesPerBlock - 1) / kEntriesPerBlock;
  const std::size_t units = std::max<std::size_t>(1, (payload + kGroupDataSlots - 1) / kGroupDataSlots);
  return payload + units;
}

bool dep_record_fits(std::size_t entry_count) {
  return dep_record_blocks(entry_count) <= kMaxDepBlocks;
}

std::vector<DepUnit> encode_dep_record(const DepRecord& record, std::uint64_t first_sid) {
  const std::size_t entries = record.counts.size() + record.pairs.size();
  if (!dep_record_fits(entries)) {
    throw Error(ErrorCode::kDepBufferOverflow, "dependency record exceeds 32 KB");
  }
  if (record.member_count > kValidTxIds) {
    throw Error(ErrorCode::kFieldOverflow, "window holds more than 128 members");
  }
  std::vector<std::uint8_t> bytes(entries * kEntryBytes, 0);
  std::size_t off = 0;
  for (const CountEntry& c : record.counts) {
    bytes[off] = c.txid;
    put_u16(&bytes[off + 2], c.txcnt);
    off += kEntryBytes;
  }
  for (const DependencyPair& p : record.pairs) {
    bytes[off] = p.tx_a;
    bytes[off + 1] = p.tx_b;
    put_u16(&bytes[off + 2], p.n);
    off += kEntryBytes;
  }
  const std::size_t payload_blocks = (bytes.size() + kBlockSize - 1) / kBlockSize;
  const std::size_t unit_count =
      std::max<std::size_t>(1, (payload_blocks + kGroupDataSlots - 1) / kGroupDataSlots);

  std::vector<DepUnit> units(unit_count);
  for (std::size_t u = 0; u < unit_count; ++u) {
    const std::size_t first = u * kGroupDataSlots;
    const std::size_t count = std::min(kGroupDataSlots, payload_blocks - std::min(payload_blocks, first));
    DepUnit& unit = units[u];
    unit.payload.resize(count);
    for (std::size_t b = 0; b < count; ++b) {
      const std::size_t start = (first + b) * kBlockSize;
      const std::size_t len = std::min(kBlockSize, bytes.size() - start);
      std::memcpy(unit.payload[b].data(), bytes.data() + start, len);
    }
    const std::uint8_t sum = group_checksum(unit.payload, low_mask(count));
    put_u64(unit.header.data(), header_word(first_sid + u, record.window_seq, sum));
    const std::uint64_t w0 = (static_cast<std::uint64_t>(kTagKindDep) << 60) | u |
                             (static_cast<std::uint64_t>(unit_count) << 8) |
                             (static_cast<std::uint64_t>(count) << 16);
    const std::uint64_t w1 = static_cast<std::uint64_t>(record.first_txid) |
                             (static_cast<std::uint64_t>(record.member_count) << 8) |
                             (static_cast<std::uint64_t>(record.counts.size()) << 16) |
                             (static_cast<std::uint64_t>(record.pairs.size()) << 32);
    put_u64(unit.header.data() + 8, w0);
    put_u64(unit.header.data() + 16, w1);
    put_u64(unit.header.data() + 24, record.aborted[0]);
    put_u64(unit.header.data() + 32, record.aborted[1]);
  }
  return units;
}

DepUnitInfo parse_dep_unit_info(const UnitHeader& header) {
  DepUnitInfo info;
  info.unit_index = static_cast<std::uint8_t>(header.words[0] & 0xff);
  info.unit_count = static_cast<std::uint8_t>((header.words[0] >> 8) & 0xff);
  info.payload_blocks = static_cast<std::uint8_t>((header.words[0] >> 16) & 0xff);
  return info;
}

std::optional<DepRecord> decode_dep_record(std::span<const DepUnit> units) {
  if (units.empty()) return std::nullopt;
  const UnitHeader first = parse_unit_header(units[0].header);
  if (first.kind != UnitKind::kDep) return std::nullopt;
  const DepUnitInfo first_info = parse_dep_unit_info(first);
  if (first_info.unit_index != 0 || first_info.unit_count != units.size()) return std::nullopt;

  DepRecord rec;
  rec.window_seq = first.window_seq;
  rec.first_txid = static_cast<TxId>(first.words[1] & 0xff);
  rec.member_count = static_cast<std::uint8_t>((first.words[1] >> 8) & 0xff);
  const std::size_t count_entries = (first.words[1] >> 16) & 0xffff;
  const std::size_t pair_entries = (first.words[1] >> 32) & 0xffff;
  rec.aborted = {first.words[2], first.words[3]};

  std::vector<std::uint8_t> bytes;
  for (std::size_t u = 0; u < units.size(); ++u) {
    const UnitHeader h = parse_unit_header(units[u].header);
    const DepUnitInfo info = parse_dep_unit_info(h);
    if (h.kind != UnitKind::kDep || info.unit_index != u || info.unit_count != units.size() ||
        h.sid != first.sid + u || h.window_seq != first.window_seq || h.words[1] != first.words[1] ||
        h.words[2] != first.words[2] || h.words[3] != first.words[3] ||
        info.payload_blocks != units[u].payload.size() || info.payload_blocks > kGroupDataSlots) {
      return std::nullopt;
    }
    if (group_checksum(units[u].payload, low_mask(info.payload_blocks)) != h.checksum) {
      return std::nullopt;
    }
    for (const Block& b : units[u].payload) bytes.insert(bytes.end(), b.begin(), b.end());
  }
  if (bytes.size() < (count_entries + pair_entries) * kEntryBytes) return std::nullopt;
  std::size_t off = 0;
  for (std::size_t i = 0; i < count_entries; ++i, off += kEntryBytes) {
    rec.counts.push_back(CountEntry{bytes[off], get_u16(&bytes[off + 2])});
  }
  for (std::size_t i = 0; i < pair_entries; ++i, off += kEntryBytes) {
    rec.pairs.push_back(DependencyPair{bytes[off], bytes[off + 1], get_u16(&bytes[off + 2])});
  }
  return rec;
}

Block encode_commit_record(const CommitRecord& record) {
  Block out{};
  put_u64(out.data(), header_word(record.sid, record.window_seq, group_checksum({}, 0)));
  const std::uint64_t w0 = (static_cast<std::uint64_t>(kTagKindCommit) << 60) | record.txid |
                           (static_cast<std::uint64_t>(record.txcnt) << 8);
  put_u64(out.data() + 8, w0);
  return out;
}

std::optional<CommitRecord> decode_commit_record(const Block& block) {
  const UnitHeader h = parse_unit_header(block);
  if (h.kind != UnitKind::kCommit || h.checksum != group_checksum({}, 0)) return std::nullopt;
  CommitRecord r;
  r.sid = h.sid;
  r.window_seq = h.window_seq;
  r.txid = static_cast<TxId>(h.words[0] & 0xff);
  r.txcnt = static_cast<std::uint16_t>((h.words[0] >> 8) & 0xffff);
  return r;
}

// ---------------------------------------------------------------------------

Block encode_log_head(const LogHead& head) {
  Block out{};
  put_u32(out.data(), kHeadMagic);
  put_u16(out.data() + 4, kHeadVersion);
  put_u16(out.data() + 6, static_cast<std::uint16_t>((head.commit_record_rule ? 1U : 0U) |
                                                 (head.anchored_windows ? 2U : 0U)));
  put_u32(out.data() + 8, head.start_unit);
  put_u32(out.data() + 12, head.end_unit);
  put_u64(out.data() + 16, head.start_sid);
  put_u16(out.data() + 24, head.start_window_seq);
  out[26] = head.anchor_txid;
  put_u32(out.data() + 28, head.unit_count);
  put_u64(out.data() + kHeadChecksumOffset,
          fnv1a64(std::span<const std::uint8_t>(out.data(), kHeadChecksumOffset)));
  return out;
}

std::optional<LogHead> decode_log_head(const Block& block) {
  if (get_u32(block.data()) != kHeadMagic || get_u16(block.data() + 4) != kHeadVersion) {
    return std::nullopt;
  }
  if (get_u64(block.data() + kHeadChecksumOffset) !=
      fnv1a64(std::span<const std::uint8_t>(block.data(), kHeadChecksumOffset))) {
    return std::nullopt;
  }
  LogHead h;
  h.commit_record_rule = (get_u16(block.data() + 6) & 1U) != 0;
  h.anchored_windows = (get_u16(block.data() + 6) & 2U) != 0;
  h.start_unit = get_u32(block.data() + 8);
  h.end_unit = get_u32(block.data() + 12);
  h.start_sid = get_u64(block.data() + 16);
  h.start_window_seq = get_u16(block.data() + 24);
  h.anchor_txid = block[26];
  h.unit_count = get_u32(block.data() + 28);
  if (h.unit_count == 0 || h.start_unit >= h.unit_count || h.end_unit >= h.unit_count ||
      h.start_sid == 0 || h.start_sid > kMaxSid || h.start_window_seq > kWindowSeqMask) {
    return std::nullopt;
  }
  return h;
}

// ---------------------------------------------------------------------------

bool txid_in_window(TxId id, TxId window_base) {
  return txid_offset(id, window_base) < kValidTxIds;
}

bool txid_precedes(TxId a, TxId b, TxId window_base) {
  if (!txid_in_window(a, window_base) || !txid_in_window(b, window_base)) {
    throw Error(ErrorCode::kTxIdOutOfWindow, "txid outside the 128 valid slots");
  }
  return txid_offset(a, window_base) < txid_offset(b, window_base);
}

}  // namespace locsim
