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

// Reference implementations used by both the unit tests and the acceptance
// binary. None of them call into the code they check beyond the codec
// primitives they are built on.

#pragma once

#include <algorithm>
#include <iterator>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "locsim/log_layout.hpp"
#include "locsim/memory_image.hpp"
#include "locsim/recovery.hpp"
#include "locsim/sim_harness.hpp"

namespace locsim::oracle {

// --- bit-level codec oracle ---------------------------------------------------

/// Builds a word by appending fields least-significant first.
class BitWriter {
 public:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bits_.push_back((v >> i) & 1U);
  }
  std::uint64_t word() const {
    std::uint64_t w = 0;
    for (std::size_t i = 0; i < bits_.size() && i < 64; ++i) w |= static_cast<std::uint64_t>(bits_[i]) << i;
    return w;
  }
  std::size_t size() const { return bits_.size(); }

 private:
  std::vector<int> bits_;
};

inline std::uint64_t tag_word(const BlkTag& t) {
  BitWriter w;
  w.put(t.cid, 3);
  w.put(t.tid, 1);
  w.put(t.txid, 8);
  w.put(t.txcnt, 16);
  w.put(t.addr, 32);
  w.put(0, 4);
  return w.word();
}

inline std::uint64_t fnv(const std::uint8_t* p, std::size_t n, std::uint64_t h = 14695981039346656037ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

/// XOR of the sixteen nibbles of the chained FNV-1a over per-block digests.
inline std::uint8_t checksum(const std::vector<Block>& data, std::uint8_t mask) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < 7; ++i) {
    if (!((mask >> i) & 1U)) continue;
    const std::uint64_t d = fnv(data[i].data(), 64);
    std::uint8_t le[8];
    for (int b = 0; b < 8; ++b) le[b] = static_cast<std::uint8_t>(d >> (8 * b));
    h = fnv(le, 8, h);
  }
  std::uint8_t r = 0;
  for (int i = 0; i < 16; ++i) r ^= static_cast<std::uint8_t>((h >> (4 * i)) & 0xf);
  return r;
}

inline Block meta_block(std::uint64_t sid, std::uint16_t wseq, const std::vector<BlkTag>& tags,
                        const std::vector<Block>& data) {
  std::uint8_t mask = 0;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!tags[i].empty()) mask |= static_cast<std::uint8_t>(1U << i);
  }
  BitWriter h;
  h.put(sid, 48);
  h.put(wseq, 12);
  h.put(checksum(data, mask), 4);
  Block out{};
  auto put = [&](std::size_t off, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out[off + b] = static_cast<std::uint8_t>(v >> (8 * b));
  };
  put(0, h.word());
  for (std::size_t i = 0; i < tags.size(); ++i) put(8 * (i + 1), tag_word(tags[i]));
  return out;
}

struct GoldenGroup {
  std::string name;
  std::uint64_t sid;
  std::uint16_t wseq;
  std::vector<BlkTag> tags;
  std::vector<Block> data;
};

inline std::vector<GoldenGroup> golden_groups() {
  std::vector<GoldenGroup> g(3);
  g[0].name = "single-final-tag";
  g[0].sid = 1;
  g[0].wseq = 0;
  g[0].tags = {BlkTag{1, 1, 5, 7, 0x1000}};
  g[0].data.assign(7, Block{});
  for (std::size_t i = 0; i < 64; ++i) g[0].data[0][i] = static_cast<std::uint8_t>(i);

  g[1].name = "full-group-one-tx";
  g[1].sid = 0x123456789aULL;
  g[1].wseq = 0x7ff;
  g[1].data.assign(7, Block{});
  for (std::uint8_t i = 0; i < 7; ++i) {
    g[1].tags.push_back(BlkTag{2, 0, 0x10, static_cast<std::uint16_t>(i == 6 ? 7 : 0),
                               static_cast<BlockAddr>(0x100 + i)});
    g[1].data[i].fill(static_cast<std::uint8_t>(0xa0 + i));
  }

  g[2].name = "mixed-tx-field-limits";
  g[2].sid = kMaxSid;
  g[2].wseq = kWindowSeqMask;
  g[2].tags = {BlkTag{7, 1, 0xff, 0, 0xffffffffU}, BlkTag{0, 0, 0x00, 32768, 1},
               BlkTag{3, 0, 0x80, 2, 0x7fffffffU}};
  g[2].data.assign(7, Block{});
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t i = 0; i < 64; ++i) g[2].data[s][i] = static_cast<std::uint8_t>(0x11 * (s + 1) + i);
  }
  return g;
}

/// Metadata blocks of golden_groups(), frozen; computed by meta_block().
inline const char* golden_hex(std::size_t i) {
  static const char* kHex[3] = {
      "0100000000000030597000000001000000000000000000000000000000000000"
      "0000000000000000000000000000000000000000000000000000000000000000",
      "9a7856341200ff77020100001000000002010010100000000201002010000000"
      "0201003010000000020100401000000002010050100000000271006010000000",
      "ffffffffffffffdfff0f00f0ffffff0f0000001800000000032800f0ffffff07"
      "0000000000000000000000000000000000000000000000000000000000000000",
  };
  return kHex[i];
}

// --- randomized codec round trips ---------------------------------------------

struct CodecResult {
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::string first_failure;
  void fail(const std::string& what) {
    if (failures++ == 0) first_failure = what;
  }
};

inline BlkTag random_tag(std::mt19937_64& g, bool allow_empty = true) {
  for (;;) {
    BlkTag t;
    t.cid = static_cast<std::uint8_t>(g() % 8);
    t.tid = static_cast<std::uint8_t>(g() % 2);
    t.txid = static_cast<TxId>(g());
    t.txcnt = static_cast<std::uint16_t>(g() % (kMaxTxCnt + 1));
    t.addr = static_cast<BlockAddr>(g());
    if (allow_empty || !t.empty()) return t;
  }
}

inline Block random_block(std::mt19937_64& g) {
  Block b;
  for (auto& x : b) x = static_cast<std::uint8_t>(g());
  return b;
}

inline CodecResult codec_roundtrip(std::size_t n, std::uint64_t seed) {
  CodecResult r;
  std::mt19937_64 g(seed);
  for (std::size_t i = 0; i < n; ++i) {
    // Tag.
    const BlkTag t = random_tag(g);
    ++r.cases;
    if (encode_blk_tag(t) != tag_word(t) || decode_blk_tag(encode_blk_tag(t)) != t) r.fail("blk tag");

    // Group metadata.
    const std::size_t used = 1 + g() % 7;
    std::vector<BlkTag> tags;
    std::vector<Block> data(7, Block{});
    for (std::size_t s = 0; s < used; ++s) {
      tags.push_back(random_tag(g, false));
      data[s] = random_block(g);
    }
    const std::uint64_t sid = 1 + g() % kMaxSid;
    const std::uint16_t wseq = static_cast<std::uint16_t>(g() % (kWindowSeqMask + 1));
    const Block meta = encode_meta_block(sid, wseq, tags, data);
    ++r.cases;
    if (meta != meta_block(sid, wseq, tags, data)) r.fail("meta block bytes");
    const MetaDecode d = decode_meta_block(meta, data);
    if (d.status != DecodeStatus::kOk || d.meta.sid != sid || d.meta.window_seq != wseq) {
      r.fail("meta block decode");
    } else {
      for (std::size_t s = 0; s < 7; ++s) {
        if (d.meta.tags[s] != (s < used ? tags[s] : BlkTag{})) r.fail("meta block tag");
      }
    }

    // Dependency record, sometimes spanning several units.
    DepRecord rec;
    rec.window_seq = wseq;
    rec.first_txid = static_cast<TxId>(g());
    rec.member_count = static_cast<std::uint8_t>(1 + g() % kValidTxIds);
    for (std::size_t m = 0; m < rec.member_count; ++m) {
      if (g() % 5 == 0) rec.set_aborted(m);
    }
    const std::size_t big = g() % 50 == 0 ? 2000 + g() % 5000 : g() % 60;
    for (std::size_t e = 0; e < big; ++e) {
      if (g() % 3 == 0) {
        rec.counts.push_back(CountEntry{static_cast<TxId>(g()), static_cast<std::uint16_t>(g() % (kMaxTxCnt + 1))});
      } else {
        rec.pairs.push_back(DependencyPair{static_cast<TxId>(g()), static_cast<TxId>(g()),
                                           static_cast<std::uint16_t>(1 + g() % 65535)});
      }
    }
    const std::vector<DepUnit> units = encode_dep_record(rec, sid > kMaxSid - 64 ? 1 : sid);
    ++r.cases;
    const auto back = decode_dep_record(units);
    if (!back || *back != rec) r.fail("dependency record");

    // Commit record.
    const CommitRecord cr{sid, wseq, static_cast<TxId>(g()), static_cast<std::uint16_t>(g() % (kMaxTxCnt + 1))};
    ++r.cases;
    const auto cb = decode_commit_record(encode_commit_record(cr));
    if (!cb || *cb != cr) r.fail("commit record");

    // Log head.
    LogHead h;
    h.commit_record_rule = g() % 2;
    h.anchored_windows = g() % 2;
    h.unit_count = static_cast<std::uint32_t>(1 + g() % 1000000);
    h.start_unit = static_cast<std::uint32_t>(g() % h.unit_count);
    h.end_unit = static_cast<std::uint32_t>(g() % h.unit_count);
    h.start_sid = sid;
    h.start_window_seq = wseq;
    h.anchor_txid = static_cast<TxId>(g());
    ++r.cases;
    const auto hb = decode_log_head(encode_log_head(h));
    if (!hb || *hb != h) r.fail("log head");
  }
  return r;
}

// --- brute-force commit-set oracle ---------------------------------------------

struct OracleUnit {
  UnitKind kind = UnitKind::kInvalid;
  std::uint16_t wseq = 0;
  std::vector<std::pair<BlkTag, Block>> blocks;
  std::optional<CommitRecord> commit;
  std::optional<DepRecord> dep;
};

/// Intact units from the head, in log order.
inline std::optional<std::pair<LogHead, std::vector<OracleUnit>>> read_units(const PersistentImage& img) {
  const auto head = decode_log_head(img.log(0));
  const std::uint32_t units = img.log_units();
  if (!head || head->unit_count != units || units == 0) return std::nullopt;
  std::vector<OracleUnit> out;
  std::uint64_t sid = head->start_sid;
  std::uint32_t u = head->start_unit;
  std::vector<DepUnit> pending;
  std::uint16_t pending_wseq = 0;
  for (std::uint32_t n = 0; n < units; ++n, ++sid, u = (u + 1) % units) {
    const Block& hb = img.log(unit_block_index(u, 7));
    const UnitHeader h = parse_unit_header(hb);
    if (h.kind == UnitKind::kInvalid || h.sid != sid) break;
    if (h.kind == UnitKind::kDep) {
      const DepUnitInfo info = parse_dep_unit_info(h);
      if (info.payload_blocks > 7 || info.unit_index != pending.size()) break;
      DepUnit du;
      for (std::size_t i = 0; i < info.payload_blocks; ++i) du.payload.push_back(img.log(unit_block_index(u, i)));
      du.header = hb;
      pending.push_back(du);
      pending_wseq = h.window_seq;
      if (info.unit_index + 1 == info.unit_count) {
        auto rec = decode_dep_record(pending);
        if (!rec) break;
        OracleUnit ou;
        ou.kind = UnitKind::kDep;
        ou.wseq = pending_wseq;
        ou.dep = rec;
        out.push_back(std::move(ou));
        pending.clear();
      }
      continue;
    }
    if (!pending.empty()) break;
    OracleUnit ou;
    ou.kind = h.kind;
    ou.wseq = h.window_seq;
    if (h.kind == UnitKind::kCommit) {
      ou.commit = decode_commit_record(hb);
      if (!ou.commit) break;
    } else {
      std::vector<Block> data;
      for (std::size_t i = 0; i < 7; ++i) data.push_back(img.log(unit_block_index(u, i)));
      const MetaDecode md = decode_meta_block(hb, data);
      if (md.status != DecodeStatus::kOk) break;
      for (std::size_t i = 0; i < 7; ++i) {
        if (!md.meta.tags[i].empty()) ou.blocks.emplace_back(md.meta.tags[i], data[i]);
      }
    }
    out.push_back(std::move(ou));
  }
  return std::make_pair(*head, std::move(out));
}

struct OracleWindow {
  std::uint16_t wseq = 0;
  std::vector<const OracleUnit*> units;
  const DepRecord* dep = nullptr;
};

/// Largest downward-closed (or, with `independent`, arbitrary) subset of
/// `members` whose counts all reconcile, found by enumerating subsets.
inline std::vector<bool> best_subset(const OracleWindow& w, const std::vector<TxId>& members,
                                     const std::vector<bool>& aborted, bool independent) {
  const std::size_t n = members.size();
  std::map<TxId, std::size_t> at;
  for (std::size_t i = 0; i < n; ++i) at[members[i]] = i;
  std::vector<std::uint32_t> logged(n, 0);
  std::vector<std::optional<std::uint32_t>> txcnt(n);
  for (const OracleUnit* u : w.units) {
    for (const auto& [tag, data] : u->blocks) {
      auto it = at.find(tag.txid);
      if (it == at.end()) continue;
      ++logged[it->second];
      if (tag.txcnt != 0) txcnt[it->second] = tag.txcnt;
    }
  }
  std::vector<std::tuple<std::size_t, std::size_t, std::uint32_t>> pairs;
  if (w.dep != nullptr) {
    for (const CountEntry& c : w.dep->counts) {
      if (at.count(c.txid)) txcnt[at[c.txid]] = c.txcnt;
    }
    for (const DependencyPair& p : w.dep->pairs) {
      if (at.count(p.tx_a) && at.count(p.tx_b)) pairs.emplace_back(at[p.tx_a], at[p.tx_b], p.n);
    }
  }
  std::vector<bool> best(n, false);
  std::size_t best_size = 0;
  bool found = false;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    bool ok = true;
    std::size_t size = 0;
    for (std::size_t i = 0; i < n && ok; ++i) {
      const bool in = (mask >> i) & 1U;
      if (in && aborted[i]) ok = false;
      if (in) ++size;
    }
    if (!ok) continue;
    if (!independent) {
      // Downward closed over live members: no live member outside S may
      // precede a member of S.
      bool gap = false;
      for (std::size_t i = 0; i < n && ok; ++i) {
        const bool in = (mask >> i) & 1U;
        if (!in && !aborted[i]) gap = true;
        if (in && gap) ok = false;
      }
    }
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!((mask >> i) & 1U)) continue;
      std::uint32_t credit = 0;
      for (const auto& [a, b, cnt] : pairs) {
        if (a == i && ((mask >> b) & 1U)) credit += cnt;
      }
      ok = txcnt[i] && logged[i] + credit == *txcnt[i];
    }
    if (!ok) continue;
    if (!found || size > best_size) {
      found = true;
      best_size = size;
      for (std::size_t i = 0; i < n; ++i) best[i] = (mask >> i) & 1U;
    }
  }
  return best;
}

struct OracleRecovery {
  std::vector<std::pair<std::uint16_t, TxId>> committed;
  std::map<BlockAddr, Block> home;  // replayed blocks, zero blocks dropped
  bool corrupt = false;             // a member carries two different counts
};

inline bool conflicting_counts(const OracleWindow& w, const std::vector<TxId>& members) {
  std::map<TxId, std::uint16_t> seen;
  auto check = [&](TxId id, std::uint16_t v) {
    if (std::find(members.begin(), members.end(), id) == members.end()) return false;
    auto [it, fresh] = seen.emplace(id, v);
    return !fresh && it->second != v;
  };
  for (const OracleUnit* u : w.units) {
    for (const auto& [tag, data] : u->blocks) {
      if (tag.txcnt != 0 && check(tag.txid, tag.txcnt)) return true;
    }
  }
  if (w.dep != nullptr) {
    for (const CountEntry& c : w.dep->counts) {
      if (check(c.txid, c.txcnt)) return true;
    }
  }
  return false;
}

inline OracleRecovery committed_set(const PersistentImage& img) {
  OracleRecovery res;
  auto& out = res.committed;
  for (const auto& [addr, data] : img.home_blocks()) res.home[addr] = data;
  const auto parsed = read_units(img);
  auto normalize = [&] {
    for (auto it = res.home.begin(); it != res.home.end();) {
      it = it->second == Block{} ? res.home.erase(it) : std::next(it);
    }
  };
  if (!parsed) {
    normalize();
    return res;
  }
  const LogHead& head = parsed->first;
  std::vector<OracleWindow> windows;
  for (const OracleUnit& u : parsed->second) {
    if (windows.empty() || windows.back().wseq != u.wseq || windows.back().dep != nullptr) {
      windows.push_back(OracleWindow{u.wseq, {}, nullptr});
    }
    windows.back().units.push_back(&u);
    if (u.kind == UnitKind::kDep) windows.back().dep = &*u.dep;
  }
  auto seen_order = [](const OracleWindow& w) {
    std::vector<TxId> ids;
    for (const OracleUnit* u : w.units) {
      for (const auto& [tag, data] : u->blocks) {
        if (std::find(ids.begin(), ids.end(), tag.txid) == ids.end()) ids.push_back(tag.txid);
      }
      if (u->commit && std::find(ids.begin(), ids.end(), u->commit->txid) == ids.end()) {
        ids.push_back(u->commit->txid);
      }
    }
    return ids;
  };
  bool stopped = false;
  std::optional<TxId> anchor;
  if (head.anchored_windows) anchor = head.anchor_txid;
  for (std::size_t wi = 0; wi < windows.size() && !stopped; ++wi) {
    const OracleWindow& w = windows[wi];
    const bool closed = w.dep != nullptr || wi + 1 < windows.size();
    std::vector<TxId> members;
    std::vector<bool> aborted;
    std::vector<bool> in;
    bool skip_allowed = false;
    if (head.commit_record_rule) {
      members = seen_order(w);
      aborted.assign(members.size(), false);
      in.assign(members.size(), false);
      for (std::size_t i = 0; i < members.size(); ++i) {
        for (const OracleUnit* u : w.units) {
          if (u->commit && u->commit->txid == members[i]) in[i] = true;
        }
      }
      skip_allowed = closed;
    } else if (w.dep != nullptr) {
      for (std::size_t i = 0; i < w.dep->member_count; ++i) {
        members.push_back(static_cast<TxId>(w.dep->first_txid + i));
        aborted.push_back(w.dep->is_aborted(i));
      }
      in = best_subset(w, members, aborted, false);
    } else if (head.anchored_windows && !closed) {
      if (anchor) {
        for (TxId id = *anchor;; ++id) {
          bool has = false;
          for (const OracleUnit* u : w.units) {
            for (const auto& [tag, data] : u->blocks) has = has || tag.txid == id;
          }
          if (!has || members.size() >= kValidTxIds) break;
          members.push_back(id);
        }
      }
      aborted.assign(members.size(), false);
      in = best_subset(w, members, aborted, false);
    } else {
      members = seen_order(w);
      aborted.assign(members.size(), false);
      in = best_subset(w, members, aborted, closed);
      skip_allowed = closed;
    }
    if (conflicting_counts(w, members)) {
      res.corrupt = true;
      return res;
    }
    anchor.reset();
    if (w.dep != nullptr) anchor = static_cast<TxId>(w.dep->first_txid + w.dep->member_count);
    for (std::size_t i = 0; i < members.size() && !stopped; ++i) {
      if (aborted[i]) continue;
      if (in[i]) {
        out.emplace_back(w.wseq, members[i]);
        for (const OracleUnit* u : w.units) {
          for (const auto& [tag, data] : u->blocks) {
            if (tag.txid == members[i]) res.home[tag.addr] = data;
          }
        }
      } else if (!skip_allowed) {
        stopped = true;
      }
    }
  }
  normalize();
  return res;
}

// --- randomized log images -------------------------------------------------------

struct ImageBuilder {
  PersistentImage img;
  std::uint32_t units;
  std::uint32_t unit;
  std::uint64_t sid;

  ImageBuilder(std::uint32_t n_units, std::uint32_t start_unit, std::uint64_t start_sid)
      : img(kLogBodyOffset + static_cast<std::uint64_t>(n_units) * kUnitBlocks),
        units(n_units),
        unit(start_unit),
        sid(start_sid) {}

  std::uint32_t put_group(std::uint16_t wseq, const std::vector<BlkTag>& tags, const std::vector<Block>& data) {
    std::vector<Block> slots(7, Block{});
    for (std::size_t i = 0; i < data.size(); ++i) slots[i] = data[i];
    for (std::size_t i = 0; i < tags.size(); ++i) img.set_log(unit_block_index(unit, i), slots[i]);
    img.set_log(unit_block_index(unit, 7), encode_meta_block(sid, wseq, tags, slots));
    return advance();
  }
  std::vector<std::uint32_t> put_dep(const DepRecord& rec) {
    std::vector<std::uint32_t> at;
    for (const DepUnit& u : encode_dep_record(rec, sid)) {
      for (std::size_t i = 0; i < u.payload.size(); ++i) img.set_log(unit_block_index(unit, i), u.payload[i]);
      img.set_log(unit_block_index(unit, 7), u.header);
      at.push_back(advance());
    }
    return at;
  }
  std::uint32_t put_commit(std::uint16_t wseq, TxId txid, std::uint16_t txcnt) {
    img.set_log(unit_block_index(unit, 7), encode_commit_record(CommitRecord{sid, wseq, txid, txcnt}));
    return advance();
  }
  std::uint32_t advance() {
    const std::uint32_t u = unit;
    unit = (unit + 1) % units;
    ++sid;
    return u;
  }
};

enum class ImageMode { kCount, kAnchored, kCommitRecord };

/// A log image of several windows, then damaged: dropped blocks, dropped
/// tags, dropped dependency records, perturbed counts.
inline PersistentImage random_log_image(std::uint64_t seed, ImageMode* mode_out = nullptr) {
  std::mt19937_64 g(seed);
  auto coin = [&](double p) { return static_cast<double>(g() % 1000000) < p * 1000000.0; };
  const ImageMode mode = static_cast<ImageMode>(g() % 3);
  if (mode_out != nullptr) *mode_out = mode;
  const std::uint32_t n_units = 160;
  ImageBuilder b(n_units, static_cast<std::uint32_t>(g() % n_units), 1 + g() % 5000);
  LogHead head;
  head.commit_record_rule = mode == ImageMode::kCommitRecord;
  head.anchored_windows = mode == ImageMode::kAnchored;
  head.unit_count = n_units;
  head.start_unit = b.unit;
  head.start_sid = b.sid;
  head.start_window_seq = static_cast<std::uint16_t>(g() % 4096);
  head.anchor_txid = static_cast<TxId>(g());
  head.end_unit = head.start_unit;
  b.img.set_log(0, encode_log_head(head));

  std::uint16_t wseq = head.start_window_seq;
  TxId next_txid = head.anchor_txid;
  const std::size_t n_windows = 1 + g() % 5;
  std::vector<std::uint32_t> data_units;
  std::vector<std::uint32_t> dep_units;
  for (std::size_t wi = 0; wi < n_windows; ++wi) {
    const std::size_t m = mode == ImageMode::kAnchored ? 1 + g() % 6 : 1 + g() % (mode == ImageMode::kCount ? 3 : 1);
    const TxId first = next_txid;
    next_txid = static_cast<TxId>(next_txid + m);
    const bool last = wi + 1 == n_windows;
    const bool with_record = mode == ImageMode::kAnchored && (!last || coin(0.6));
    std::vector<bool> aborted(m, false);
    std::vector<std::uint32_t> logged(m, 0);
    std::vector<std::uint32_t> credit(m, 0);
    std::vector<DependencyPair> pairs;
    for (std::size_t i = 0; i < m; ++i) {
      aborted[i] = with_record && coin(0.15);
      logged[i] = static_cast<std::uint32_t>(g() % 5);
    }
    if (with_record) {
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t c = a + 1; c < m; ++c) {
          if (!aborted[a] && !aborted[c] && coin(0.3)) {
            const std::uint16_t n = static_cast<std::uint16_t>(1 + g() % 3);
            pairs.push_back(DependencyPair{static_cast<TxId>(first + a), static_cast<TxId>(first + c), n});
            credit[a] += n;
          }
        }
      }
    }
    // Each live member's blocks; the count rides on its last block or a
    // CountEntry. Some counts are perturbed.
    std::vector<std::pair<BlkTag, Block>> blocks;
    DepRecord rec;
    rec.window_seq = wseq;
    rec.first_txid = first;
    rec.member_count = static_cast<std::uint8_t>(m);
    std::vector<std::pair<TxId, std::uint16_t>> commits;
    for (std::size_t i = 0; i < m; ++i) {
      const TxId id = static_cast<TxId>(first + i);
      if (aborted[i]) rec.set_aborted(i);
      std::uint32_t cnt = logged[i] + credit[i];
      if (coin(0.1)) cnt = cnt + 1;
      const bool tag_carrier = !aborted[i] && logged[i] > 0 && (!with_record || coin(0.5)) &&
                               mode != ImageMode::kCommitRecord;
      for (std::uint32_t k = 0; k < logged[i]; ++k) {
        BlkTag t;
        t.cid = static_cast<std::uint8_t>(g() % 8);
        t.txid = id;
        t.addr = static_cast<BlockAddr>(1 + g() % 64);
        t.txcnt = (tag_carrier && k + 1 == logged[i]) ? static_cast<std::uint16_t>(cnt) : 0;
        blocks.emplace_back(t, random_block(g));
      }
      if (!aborted[i] && !tag_carrier && with_record) rec.counts.push_back(CountEntry{id, static_cast<std::uint16_t>(cnt)});
      if (mode == ImageMode::kCommitRecord && coin(0.7)) commits.emplace_back(id, static_cast<std::uint16_t>(cnt));
    }
    rec.pairs = pairs;
    if (mode == ImageMode::kAnchored) std::shuffle(blocks.begin(), blocks.end(), g);
    for (std::size_t at = 0; at < blocks.size();) {
      const std::size_t take = std::min<std::size_t>(blocks.size() - at, 1 + g() % 7);
      std::vector<BlkTag> tags;
      std::vector<Block> data;
      for (std::size_t k = 0; k < take; ++k) {
        tags.push_back(blocks[at + k].first);
        data.push_back(blocks[at + k].second);
      }
      data_units.push_back(b.put_group(wseq, tags, data));
      at += take;
    }
    for (const auto& [id, cnt] : commits) b.put_commit(wseq, id, cnt);
    if (with_record) {
      for (std::uint32_t u : b.put_dep(rec)) dep_units.push_back(u);
    }
    wseq = static_cast<std::uint16_t>((wseq + 1) & kWindowSeqMask);
  }

  // Damage.
  if (!data_units.empty() && coin(0.3)) {
    // A data block that never persisted: the group is torn.
    const std::uint32_t u = data_units[g() % data_units.size()];
    b.img.set_log(unit_block_index(u, g() % 7), random_block(g));
  }
  if (!data_units.empty() && coin(0.3)) {
    // A block that was never logged: the group is intact without it.
    const std::uint32_t u = data_units[g() % data_units.size()];
    const UnitHeader h = parse_unit_header(b.img.log(unit_block_index(u, 7)));
    std::vector<BlkTag> tags;
    std::vector<Block> data;
    for (std::size_t i = 0; i < 7; ++i) {
      tags.push_back(decode_blk_tag(h.words[i]));
      data.push_back(b.img.log(unit_block_index(u, i)));
    }
    std::vector<std::size_t> used;
    for (std::size_t i = 0; i < 7; ++i) {
      if (!tags[i].empty()) used.push_back(i);
    }
    if (used.size() > 1) {
      const std::size_t drop = used[g() % used.size()];
      tags[drop] = BlkTag{};
      data[drop] = Block{};
      b.img.set_log(unit_block_index(u, drop), Block{});
      b.img.set_log(unit_block_index(u, 7), encode_meta_block(h.sid, h.window_seq, tags, data));
    }
  }
  if (!dep_units.empty() && coin(0.3)) {
    // A dependency record that never persisted.
    const std::uint32_t u = dep_units[g() % dep_units.size()];
    b.img.set_log(unit_block_index(u, 7), Block{});
  }
  if (coin(0.05)) b.img.set_log(0, random_block(g));
  return b.img;
}

}  // namespace locsim::oracle
