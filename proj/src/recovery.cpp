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

#include "locsim/recovery.hpp"

#include <algorithm>
#include <map>

#include "json.hpp"
#include "locsim/error.hpp"

namespace locsim {

namespace {

bool tag_used(const BlkTag& t) { return !t.empty(); }

struct ScanState {
  LogScan* scan;
  std::vector<ScannedUnit> dep_run;

  void push(ScannedUnit u) {
    auto& ws = scan->windows;
    if (ws.empty() || ws.back().window_seq != u.window_seq || ws.back().dep) {
      ws.emplace_back();
      ws.back().window_seq = u.window_seq;
    }
    ws.back().units.push_back(std::move(u));
  }
};

}  // namespace

LogScan scan_valid_log(const PersistentImage& image) {
  LogScan scan;
  const std::optional<LogHead> head = decode_log_head(image.log(0));
  const std::uint32_t units = image.log_units();
  if (!head) {
    scan.stop_reason = "invalid log head";
    return scan;
  }
  if (head->unit_count != units || units == 0 || head->start_unit >= units) {
    scan.stop_reason = "log head does not match the log area";
    return scan;
  }
  scan.head_valid = true;
  scan.head = *head;

  ScanState st{&scan, {}};
  std::uint32_t unit = head->start_unit;
  std::uint64_t sid = head->start_sid;
  // Units of an unfinished dependency record are held back; if scanning
  // stops inside one, the record is treated as absent.
  std::uint32_t run_unit = 0;
  std::uint64_t run_sid = 0;
  std::uint32_t n = 0;
  for (; n < units; ++n) {
    const Block& hb = image.log(unit_block_index(unit, kHeaderSlot));
    const UnitHeader uh = parse_unit_header(hb);
    if (uh.kind == UnitKind::kInvalid) {
      scan.stop_reason = "invalid unit kind";
      break;
    }
    if (uh.sid != sid) {
      scan.stop_reason = "sid mismatch";
      break;
    }
    ScannedUnit su;
    su.unit = unit;
    su.sid = sid;
    su.kind = uh.kind;
    su.window_seq = uh.window_seq;
    if (uh.kind == UnitKind::kGroup) {
      su.data.reserve(kGroupDataSlots);
      for (std::size_t i = 0; i < kGroupDataSlots; ++i) {
        su.data.push_back(image.log(unit_block_index(unit, i)));
      }
      const MetaDecode md = decode_meta_block(hb, su.data);
      if (md.status != DecodeStatus::kOk) {
        scan.stop_reason = "torn group";
        break;
      }
      su.meta = md.meta;
    } else if (uh.kind == UnitKind::kCommit) {
      su.commit = decode_commit_record(hb);
      if (!su.commit) {
        scan.stop_reason = "bad commit record";
        break;
      }
    } else {
      const DepUnitInfo info = parse_dep_unit_info(uh);
      if (info.payload_blocks > kGroupDataSlots || info.unit_count == 0 ||
          info.unit_index >= info.unit_count) {
        scan.stop_reason = "bad dependency record unit";
        break;
      }
      if (info.unit_index == 0) {
        st.dep_run.clear();
        run_unit = unit;
        run_sid = sid;
      } else if (st.dep_run.size() != info.unit_index ||
                 st.dep_run.front().window_seq != uh.window_seq) {
        scan.stop_reason = "bad dependency record unit";
        break;
      }
      for (std::size_t i = 0; i < info.payload_blocks; ++i) {
        su.dep.payload.push_back(image.log(unit_block_index(unit, i)));
      }
      su.dep.header = hb;
      st.dep_run.push_back(std::move(su));
      if (info.unit_index + 1 == info.unit_count) {
        std::vector<DepUnit> parts;
        for (const ScannedUnit& u : st.dep_run) parts.push_back(u.dep);
        std::optional<DepRecord> rec = decode_dep_record(parts);
        if (!rec) {
          scan.stop_reason = "bad dependency record";
          unit = run_unit;
          sid = run_sid;
          st.dep_run.clear();
          break;
        }
        for (ScannedUnit& u : st.dep_run) st.push(std::move(u));
        st.dep_run.clear();
        scan.windows.back().dep = std::move(rec);
      }
      unit = (unit + 1) % units;
      ++sid;
      continue;
    }
    if (!st.dep_run.empty()) {
      scan.stop_reason = "incomplete dependency record";
      unit = run_unit;
      sid = run_sid;
      st.dep_run.clear();
      break;
    }
    st.push(std::move(su));
    unit = (unit + 1) % units;
    ++sid;
  }
  if (!st.dep_run.empty()) {
    unit = run_unit;
    sid = run_sid;
    if (scan.stop_reason.empty()) scan.stop_reason = "incomplete dependency record";
  }
  if (n == units && scan.stop_reason.empty()) scan.stop_reason = "log wrapped";
  scan.stop_unit = unit;
  scan.stop_sid = sid;
  std::uint32_t accepted = 0;
  for (std::size_t i = 0; i < scan.windows.size(); ++i) {
    accepted += static_cast<std::uint32_t>(scan.windows[i].units.size());
    scan.windows[i].closed = scan.windows[i].dep.has_value() || i + 1 < scan.windows.size();
  }
  scan.units_scanned = accepted;
  return scan;
}

std::vector<TxCountStatus> count_commit_status(const ScannedWindow& window,
                                               const std::vector<TxId>& members) {
  std::map<TxId, std::size_t> index;
  std::vector<TxCountStatus> out(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    out[i].txid = members[i];
    index.emplace(members[i], i);
  }
  auto set_txcnt = [&](TxCountStatus& s, std::uint16_t v) {
    if (s.txcnt && *s.txcnt != v) {
      throw Error(ErrorCode::kCorruptLog,
                  "conflicting txcnt for txid " + std::to_string(s.txid));
    }
    s.txcnt = v;
  };
  for (const ScannedUnit& u : window.units) {
    if (u.kind != UnitKind::kGroup) continue;
    for (const BlkTag& t : u.meta.tags) {
      if (!tag_used(t)) continue;
      auto it = index.find(t.txid);
      if (it == index.end()) continue;
      TxCountStatus& s = out[it->second];
      ++s.logged;
      if (t.txcnt != 0) set_txcnt(s, t.txcnt);
    }
  }
  if (window.dep) {
    for (const CountEntry& c : window.dep->counts) {
      auto it = index.find(c.txid);
      if (it != index.end()) set_txcnt(out[it->second], c.txcnt);
    }
  }
  for (TxCountStatus& s : out) {
    s.effective = s.logged;
    s.committed = s.txcnt && s.logged == *s.txcnt;
  }
  return out;
}

void apply_dependency_pairs(const ScannedWindow& window, std::vector<TxCountStatus>& status,
                            std::vector<std::string>* diagnostics) {
  std::map<TxId, std::size_t> index;
  for (std::size_t i = 0; i < status.size(); ++i) index.emplace(status[i].txid, i);
  std::vector<DependencyPair> pairs;
  if (window.dep) {
    for (const DependencyPair& p : window.dep->pairs) {
      if (!index.count(p.tx_a) || !index.count(p.tx_b)) {
        if (diagnostics != nullptr) {
          diagnostics->push_back("window " + std::to_string(window.window_seq) +
                                 ": pair references unknown txid");
        }
        continue;
      }
      pairs.push_back(p);
    }
  }
  // Test prefixes from the full member list downward; the first one whose
  // every live member reconciles is the committed set.
  std::vector<std::uint32_t> credit(status.size());
  std::size_t m = status.size();
  for (;; --m) {
    std::fill(credit.begin(), credit.end(), 0);
    for (const DependencyPair& p : pairs) {
      const std::size_t a = index[p.tx_a];
      const std::size_t b = index[p.tx_b];
      if (b < m && !status[b].aborted) credit[a] += p.n;
    }
    bool ok = true;
    for (std::size_t i = 0; i < m && ok; ++i) {
      const TxCountStatus& s = status[i];
      if (s.aborted) continue;
      ok = s.txcnt && s.logged + credit[i] == *s.txcnt;
    }
    if (ok || m == 0) break;
  }
  for (std::size_t i = 0; i < status.size(); ++i) {
    status[i].effective = status[i].logged + credit[i];
    status[i].committed = i < m && !status[i].aborted;
  }
}

namespace {

std::vector<TxId> tags_in_order(const ScannedWindow& w) {
  std::vector<TxId> out;
  auto add = [&](TxId id) {
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  };
  for (const ScannedUnit& u : w.units) {
    if (u.kind == UnitKind::kGroup) {
      for (const BlkTag& t : u.meta.tags) {
        if (tag_used(t)) add(t.txid);
      }
    } else if (u.kind == UnitKind::kCommit) {
      add(u.commit->txid);
    }
  }
  return out;
}

bool has_tags(const ScannedWindow& w, TxId id) {
  for (const ScannedUnit& u : w.units) {
    if (u.kind != UnitKind::kGroup) continue;
    for (const BlkTag& t : u.meta.tags) {
      if (tag_used(t) && t.txid == id) return true;
    }
  }
  return false;
}

}  // namespace

RecoveryReport enforce_in_order_and_replay(const LogScan& scan, PersistentImage& image) {
  RecoveryReport rep;
  rep.head_valid = scan.head_valid;
  rep.head = scan.head;
  rep.units_scanned = scan.units_scanned;
  rep.torn_unit = scan.stop_unit;
  rep.stop_reason = scan.stop_reason;
  if (!scan.head_valid) return rep;

  const LogHead& head = scan.head;
  bool stopped = false;
  std::optional<TxId> anchor;
  if (head.anchored_windows) anchor = head.anchor_txid;

  for (const ScannedWindow& w : scan.windows) {
    std::vector<TxCountStatus> st;
    if (head.commit_record_rule) {
      st = count_commit_status(w, tags_in_order(w));
      for (TxCountStatus& s : st) {
        s.committed = false;
        for (const ScannedUnit& u : w.units) {
          if (u.kind == UnitKind::kCommit && u.commit->txid == s.txid) {
            s.committed = true;
            s.txcnt = u.commit->txcnt;
          }
        }
      }
    } else if (w.dep) {
      std::vector<TxId> members;
      for (std::size_t i = 0; i < w.dep->member_count; ++i) {
        members.push_back(static_cast<TxId>(w.dep->first_txid + i));
      }
      st = count_commit_status(w, members);
      for (std::size_t i = 0; i < st.size(); ++i) st[i].aborted = w.dep->is_aborted(i);
      for (TxId id : tags_in_order(w)) {
        if (txid_offset(id, w.dep->first_txid) >= members.size()) {
          rep.diagnostics.push_back("window " + std::to_string(w.window_seq) +
                                    ": tag from non-member txid " + std::to_string(id));
        }
      }
      apply_dependency_pairs(w, st, &rep.diagnostics);
    } else if (head.anchored_windows && !w.closed) {
      std::vector<TxId> members;
      if (anchor) {
        for (std::size_t i = 0; i < kValidTxIds; ++i) {
          const TxId id = static_cast<TxId>(*anchor + i);
          if (!has_tags(w, id)) break;
          members.push_back(id);
        }
      }
      st = count_commit_status(w, members);
      apply_dependency_pairs(w, st, &rep.diagnostics);
    } else {
      st = count_commit_status(w, tags_in_order(w));
      if (!w.closed) apply_dependency_pairs(w, st, &rep.diagnostics);
    }
    anchor.reset();
    if (w.dep) anchor = static_cast<TxId>(w.dep->first_txid + w.dep->member_count);

    for (const TxCountStatus& s : st) {
      const RecoveredTx tx{w.window_seq, s.txid};
      if (stopped || s.aborted) {
        rep.discarded.push_back(tx);
      } else if (s.committed) {
        rep.committed.push_back(tx);
        for (const ScannedUnit& u : w.units) {
          if (u.kind != UnitKind::kGroup) continue;
          for (std::size_t i = 0; i < kGroupDataSlots; ++i) {
            const BlkTag& t = u.meta.tags[i];
            if (!tag_used(t) || t.txid != s.txid) continue;
            image.set_home(t.addr, u.data[i]);
            ++rep.replayed_blocks;
          }
        }
      } else if (w.closed && !w.dep) {
        rep.discarded.push_back(tx);
      } else {
        rep.discarded.push_back(tx);
        stopped = true;
      }
    }
    WindowDiagnostics d;
    d.window_seq = w.window_seq;
    d.units = w.units.size();
    d.has_dep_record = w.dep.has_value();
    d.closed = w.closed;
    d.members = std::move(st);
    rep.windows.push_back(std::move(d));
  }
  return rep;
}

RecoveryReport recover(PersistentImage& image) {
  const LogScan scan = scan_valid_log(image);
  return enforce_in_order_and_replay(scan, image);
}

std::string RecoveryReport::to_json() const {
  nlohmann::json j;
  j["head_valid"] = head_valid;
  j["start_unit"] = head.start_unit;
  j["start_sid"] = head.start_sid;
  j["units_scanned"] = units_scanned;
  j["torn_unit"] = torn_unit;
  j["stop_reason"] = stop_reason;
  j["replayed_blocks"] = replayed_blocks;
  auto txs = [](const std::vector<RecoveredTx>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const RecoveredTx& t : v) a.push_back({{"window_seq", t.window_seq}, {"txid", t.txid}});
    return a;
  };
  j["committed"] = txs(committed);
  j["discarded"] = txs(discarded);
  nlohmann::json ws = nlohmann::json::array();
  for (const WindowDiagnostics& w : windows) {
    nlohmann::json m = nlohmann::json::array();
    for (const TxCountStatus& s : w.members) {
      m.push_back({{"txid", s.txid},
                   {"aborted", s.aborted},
                   {"logged", s.logged},
                   {"txcnt", s.txcnt ? nlohmann::json(*s.txcnt) : nlohmann::json(nullptr)},
                   {"effective", s.effective},
                   {"committed", s.committed}});
    }
    ws.push_back({{"window_seq", w.window_seq},
                  {"units", w.units},
                  {"dep_record", w.has_dep_record},
                  {"closed", w.closed},
                  {"members", m}});
  }
  j["windows"] = ws;
  j["diagnostics"] = diagnostics;
  return j.dump();
}

}  // namespace locsim
