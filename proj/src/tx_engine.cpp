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

#include "locsim/tx_engine.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "locsim/error.hpp"

namespace locsim {

namespace {

LogHead head_flags(ProtocolMode mode) {
  LogHead h;
  h.commit_record_rule = uses_commit_records(mode);
  h.anchored_windows = mode == ProtocolMode::kLOCWAL;
  return h;
}

}  // namespace

const char* tx_state_name(TxState s) {
  switch (s) {
    case TxState::kInvalid:
      return "invalid";
    case TxState::kActive:
      return "active";
    case TxState::kCommitted:
      return "committed";
    case TxState::kAborted:
      return "aborted";
  }
  return "?";
}

void EngineConfig::validate() const {
  if (sd < 1 || sd > kValidTxIds) throw Error(ErrorCode::kInvalidConfig, "sd must be in [1, 128]");
  cache.validate();
  memory.validate();
}

std::uint64_t TxStateEntry::pack() const {
  return (static_cast<std::uint64_t>(cid & 0x7)) | (static_cast<std::uint64_t>(tid & 0x1) << 3) |
         (static_cast<std::uint64_t>(txid) << 4) | (static_cast<std::uint64_t>(txcnt) << 12) |
         (static_cast<std::uint64_t>(state) << 28) | (static_cast<std::uint64_t>(phase) << 30) |
         (static_cast<std::uint64_t>(wrts) << 32);
}

TxStateEntry TxStateEntry::unpack(std::uint64_t bits) {
  TxStateEntry e;
  e.cid = bits & 0x7;
  e.tid = (bits >> 3) & 0x1;
  e.txid = static_cast<TxId>((bits >> 4) & 0xff);
  e.txcnt = static_cast<std::uint16_t>((bits >> 12) & 0xffff);
  e.state = static_cast<TxState>((bits >> 28) & 0x3);
  e.phase = static_cast<TxPhase>((bits >> 30) & 0x3);
  e.wrts = static_cast<std::uint16_t>((bits >> 32) & 0xffff);
  return e;
}

TxEngine::TxEngine(const EngineConfig& config, PersistentImage initial)
    : config_((config.validate(), config)),
      ctrl_(config.memory, std::move(initial), head_flags(config.mode), config.keep_records),
      cache_(config.cache, config.memory.latency, *this, *this) {
  ctrl_.set_completion_hook([this](const PersistRecord& r, std::uint64_t order) { on_completion(r, order); });
  ctrl_.set_group_hook([this](PersistId meta, const std::vector<std::uint64_t>& owners) {
    group_owners_[meta] = owners;
  });
  ctrl_.set_log_full_hook([this](std::uint32_t n) { make_log_space(n); });
}

// --- bookkeeping --------------------------------------------------------------

TxEngine::TxRec* TxEngine::rec(std::uint64_t seq) {
  auto it = live_.find(seq);
  return it == live_.end() ? nullptr : &it->second;
}

TxEngine::TxRec& TxEngine::active_rec(const TxHandle& h) {
  TxRec* r = rec(h.seq);
  if (r == nullptr || r->e.state != TxState::kActive) {
    throw Error(ErrorCode::kInactiveTx, "transaction " + std::to_string(h.seq) + " is not active");
  }
  return *r;
}

SpeculationWindow& TxEngine::win(std::uint64_t id) {
  for (auto it = windows_.rbegin(); it != windows_.rend(); ++it) {
    if (it->id == id) return *it;
  }
  throw std::logic_error("unknown window " + std::to_string(id));
}

const SpeculationWindow* TxEngine::window(std::uint64_t id) const {
  for (const SpeculationWindow& w : windows_) {
    if (w.id == id) return &w;
  }
  return nullptr;
}

TxContext TxEngine::ctx(const TxRec& r) const {
  TxContext c;
  c.seq = r.seq;
  c.txid = r.e.txid;
  c.cid = r.e.cid;
  c.tid = r.e.tid;
  return c;
}

std::size_t TxEngine::live_count() const {
  return static_cast<std::size_t>(
      std::count_if(live_.begin(), live_.end(), [](const auto& kv) { return !kv.second.freeable; }));
}

std::optional<TxStateEntry> TxEngine::entry(std::uint64_t seq) const {
  auto it = live_.find(seq);
  if (it == live_.end() || it->second.freeable) return std::nullopt;
  return it->second.e;
}

bool TxEngine::is_committed(std::uint64_t seq) const {
  return seq < history_.size() && history_[seq].state == TxState::kCommitted;
}

void TxEngine::note(const char* kind, std::uint64_t seq, std::uint64_t value) {
  if (config_.keep_events) events_.push_back(EngineEvent{ctrl_.now(), kind, seq, value});
}

void TxEngine::charge(std::uint32_t latency) {
  stats_.access_cycles += latency;
  ctrl_.tick(latency);
}

void TxEngine::compute(std::uint64_t cycles) {
  stats_.compute_cycles += cycles;
  ctrl_.tick(cycles);
}

void TxEngine::stall(std::uint64_t StallCycles::*bucket, PersistId until) {
  const std::uint64_t waited = ctrl_.wait_for(until);
  stats_.stalls.*bucket += waited;
  if (waited > 0) note("stall", 0, waited);
}

void TxEngine::collect() {
  for (auto it = live_.begin(); it != live_.end();) {
    if (it->second.freeable) {
      it = live_.erase(it);
    } else {
      ++it;
    }
  }
}

// --- memory side ----------------------------------------------------------------

Block TxEngine::load_home(BlockAddr addr) {
  auto it = home_view_.find(addr);
  return it != home_view_.end() ? it->second : ctrl_.initial_image().home(addr);
}

void TxEngine::home_write(BlockAddr addr, const Block& data, std::uint64_t ord) {
  if (ord != 0) {
    auto it = home_issued_ord_.find(addr);
    if (it != home_issued_ord_.end() && it->second >= ord) return;
    home_issued_ord_[addr] = ord;
  }
  home_view_[addr] = data;
  const PersistId id = ctrl_.issue_home(addr, data, ctrl_.now());
  home_inflight_[id] = {addr, ord};
}

EvictAction TxEngine::on_evict(VersionedCacheLine& line, bool /*version_overflow*/) {
  if (!line.transactional()) {
    if (line.dirty) home_write(line.home_addr, line.data, 0);
    return EvictAction::kDrop;
  }
  const bool shadow = line.home_addr >= kShadowBase;
  if (line.tx_dirty) {
    TxRec* r = rec(line.owner);
    if (r == nullptr) throw std::logic_error("tx-dirty line without a live owner");
    if (swal()) {
      if (!shadow) return EvictAction::kStage;
      line.tx_dirty = false;
      log_tx_block(*r, line.home_addr & ~kShadowBase, line.data, false);
      return EvictAction::kDrop;
    }
    const bool final = config_.mode != ProtocolMode::kHWAL && r->e.state == TxState::kCommitted &&
                       r->dirty_lines == 1;
    line.tx_dirty = false;
    log_tx_block(*r, line.home_addr, line.data, final);
  }
  if (shadow || !line.dirty) return EvictAction::kDrop;
  if (history_[line.owner].durable) {
    home_write(line.home_addr, line.data, line.version_ord);
    return EvictAction::kDrop;
  }
  return EvictAction::kStage;
}

void TxEngine::log_tx_block(TxRec& r, BlockAddr addr, const Block& data, bool final) {
  if (config_.mode == ProtocolMode::kECWAL && !r.gate_passed) {
    // First persist of this tx waits for everything logged before it.
    const std::uint64_t before = stats_.stalls.inter_tx;
    stall(&StallCycles::inter_tx, ctrl_.log_frontier());
    if (stats_.stalls.inter_tx != before) ++stats_.inter_tx_stall_events;
  }
  r.gate_passed = true;
  BlkTag tag;
  tag.cid = r.e.cid;
  tag.tid = r.e.tid;
  tag.txid = r.e.txid;
  tag.txcnt = final ? r.e.txcnt : 0;
  tag.addr = addr;
  ctrl_.log_block(tag, data, r.seq);
  ++r.logged;
  --r.dirty_lines;
  r.last_logged = addr;
  if (final) r.carrier = true;
  ++stats_.logged_blocks;
}

void TxEngine::log_dirty_lines(TxRec& r, bool allow_final,
                               std::optional<std::unordered_set<BlockAddr>> only) {
  for (BlockAddr addr : r.write_order) {
    if (only && only->count(addr) == 0) continue;
    VersionedCacheLine* line = cache_.find(swal() ? shadow_addr(addr) : addr, r.seq);
    if (line == nullptr || !line->tx_dirty) continue;
    line->tx_dirty = false;
    if (swal()) line->dirty = false;
    const Block data = line->data;
    log_tx_block(r, addr, data, allow_final && r.dirty_lines == 1);
  }
}

// --- completions and durability ------------------------------------------------

void TxEngine::on_completion(const PersistRecord& record, std::uint64_t /*order*/) {
  if (record.kind == PersistKind::kMeta) {
    auto it = group_owners_.find(record.id);
    if (it != group_owners_.end()) {
      for (std::uint64_t seq : it->second) {
        TxRec* r = rec(seq);
        if (r != nullptr && r->e.state != TxState::kAborted) ++r->e.wrts;
      }
      group_owners_.erase(it);
    }
  } else if (record.kind == PersistKind::kCheckpoint) {
    auto it = home_inflight_.find(record.id);
    if (it != home_inflight_.end()) {
      auto& done = home_done_ord_[it->second.first];
      done = std::max(done, it->second.second);
      home_inflight_.erase(it);
    }
  }
  advance_durable();
}

void TxEngine::advance_durable() {
  while (next_durable_seq_ < next_seq_) {
    TxSummary& s = history_[next_durable_seq_];
    if (s.state == TxState::kActive) break;
    if (s.state == TxState::kCommitted && !s.durable) {
      TxRec* r = rec(s.seq);
      if (r->key_required && (r->key == kNoPersist || !ctrl_.completed(r->key))) break;
      on_durable(*r, s);
    }
    ++next_durable_seq_;
  }
  while (first_pending_window_ < windows_.size()) {
    SpeculationWindow& w = windows_[first_pending_window_];
    if (!w.closed || !ctrl_.completed(w.key)) break;
    bool ready = true;
    for (std::uint64_t m : w.members) {
      const TxSummary& s = history_[m];
      if (s.state == TxState::kActive || (s.state == TxState::kCommitted && !s.durable)) ready = false;
    }
    if (!ready) break;
    w.durable = true;
    for (std::uint64_t m : w.members) {
      if (history_[m].state != TxState::kCommitted) continue;
      for (BlockAddr a : final_write_set_[m]) {
        auto& f = w.final_writes[a];
        f = std::max(f, m);
      }
      final_write_set_.erase(m);
    }
    ++first_pending_window_;
  }
}

void TxEngine::on_durable(TxRec& r, TxSummary& s) {
  s.durable = true;
  s.ack_order = ctrl_.completion_order().size();
  last_committed_ = r.e.txid;
  r.e.wrts = static_cast<std::uint16_t>(r.e.wrts + r.skipped);
  if (r.e.wrts != r.e.txcnt) ++stats_.phase_mismatches;
  r.e.phase = TxPhase::kInPlaceWrite;
  for (BlockAddr addr : r.write_order) {
    if (cache_.is_resident(addr, r.seq)) continue;
    VersionedCacheLine* line = cache_.find(addr, r.seq);
    if (line == nullptr) continue;
    if (line->dirty && !line->tx_dirty) home_write(addr, line->data, line->version_ord);
    cache_.unstage(addr, r.seq);
  }
  r.e.phase = TxPhase::kComplete;
  r.freeable = true;
  note("durable", r.seq, s.ack_order);
}

// --- settle / coalescing ----------------------------------------------------------

void TxEngine::add_pair(SpeculationWindow& w, std::uint64_t a, std::uint64_t b) {
  const auto key = std::make_pair(a, b);
  auto it = w.pair_index.find(key);
  if (it == w.pair_index.end()) {
    w.pair_index.emplace(key, w.pairs.size());
    w.pairs.push_back(DependencyPair{static_cast<TxId>(a & 0xff), static_cast<TxId>(b & 0xff), 1});
    ++stats_.dependency_pairs;
  } else {
    ++w.pairs[it->second].n;
  }
}

void TxEngine::settle(TxRec& r) {
  auto on_removed = [&](const VersionedCacheLine& line) {
    if (!line.transactional() || line.owner == r.seq) return;
    if (!line.tx_dirty) {
      if (line.dirty && line.home_addr < kShadowBase) {
        Superseded& sup = superseded_[line.home_addr];
        if (line.version_ord > sup.ord) sup = Superseded{line.version_ord, line.owner, line.data};
      }
      return;
    }
    TxRec* o = rec(line.owner);
    if (o == nullptr || o->window != r.window) {
      throw std::logic_error("unlogged version outside the settling window");
    }
    --o->dirty_lines;
    ++o->skipped;
    ++stats_.skipped_blocks;
    add_pair(win(r.window), o->seq, r.seq);
  };
  for (BlockAddr addr : r.write_order) {
    cache_.reclaim_versions(addr, r.seq, on_removed);
    if (swal()) cache_.reclaim_versions(shadow_addr(addr), r.seq);
  }
}

void TxEngine::seal_if_needed(SpeculationWindow& w) {
  const std::size_t m = w.members.size();
  if (!dep_record_fits(w.pairs.size() + m + (m + 1))) w.sealed = true;
}

void TxEngine::close_window(SpeculationWindow& w) {
  if (w.closed) return;
  for (std::uint64_t m : w.members) {
    if (history_[m].state == TxState::kActive) {
      throw Error(ErrorCode::kWindowBusy, "window has an active member");
    }
  }
  for (std::uint64_t m : w.members) {
    TxRec* r = rec(m);
    if (r != nullptr && r->e.state == TxState::kCommitted) log_dirty_lines(*r, true);
  }
  ctrl_.flush_group();
  DepRecord record;
  record.first_txid = w.first_txid;
  record.member_count = static_cast<std::uint8_t>(w.members.size());
  for (std::size_t i = 0; i < w.members.size(); ++i) {
    TxRec* r = rec(w.members[i]);
    if (r->e.state == TxState::kAborted) {
      record.set_aborted(i);
    } else if (!r->carrier) {
      record.counts.push_back(CountEntry{r->e.txid, r->e.txcnt});
    }
  }
  record.pairs = w.pairs;
  ctrl_.write_dep_record(record);
  w.key = ctrl_.log_frontier();
  w.closed = true;
  ++stats_.windows_closed;
  const auto wseq = ctrl_.current_window_seq();
  for (std::uint64_t m : w.members) {
    TxRec* r = rec(m);
    r->key = w.key;
    history_[m].window_seq = wseq;
    history_[m].logged = r->logged;
    history_[m].skipped = r->skipped;
    if (r->e.state == TxState::kAborted) r->freeable = true;
  }
  note("window_close", w.id, w.members.size());
  stall(&StallCycles::window, w.key);
  advance_durable();
}

// --- log space --------------------------------------------------------------------

void TxEngine::checkpoint_all() {
  std::vector<std::pair<BlockAddr, std::uint64_t>> todo;
  cache_.for_each_line([&](VersionedCacheLine& l) {
    if (!l.dirty || l.tx_dirty || l.home_addr >= kShadowBase) return;
    if (l.transactional() && !history_[l.owner].durable) return;
    todo.emplace_back(l.home_addr, l.owner);
  });
  for (const auto& [addr, owner] : todo) {
    VersionedCacheLine* l = cache_.find(addr, owner);
    if (l == nullptr) continue;
    home_write(addr, l->data, l->transactional() ? l->version_ord : 0);
    l->dirty = false;
    if (!cache_.is_resident(addr, owner)) cache_.unstage(addr, owner);
  }
  for (auto it = superseded_.begin(); it != superseded_.end();) {
    if (!history_[it->second.owner].durable) {
      ++it;
      continue;
    }
    home_write(it->first, it->second.data, it->second.ord);
    it = superseded_.erase(it);
  }
}

void TxEngine::make_log_space(std::uint32_t /*units*/) {
  if (in_log_space_) return;
  in_log_space_ = true;
  const std::uint64_t start = ctrl_.now();
  ctrl_.drain();
  checkpoint_all();
  ctrl_.drain();
  std::size_t k = 0;
  for (; k < windows_.size(); ++k) {
    const SpeculationWindow& w = windows_[k];
    if (!w.durable) break;
    bool met = true;
    for (const auto& [addr, seq] : w.final_writes) {
      auto it = home_done_ord_.find(addr);
      if (it == home_done_ord_.end() || it->second < seq + 1) met = false;
    }
    if (!met) break;
  }
  if (k > 0) {
    std::optional<std::uint64_t> keep;
    for (std::size_t i = k; i < windows_.size() && !keep; ++i) {
      if (ctrl_.window_span(windows_[i].id)) keep = windows_[i].id;
    }
    const TxId anchor =
        k < windows_.size() ? windows_[k].first_txid : static_cast<TxId>(next_seq_ & 0xff);
    const PersistId id = ctrl_.truncate(keep, anchor);
    truncations_.push_back({id, k < windows_.size() ? windows_[k].members.front() : next_seq_});
    ctrl_.wait_for(id);
    windows_.erase(windows_.begin(), windows_.begin() + static_cast<std::ptrdiff_t>(k));
    first_pending_window_ -= std::min(first_pending_window_, k);
    ++stats_.truncations;
  }
  stats_.stalls.log_full += ctrl_.now() - start;
  in_log_space_ = false;
}

// --- public API -------------------------------------------------------------------

TxHandle TxEngine::tx_begin() {
  SpeculationWindow* open = nullptr;
  if (loc() && !windows_.empty() && !windows_.back().closed) open = &windows_.back();
  bool full = false;
  if (open != nullptr) {
    seal_if_needed(*open);
    // Close early when the log is half full so one window always fits.
    if (2 * ctrl_.units_used() >= ctrl_.log_units()) open->sealed = true;
    full = open->sealed || open->members.size() >= config_.sd;
    const bool any_active = std::any_of(open->members.begin(), open->members.end(), [&](std::uint64_t m) {
      return history_[m].state == TxState::kActive;
    });
    if (full && !any_active) {
      close_window(*open);
      open = nullptr;
      full = false;
    }
  }
  collect();
  if (live_count() >= kMaxLiveTx) throw Error(ErrorCode::kTxIdExhausted, "128 transactions are live");
  if (full) throw Error(ErrorCode::kWindowBusy, "speculation window is full of active transactions");
  if (!loc()) {
    for (const auto& [seq, r] : live_) {
      if (r.e.state == TxState::kActive) {
        throw Error(ErrorCode::kWindowBusy, "protocol allows one active transaction");
      }
    }
  }

  TxRec r;
  r.seq = next_seq_++;
  r.e.txid = static_cast<TxId>(r.seq & 0xff);
  r.e.state = TxState::kActive;
  r.e.phase = TxPhase::kLogWrite;
  if (config_.mode != ProtocolMode::kBaseline) {
    if (open == nullptr) {
      SpeculationWindow w;
      w.id = next_window_id_++;
      w.first_txid = r.e.txid;
      windows_.push_back(std::move(w));
      open = &windows_.back();
      ctrl_.begin_log_window(open->id);
    }
    open->members.push_back(r.seq);
    r.window = open->id;
  }
  TxSummary s;
  s.seq = r.seq;
  s.txid = r.e.txid;
  s.window = r.window;
  s.state = TxState::kActive;
  history_.push_back(s);
  TxHandle h{r.seq, r.e.txid, r.window};
  live_.emplace(r.seq, std::move(r));
  ++stats_.begun;
  note("begin", h.seq, h.txid);
  return h;
}

void TxEngine::tx_write(const TxHandle& h, BlockAddr addr, const Block& data, std::uint32_t bytes_stored) {
  TxRec& r = active_rec(h);
  if (addr == 0 || addr >= kShadowBase) {
    throw Error(ErrorCode::kFieldOverflow, "address outside the data area");
  }
  ++stats_.writes;
  stats_.program_bytes += bytes_stored;
  if (config_.mode == ProtocolMode::kBaseline) {
    if (r.write_set.insert(addr).second) r.write_order.push_back(addr);
    charge(cache_.write(addr, data, TxContext{}).latency);
    return;
  }
  if (r.write_set.count(addr) == 0) {
    if (r.write_set.size() >= kMaxTxCnt) throw Error(ErrorCode::kTxTooLarge, "more than 32K blocks");
    r.write_set.insert(addr);
    r.write_order.push_back(addr);
  }
  const TxContext c = ctx(r);
  WriteResult w = cache_.write(addr, data, c);
  std::uint32_t latency = w.latency;
  if (swal()) {
    w = cache_.write(shadow_addr(addr), data, c);
    latency += w.latency;
  }
  if (w.new_version || w.relogged) {
    if (r.attributed >= kMaxTxCnt) throw Error(ErrorCode::kTxTooLarge, "txcnt beyond 32K blocks");
    ++r.attributed;
    ++r.dirty_lines;
    if (w.relogged) ++stats_.relogs;
  }
  if (loc()) win(r.window).latest_writer[addr] = r.seq;
  charge(latency);
}

Block TxEngine::tx_read(const TxHandle& h, BlockAddr addr) {
  TxRec& r = active_rec(h);
  ++stats_.reads;
  const AccessResult a =
      cache_.read(addr, config_.mode == ProtocolMode::kBaseline ? TxContext{} : ctx(r));
  charge(a.latency);
  return a.data;
}

Block TxEngine::read(BlockAddr addr) {
  ++stats_.reads;
  const AccessResult a = cache_.read(addr, TxContext{});
  charge(a.latency);
  return a.data;
}

void TxEngine::write(BlockAddr addr, const Block& data, std::uint32_t bytes_stored) {
  ++stats_.writes;
  stats_.program_bytes += bytes_stored;
  charge(cache_.write(addr, data, TxContext{}).latency);
}

void TxEngine::tx_commit(const TxHandle& h) {
  TxRec& r = active_rec(h);
  TxSummary& s = history_[r.seq];
  if (config_.mode == ProtocolMode::kBaseline) {
    r.e.state = TxState::kCommitted;
    s.state = TxState::kCommitted;
    s.durable = true;
    s.has_writes = !r.write_order.empty();
    r.freeable = true;
    ++stats_.committed;
    next_durable_seq_ = r.seq + 1;
    return;
  }
  SpeculationWindow& w = win(r.window);
  if (loc()) {
    for (std::uint64_t m : w.members) {
      if (m == r.seq) break;
      if (history_[m].state == TxState::kActive) {
        throw Error(ErrorCode::kWindowBusy, "an earlier transaction of the window is still active");
      }
    }
  }
  r.e.txcnt = static_cast<std::uint16_t>(r.attributed);
  r.e.state = TxState::kCommitted;
  s.state = TxState::kCommitted;
  s.has_writes = !r.write_order.empty();
  ++stats_.committed;
  stats_.pset_blocks += r.write_order.size();
  final_write_set_[r.seq] = r.write_order;
  if (r.write_order.empty()) ++stats_.read_only;
  settle(r);

  switch (config_.mode) {
    case ProtocolMode::kSWAL:
    case ProtocolMode::kHWAL: {
      if (r.write_order.empty()) {
        r.key_required = false;
        break;
      }
      log_dirty_lines(r, false);
      if (swal()) {
        for (BlockAddr addr : r.write_order) {
          if (VersionedCacheLine* l = cache_.find(addr, r.seq)) l->tx_dirty = false;
        }
      }
      ctrl_.flush_group();
      stall(&StallCycles::intra_tx, ctrl_.log_frontier());
      ctrl_.write_commit_record(r.e.txid, r.e.txcnt);
      ++stats_.commit_records;
      r.key = ctrl_.log_frontier();
      w.key = r.key;
      s.window_seq = ctrl_.current_window_seq();
      const std::uint64_t before = stats_.stalls.inter_tx;
      stall(&StallCycles::inter_tx, r.key);
      if (stats_.stalls.inter_tx != before) ++stats_.inter_tx_stall_events;
      break;
    }
    case ProtocolMode::kECWAL: {
      if (r.attributed == 0) {
        r.key_required = false;
        break;
      }
      if (r.dirty_lines == 0) {
        // Everything was logged early: re-log the last block as the carrier.
        VersionedCacheLine* l = cache_.find(*r.last_logged, r.seq);
        if (l == nullptr) throw std::logic_error("carrier block missing from cache");
        const Block data = l->data;
        ++r.attributed;
        ++r.dirty_lines;
        r.e.txcnt = static_cast<std::uint16_t>(r.attributed);
        ++stats_.carrier_relogs;
        log_tx_block(r, *r.last_logged, data, true);
      } else {
        log_dirty_lines(r, true);
      }
      ctrl_.flush_group();
      r.key = ctrl_.log_frontier();
      w.key = r.key;
      s.window_seq = ctrl_.current_window_seq();
      break;
    }
    case ProtocolMode::kLOCWAL:
    case ProtocolMode::kBaseline:
      break;
  }
  if (!loc()) {
    w.closed = true;
    s.logged = r.logged;
    s.skipped = r.skipped;
  }
  s.txcnt = r.e.txcnt;
  note("commit", r.seq, r.e.txcnt);
  advance_durable();
}

void TxEngine::tx_abort(const TxHandle& h) {
  TxRec& r = active_rec(h);
  if (config_.mode == ProtocolMode::kBaseline) {
    r.e.state = TxState::kAborted;
    history_[r.seq].state = TxState::kAborted;
    r.freeable = true;
    ++stats_.aborted;
    return;
  }
  SpeculationWindow& w = win(r.window);
  std::vector<TxRec*> victims;
  std::unordered_set<BlockAddr> overlap;
  bool after = false;
  for (std::uint64_t m : w.members) {
    if (m == r.seq) after = true;
    TxRec* v = rec(m);
    if (after && v != nullptr && v->e.state == TxState::kActive) {
      victims.push_back(v);
      overlap.insert(v->write_order.begin(), v->write_order.end());
    }
  }
  for (TxRec* v : victims) {
    v->e.state = TxState::kAborted;
    history_[v->seq].state = TxState::kAborted;
    ++stats_.aborted;
    note("abort", v->seq, v == &r ? 0 : 1);
  }
  if (loc()) {
    for (std::uint64_t m : w.members) {
      if (m == r.seq) break;
      TxRec* p = rec(m);
      if (p == nullptr || p->e.state != TxState::kCommitted) continue;
      const std::uint32_t before = p->logged;
      log_dirty_lines(*p, true, overlap);
      stats_.rescued_blocks += p->logged - before;
    }
  }
  for (TxRec* v : victims) {
    for (BlockAddr addr : v->write_order) {
      cache_.drop_versions(addr, v->seq);
      if (swal()) cache_.drop_versions(shadow_addr(addr), v->seq);
    }
    v->dirty_lines = 0;
    history_[v->seq].logged = v->logged;
  }
  if (loc()) {
    w.sealed = true;
  } else {
    ctrl_.flush_group();
    w.closed = true;
    w.key = ctrl_.log_frontier();
    history_[r.seq].window_seq = ctrl_.current_window_seq();
    r.freeable = true;
  }
  advance_durable();
}

void TxEngine::tx_flush(const TxHandle& h) {
  if (h.seq >= history_.size()) throw Error(ErrorCode::kInactiveTx, "unknown transaction");
  const TxSummary& s = history_[h.seq];
  if (config_.mode == ProtocolMode::kBaseline || s.durable) return;
  if (s.state == TxState::kAborted || s.state == TxState::kInvalid) {
    throw Error(ErrorCode::kInactiveTx, "flush of an aborted transaction");
  }
  TxRec* r = rec(h.seq);
  if (s.state == TxState::kActive) {
    log_dirty_lines(*r, false);
    ctrl_.flush_group();
    stall(&StallCycles::flush, ctrl_.log_frontier());
    return;
  }
  if (loc()) close_window(win(r->window));
  stall(&StallCycles::flush, r->key);
  advance_durable();
}

void TxEngine::finish() {
  for (const auto& [seq, r] : live_) {
    if (r.e.state == TxState::kActive) throw Error(ErrorCode::kWindowBusy, "active transaction at finish");
  }
  if (loc() && !windows_.empty() && !windows_.back().closed) close_window(windows_.back());
  stall(&StallCycles::flush, ctrl_.log_frontier());
  advance_durable();
  finish_time_ = ctrl_.now();
}

void TxEngine::quiesce() {
  finish();
  ctrl_.drain();
  checkpoint_all();
  ctrl_.drain();
  if (config_.mode != ProtocolMode::kBaseline) {
    truncations_.push_back({ctrl_.truncate(std::nullopt, static_cast<TxId>(next_seq_ & 0xff)), next_seq_});
    ctrl_.drain();
    if (first_pending_window_ == windows_.size()) {
      windows_.clear();
      first_pending_window_ = 0;
    }
  }
  collect();
}

void TxEngine::write_event_log(std::ostream& out) const {
  for (const EngineEvent& e : events_) {
    nlohmann::json j = {{"t", e.time}, {"event", e.kind}, {"seq", e.seq}, {"value", e.value}};
    out << j.dump() << '\n';
  }
  for (const PersistRecord& r : ctrl_.records()) {
    nlohmann::json j = {{"t", r.complete_time},
                        {"event", "persist"},
                        {"id", r.id},
                        {"kind", persist_kind_name(r.kind)},
                        {"region", r.region == Region::kHome ? "home" : "log"},
                        {"index", r.index},
                        {"bank", r.bank},
                        {"issued", r.issue_time}};
    out << j.dump() << '\n';
  }
}

}  // namespace locsim
