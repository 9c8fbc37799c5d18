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

#include "locsim/persistence_controller.hpp"

#include <algorithm>
#include <string>

#include "locsim/error.hpp"

namespace locsim {

const char* protocol_name(ProtocolMode mode) {
  switch (mode) {
    case ProtocolMode::kBaseline:
      return "baseline";
    case ProtocolMode::kSWAL:
      return "swal";
    case ProtocolMode::kHWAL:
      return "hwal";
    case ProtocolMode::kECWAL:
      return "ecwal";
    case ProtocolMode::kLOCWAL:
      return "locwal";
  }
  return "?";
}

std::optional<ProtocolMode> parse_protocol(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) {
    return c == '-' ? '\0' : static_cast<char>(std::tolower(c));
  });
  lower.erase(std::remove(lower.begin(), lower.end(), '\0'), lower.end());
  for (ProtocolMode m : {ProtocolMode::kBaseline, ProtocolMode::kSWAL, ProtocolMode::kHWAL,
                         ProtocolMode::kECWAL, ProtocolMode::kLOCWAL}) {
    if (lower == protocol_name(m)) return m;
  }
  if (lower == "loc") return ProtocolMode::kLOCWAL;
  return std::nullopt;
}

const char* persist_kind_name(PersistKind kind) {
  switch (kind) {
    case PersistKind::kData:
      return "data";
    case PersistKind::kMeta:
      return "meta";
    case PersistKind::kDep:
      return "dep";
    case PersistKind::kCommit:
      return "commit";
    case PersistKind::kCheckpoint:
      return "checkpoint";
    case PersistKind::kLogHead:
      return "loghead";
  }
  return "?";
}

void MemoryConfig::validate() const {
  if (banks == 0) throw Error(ErrorCode::kInvalidConfig, "need at least one memory bank");
  if (latency == 0) throw Error(ErrorCode::kInvalidConfig, "memory latency must be positive");
  if (units_in_log(log_blocks) < 2) throw Error(ErrorCode::kInvalidConfig, "log area too small");
}

PersistenceController::PersistenceController(const MemoryConfig& config, PersistentImage initial,
                                             LogHead head_flags, bool keep_records)
    : config_(config), initial_(std::move(initial)), keep_records_(keep_records) {
  config_.validate();
  if (initial_.log_blocks() != config_.log_blocks) {
    throw Error(ErrorCode::kInvalidConfig, "image log size does not match memory config");
  }
  bank_free_.assign(config_.banks, 0);
  units_ = units_in_log(config_.log_blocks);
  head_ = head_flags;
  head_.start_unit = 0;
  head_.end_unit = 0;
  head_.start_sid = 1;
  head_.start_window_seq = 0;
  head_.unit_count = units_;
  initial_.set_log(0, encode_log_head(head_));
  image_ = initial_;
  complete_times_.push_back(0);
  done_.push_back(true);
}

PersistId PersistenceController::issue(PersistKind kind, Region region, std::uint64_t index,
                                       const Block& data, std::uint32_t bank, std::uint64_t at) {
  PersistRecord rec;
  rec.id = next_id_++;
  rec.kind = kind;
  rec.region = region;
  rec.index = index;
  rec.bank = bank % config_.banks;
  rec.issue_time = at;
  rec.complete_time = std::max(at, bank_free_[rec.bank]) + config_.latency;
  rec.data = data;
  bank_free_[rec.bank] = rec.complete_time;
  complete_times_.push_back(rec.complete_time);
  done_.push_back(false);
  switch (kind) {
    case PersistKind::kData:
      ++counts_.data;
      break;
    case PersistKind::kMeta:
    case PersistKind::kLogHead:
      ++counts_.meta;
      break;
    case PersistKind::kDep:
      ++counts_.dep;
      break;
    case PersistKind::kCommit:
      ++counts_.commit;
      break;
    case PersistKind::kCheckpoint:
      ++counts_.checkpoint;
      break;
  }
  if (region == Region::kLog) log_frontier_ = later(log_frontier_, rec.id);
  queue_.push({rec.complete_time, rec.id});
  if (keep_records_) {
    records_.push_back(rec);
  } else {
    live_.emplace(rec.id, rec);
  }
  return rec.id;
}

PersistId PersistenceController::issue_home(BlockAddr addr, const Block& data, std::uint64_t at) {
  return issue(PersistKind::kCheckpoint, Region::kHome, addr, data, addr % config_.banks, at);
}

std::uint64_t PersistenceController::completion_time(PersistId id) const {
  return complete_times_.at(id);
}

PersistId PersistenceController::later(PersistId a, PersistId b) const {
  if (a == kNoPersist) return b;
  if (b == kNoPersist) return a;
  const auto ka = std::make_pair(complete_times_[a], a);
  const auto kb = std::make_pair(complete_times_[b], b);
  return ka < kb ? b : a;
}

void PersistenceController::apply(const PersistRecord& rec) {
  image_.write(rec.region, rec.index, rec.data);
  done_[rec.id] = true;
  order_.push_back(rec.id);
  if (pending_head_ && pending_head_->first == rec.id) {
    durable_start_sid_ = pending_head_->second;
    pending_head_.reset();
  }
  if (on_complete_) on_complete_(rec, order_.size());
}

void PersistenceController::advance_to(std::uint64_t t) {
  if (t > now_) now_ = t;
  while (!queue_.empty() && queue_.top().time <= now_) {
    const PersistId id = queue_.top().id;
    queue_.pop();
    if (keep_records_) {
      apply(records_[id - 1]);
    } else {
      auto it = live_.find(id);
      const PersistRecord rec = it->second;
      live_.erase(it);
      apply(rec);
    }
  }
}

std::uint64_t PersistenceController::wait_for(PersistId id) {
  if (completed(id)) return 0;
  const std::uint64_t start = now_;
  advance_to(completion_time(id));
  return now_ - start;
}

std::uint64_t PersistenceController::drain() {
  const std::uint64_t start = now_;
  // Completion hooks may issue further writes (checkpoints), so loop.
  while (!queue_.empty()) advance_to(queue_.top().time);
  return now_ - start;
}

// --- log writer -------------------------------------------------------------

void PersistenceController::begin_log_window(std::uint64_t tag) {
  window_tag_ = tag;
  window_seq_.reset();
}

std::uint16_t PersistenceController::ensure_window_seq() {
  if (!window_seq_) {
    window_seq_ = next_window_seq_;
    next_window_seq_ = static_cast<std::uint16_t>((next_window_seq_ + 1) & kWindowSeqMask);
    if (window_tag_) spans_[*window_tag_] = LogWindowSpan{*window_seq_, next_unit_, next_sid_};
  }
  return *window_seq_;
}

std::optional<std::uint16_t> PersistenceController::current_window_seq() const { return window_seq_; }

void PersistenceController::reserve_units(std::uint32_t n) {
  if (n > units_) throw Error(ErrorCode::kLogAreaFull, "record larger than the log area");
  if (units_used() + n <= units_) return;
  if (on_log_full_) on_log_full_(n);
  if (units_used() + n > units_) {
    throw Error(ErrorCode::kLogAreaFull,
                "no truncatable window; " + std::to_string(units_used()) + " units in use");
  }
}

std::uint32_t PersistenceController::allocate_unit(std::uint64_t* sid) {
  if (units_used() + 1 > units_) throw Error(ErrorCode::kLogAreaFull, "unit allocation");
  if (next_sid_ > kMaxSid) throw Error(ErrorCode::kFieldOverflow, "sid space exhausted");
  ensure_window_seq();
  const std::uint32_t unit = next_unit_;
  *sid = next_sid_++;
  next_unit_ = (next_unit_ + 1) % units_;
  return unit;
}

PersistId PersistenceController::log_block(const BlkTag& tag, const Block& data,
                                           std::uint64_t owner) {
  if (!group_) {
    reserve_units(1);
    OpenGroup g;
    g.unit = allocate_unit(&g.sid);
    g.window_seq = *window_seq_;
    group_ = std::move(g);
  }
  const std::size_t slot = group_->tags.size();
  group_->tags.push_back(tag);
  group_->data.push_back(data);
  group_->owners.push_back(owner);
  const PersistId id = issue(PersistKind::kData, Region::kLog, unit_block_index(group_->unit, slot),
                             data, group_->unit);
  if (group_->tags.size() == kGroupDataSlots) flush_group();
  return id;
}

PersistId PersistenceController::flush_group() {
  if (!group_) return kNoPersist;
  OpenGroup g = std::move(*group_);
  group_.reset();
  const Block meta = encode_meta_block(g.sid, g.window_seq, g.tags, g.data);
  const PersistId id =
      issue(PersistKind::kMeta, Region::kLog, unit_block_index(g.unit, kHeaderSlot), meta, g.unit);
  if (on_group_) on_group_(id, g.owners);
  return id;
}

std::vector<PersistId> PersistenceController::write_dep_record(DepRecord record) {
  flush_group();
  record.window_seq = ensure_window_seq();
  const std::size_t entries = record.counts.size() + record.pairs.size();
  if (!dep_record_fits(entries)) {
    throw Error(ErrorCode::kDepBufferOverflow, "dependency record exceeds 32KB");
  }
  const std::size_t blocks = dep_record_blocks(entries);
  reserve_units(static_cast<std::uint32_t>((blocks + kUnitBlocks - 1) / kUnitBlocks));
  const std::vector<DepUnit> units = encode_dep_record(record, next_sid_);
  std::vector<PersistId> ids;
  for (const DepUnit& u : units) {
    std::uint64_t sid = 0;
    const std::uint32_t unit = allocate_unit(&sid);
    for (std::size_t i = 0; i < u.payload.size(); ++i) {
      ids.push_back(issue(PersistKind::kDep, Region::kLog, unit_block_index(unit, i), u.payload[i], unit));
    }
    ids.push_back(issue(PersistKind::kDep, Region::kLog, unit_block_index(unit, kHeaderSlot), u.header, unit));
  }
  return ids;
}

PersistId PersistenceController::write_commit_record(TxId txid, std::uint16_t txcnt) {
  flush_group();
  const std::uint16_t wseq = ensure_window_seq();
  reserve_units(1);
  std::uint64_t sid = 0;
  const std::uint32_t unit = allocate_unit(&sid);
  const Block b = encode_commit_record(CommitRecord{sid, wseq, txid, txcnt});
  return issue(PersistKind::kCommit, Region::kLog, unit_block_index(unit, kHeaderSlot), b, unit);
}

PersistId PersistenceController::truncate(std::optional<std::uint64_t> keep_tag, TxId anchor) {
  LogHead h = head_;
  h.end_unit = next_unit_;
  h.anchor_txid = anchor;
  std::optional<LogWindowSpan> keep;
  if (keep_tag) keep = window_span(*keep_tag);
  if (keep) {
    h.start_unit = keep->first_unit;
    h.start_sid = keep->first_sid;
    h.start_window_seq = keep->window_seq;
  } else {
    h.start_unit = next_unit_;
    h.start_sid = next_sid_;
    h.start_window_seq = window_seq_ ? *window_seq_ : next_window_seq_;
  }
  for (auto it = spans_.begin(); it != spans_.end();) {
    if (it->second.first_sid < h.start_sid) {
      it = spans_.erase(it);
    } else {
      ++it;
    }
  }
  head_ = h;
  const PersistId id = issue(PersistKind::kLogHead, Region::kLog, 0, encode_log_head(h), 0);
  pending_head_ = std::make_pair(id, h.start_sid);
  return id;
}

std::optional<LogWindowSpan> PersistenceController::window_span(std::uint64_t tag) const {
  auto it = spans_.find(tag);
  if (it == spans_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::uint64_t> PersistenceController::log_window_tags() const {
  std::vector<std::uint64_t> out;
  for (const auto& [tag, span] : spans_) out.push_back(tag);
  return out;
}

}  // namespace locsim
