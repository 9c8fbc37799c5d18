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

#include "locsim/cache_model.hpp"

#include <algorithm>

#include "locsim/error.hpp"

namespace locsim {

void CacheConfig::validate() const {
  for (const CacheLevelConfig* lvl : {&l1, &l2, &llc}) {
    if (lvl->ways == 0 || lvl->size_bytes % (kBlockSize * lvl->ways) != 0 || lvl->sets() == 0) {
      throw Error(ErrorCode::kInvalidConfig, "cache size must be a multiple of ways * 64");
    }
  }
  if (l1.size_bytes > l2.size_bytes || l2.size_bytes > llc.size_bytes) {
    throw Error(ErrorCode::kInvalidConfig, "inclusive hierarchy needs L1 <= L2 <= LLC");
  }
}

bool CacheHierarchy::TagArray::touch(BlockAddr addr, std::uint64_t stamp) {
  const std::size_t set = addr % cfg.sets();
  for (std::size_t w = 0; w < cfg.ways; ++w) {
    TagLine& l = lines[set * cfg.ways + w];
    if (l.valid && l.addr == addr) {
      l.lru = stamp;
      return true;
    }
  }
  return false;
}

void CacheHierarchy::TagArray::fill(BlockAddr addr, std::uint64_t stamp, BlockAddr* evicted,
                                    bool* did_evict) {
  *did_evict = false;
  const std::size_t set = addr % cfg.sets();
  TagLine* victim = nullptr;
  for (std::size_t w = 0; w < cfg.ways; ++w) {
    TagLine& l = lines[set * cfg.ways + w];
    if (l.valid && l.addr == addr) {
      l.lru = stamp;
      return;
    }
    if (!l.valid) {
      if (victim == nullptr || victim->valid) victim = &l;
    } else if (victim == nullptr || (victim->valid && l.lru < victim->lru)) {
      victim = &l;
    }
  }
  if (victim->valid) {
    *did_evict = true;
    *evicted = victim->addr;
  }
  *victim = TagLine{true, addr, stamp};
}

void CacheHierarchy::TagArray::invalidate(BlockAddr addr) {
  const std::size_t set = addr % cfg.sets();
  for (std::size_t w = 0; w < cfg.ways; ++w) {
    TagLine& l = lines[set * cfg.ways + w];
    if (l.valid && l.addr == addr) l.valid = false;
  }
}

CacheHierarchy::CacheHierarchy(const CacheConfig& config, std::uint32_t memory_latency,
                               const TxStatusView& status, MemorySide& memory)
    : config_(config), memory_latency_(memory_latency), status_(status), memory_(memory) {
  config_.validate();
  l1_.cfg = config_.l1;
  l1_.lines.resize(config_.l1.sets() * config_.l1.ways);
  l2_.cfg = config_.l2;
  l2_.lines.resize(config_.l2.sets() * config_.l2.ways);
  llc_sets_ = config_.llc.sets();
  llc_.resize(llc_sets_ * config_.llc.ways);
}

bool CacheHierarchy::visible(const VersionedCacheLine& line, const TxContext& ctx) const {
  if (!line.transactional()) return true;
  if (ctx.transactional() && line.owner == ctx.seq) return true;
  return status_.is_committed(line.owner);
}

VersionedCacheLine* CacheHierarchy::newest_visible_resident(BlockAddr addr, const TxContext& ctx) {
  const std::size_t set = llc_set(addr);
  VersionedCacheLine* best = nullptr;
  for (std::size_t w = 0; w < config_.llc.ways; ++w) {
    VersionedCacheLine* l = llc_way(set, w);
    if (!l->valid || l->home_addr != addr || !visible(*l, ctx)) continue;
    if (best == nullptr || l->version_ord > best->version_ord) best = l;
  }
  return best;
}

const VersionedCacheLine* CacheHierarchy::newest_visible_staged(BlockAddr addr,
                                                                const TxContext& ctx) const {
  auto it = staged_.find(addr);
  if (it == staged_.end()) return nullptr;
  const VersionedCacheLine* best = nullptr;
  for (const VersionedCacheLine& l : it->second) {
    if (!visible(l, ctx)) continue;
    if (best == nullptr || l.version_ord > best->version_ord) best = &l;
  }
  return best;
}

std::uint64_t CacheHierarchy::newest_ord(BlockAddr addr, std::uint64_t* owner) const {
  std::uint64_t best = 0;
  bool found = false;
  auto consider = [&](const VersionedCacheLine& l) {
    if (!found || l.version_ord > best) {
      best = l.version_ord;
      *owner = l.owner;
      found = true;
    }
  };
  const std::size_t set = llc_set(addr);
  for (std::size_t w = 0; w < config_.llc.ways; ++w) {
    const VersionedCacheLine& l = llc_[set * config_.llc.ways + w];
    if (l.valid && l.home_addr == addr) consider(l);
  }
  if (auto it = staged_.find(addr); it != staged_.end()) {
    for (const VersionedCacheLine& l : it->second) consider(l);
  }
  if (!found) *owner = kNoTx;
  return best;
}

std::uint32_t CacheHierarchy::touch_upper(BlockAddr addr, bool llc_hit) {
  ++clock_;
  std::uint32_t latency = config_.l1.latency;
  BlockAddr ev = 0;
  bool did = false;
  if (l1_.touch(addr, clock_)) {
    ++stats_.l1.hits;
    return latency;
  }
  ++stats_.l1.misses;
  latency += config_.l2.latency;
  if (l2_.touch(addr, clock_)) {
    ++stats_.l2.hits;
  } else {
    ++stats_.l2.misses;
    latency += config_.llc.latency;
    if (llc_hit) {
      ++stats_.llc.hits;
    } else {
      ++stats_.llc.misses;
      latency += memory_latency_;
    }
    l2_.fill(addr, clock_, &ev, &did);
    if (did) {
      ++stats_.l2.evictions;
      l1_.invalidate(ev);
    }
  }
  l1_.fill(addr, clock_, &ev, &did);
  if (did) ++stats_.l1.evictions;
  return latency;
}

void CacheHierarchy::drop_upper_if_absent(BlockAddr addr) {
  if (resident_versions(addr) == 0) {
    l1_.invalidate(addr);
    l2_.invalidate(addr);
  }
}

std::size_t CacheHierarchy::choose_victim(std::size_t set, bool* overflow) const {
  const VersionedCacheLine* base = &llc_[set * config_.llc.ways];
  std::size_t best = config_.llc.ways;
  for (std::size_t w = 0; w < config_.llc.ways; ++w) {
    if (base[w].tx_dirty) continue;
    if (best == config_.llc.ways || base[w].lru < base[best].lru) best = w;
  }
  *overflow = best == config_.llc.ways;
  if (!*overflow) return best;
  best = 0;
  for (std::size_t w = 1; w < config_.llc.ways; ++w) {
    const auto key = std::make_pair(base[w].version_ord, base[w].lru);
    const auto cur = std::make_pair(base[best].version_ord, base[best].lru);
    if (key < cur) best = w;
  }
  return best;
}

void CacheHierarchy::evict(VersionedCacheLine* line, bool overflow) {
  VersionedCacheLine copy = *line;
  line->valid = false;
  ++stats_.llc.evictions;
  if (overflow) ++stats_.version_overflows;
  drop_upper_if_absent(copy.home_addr);
  if (memory_.on_evict(copy, overflow) == EvictAction::kStage) {
    staged_[copy.home_addr].push_back(copy);
  }
}

VersionedCacheLine* CacheHierarchy::insert(VersionedCacheLine line) {
  const std::size_t set = llc_set(line.home_addr);
  std::size_t way = config_.llc.ways;
  for (std::size_t w = 0; w < config_.llc.ways; ++w) {
    if (!llc_way(set, w)->valid) {
      way = w;
      break;
    }
  }
  if (way == config_.llc.ways) {
    bool overflow = false;
    way = choose_victim(set, &overflow);
    evict(llc_way(set, way), overflow);
  }
  line.valid = true;
  line.lru = ++clock_;
  VersionedCacheLine* slot = llc_way(set, way);
  *slot = line;
  return slot;
}

VersionedCacheLine* CacheHierarchy::pull_staged(BlockAddr addr, std::uint64_t owner) {
  auto it = staged_.find(addr);
  if (it == staged_.end()) return nullptr;
  auto& vec = it->second;
  auto pos = std::find_if(vec.begin(), vec.end(),
                          [&](const VersionedCacheLine& l) { return l.owner == owner; });
  if (pos == vec.end()) return nullptr;
  VersionedCacheLine line = *pos;
  vec.erase(pos);
  if (vec.empty()) staged_.erase(it);
  ++stats_.staged_fetches;
  return insert(line);
}

void CacheHierarchy::note_versions(BlockAddr addr) {
  stats_.max_versions_per_block =
      std::max<std::uint64_t>(stats_.max_versions_per_block, resident_versions(addr));
}

AccessResult CacheHierarchy::read(BlockAddr addr, const TxContext& ctx) {
  AccessResult out;
  VersionedCacheLine* res = newest_visible_resident(addr, ctx);
  const VersionedCacheLine* stg = newest_visible_staged(addr, ctx);
  if (res != nullptr && (stg == nullptr || res->version_ord > stg->version_ord)) {
    out.latency = touch_upper(addr, true);
    res->lru = clock_;
    out.data = res->data;
    return out;
  }
  out.latency = touch_upper(addr, false);
  if (stg != nullptr) {
    VersionedCacheLine* l = pull_staged(addr, stg->owner);
    out.data = l->data;
    return out;
  }
  VersionedCacheLine fresh;
  fresh.home_addr = addr;
  fresh.data = memory_.load_home(addr);
  out.data = fresh.data;
  insert(fresh);
  note_versions(addr);
  return out;
}

WriteResult CacheHierarchy::write(BlockAddr addr, const Block& data, const TxContext& ctx) {
  WriteResult out;
  const std::size_t set = llc_set(addr);
  if (!ctx.transactional()) {
    VersionedCacheLine* plain = nullptr;
    for (std::size_t w = 0; w < config_.llc.ways; ++w) {
      VersionedCacheLine* l = llc_way(set, w);
      if (l->valid && l->home_addr == addr && !l->transactional()) plain = l;
    }
    out.latency = touch_upper(addr, plain != nullptr);
    if (plain == nullptr) {
      VersionedCacheLine fresh;
      fresh.home_addr = addr;
      plain = insert(fresh);
    }
    plain->data = data;
    plain->dirty = true;
    plain->lru = clock_;
    return out;
  }

  std::uint64_t owner = kNoTx;
  newest_ord(addr, &owner);
  if (owner == ctx.seq) {
    VersionedCacheLine* own = nullptr;
    for (std::size_t w = 0; w < config_.llc.ways && own == nullptr; ++w) {
      VersionedCacheLine* l = llc_way(set, w);
      if (l->valid && l->home_addr == addr && l->owner == ctx.seq) own = l;
    }
    out.latency = touch_upper(addr, own != nullptr);
    if (own == nullptr) own = pull_staged(addr, ctx.seq);
    own->data = data;
    own->dirty = true;
    own->lru = clock_;
    if (!own->tx_dirty) {
      own->tx_dirty = true;
      out.relogged = true;
    }
    return out;
  }

  out.latency = touch_upper(addr, resident_versions(addr) > 0);
  // A clean home copy is absorbed into the new version (write-allocate).
  for (std::size_t w = 0; w < config_.llc.ways; ++w) {
    VersionedCacheLine* l = llc_way(set, w);
    if (l->valid && l->home_addr == addr && !l->transactional() && !l->dirty) l->valid = false;
  }
  VersionedCacheLine line;
  line.home_addr = addr;
  line.data = data;
  line.cid = ctx.cid;
  line.tid = ctx.tid;
  line.txid = ctx.txid;
  line.owner = ctx.seq;
  line.tx_dirty = true;
  line.dirty = true;
  line.version_ord = ctx.seq + 1;
  insert(line);
  out.new_version = true;
  note_versions(addr);
  return out;
}

std::size_t CacheHierarchy::reclaim_versions(
    BlockAddr addr, std::uint64_t committed_seq,
    const std::function<void(const VersionedCacheLine&)>& on_removed) {
  const std::uint64_t ord = committed_seq + 1;
  std::size_t removed = 0;
  const std::size_t set = llc_set(addr);
  for (std::size_t w = 0; w < config_.llc.ways; ++w) {
    VersionedCacheLine* l = llc_way(set, w);
    if (l->valid && l->home_addr == addr && l->version_ord < ord && !(l->dirty && !l->transactional())) {
      if (on_removed) on_removed(*l);
      l->valid = false;
      ++removed;
    }
  }
  if (auto it = staged_.find(addr); it != staged_.end()) {
    auto& vec = it->second;
    for (auto p = vec.begin(); p != vec.end();) {
      if (p->version_ord < ord) {
        if (on_removed) on_removed(*p);
        p = vec.erase(p);
        ++removed;
      } else {
        ++p;
      }
    }
    if (vec.empty()) staged_.erase(it);
  }
  stats_.reclaimed_versions += removed;
  return removed;
}

std::size_t CacheHierarchy::drop_versions(BlockAddr addr, std::uint64_t seq) {
  std::size_t removed = 0;
  const std::size_t set = llc_set(addr);
  for (std::size_t w = 0; w < config_.llc.ways; ++w) {
    VersionedCacheLine* l = llc_way(set, w);
    if (l->valid && l->home_addr == addr && l->owner == seq) {
      l->valid = false;
      ++removed;
    }
  }
  if (auto it = staged_.find(addr); it != staged_.end()) {
    auto& vec = it->second;
    const auto before = vec.size();
    vec.erase(std::remove_if(vec.begin(), vec.end(),
                             [&](const VersionedCacheLine& l) { return l.owner == seq; }),
              vec.end());
    removed += before - vec.size();
    if (vec.empty()) staged_.erase(it);
  }
  drop_upper_if_absent(addr);
  return removed;
}

VersionedCacheLine* CacheHierarchy::find(BlockAddr addr, std::uint64_t seq) {
  const std::size_t set = llc_set(addr);
  for (std::size_t w = 0; w < config_.llc.ways; ++w) {
    VersionedCacheLine* l = llc_way(set, w);
    if (l->valid && l->home_addr == addr && l->owner == seq) return l;
  }
  if (auto it = staged_.find(addr); it != staged_.end()) {
    for (VersionedCacheLine& l : it->second) {
      if (l.owner == seq) return &l;
    }
  }
  return nullptr;
}

bool CacheHierarchy::is_resident(BlockAddr addr, std::uint64_t seq) const {
  const std::size_t set = llc_set(addr);
  for (std::size_t w = 0; w < config_.llc.ways; ++w) {
    const VersionedCacheLine& l = llc_[set * config_.llc.ways + w];
    if (l.valid && l.home_addr == addr && l.owner == seq) return true;
  }
  return false;
}

std::vector<const VersionedCacheLine*> CacheHierarchy::versions(BlockAddr addr) const {
  std::vector<const VersionedCacheLine*> out;
  const std::size_t set = llc_set(addr);
  for (std::size_t w = 0; w < config_.llc.ways; ++w) {
    const VersionedCacheLine& l = llc_[set * config_.llc.ways + w];
    if (l.valid && l.home_addr == addr) out.push_back(&l);
  }
  if (auto it = staged_.find(addr); it != staged_.end()) {
    for (const VersionedCacheLine& l : it->second) out.push_back(&l);
  }
  std::stable_sort(out.begin(), out.end(), [](const VersionedCacheLine* a, const VersionedCacheLine* b) {
    return a->version_ord < b->version_ord;
  });
  return out;
}

std::size_t CacheHierarchy::resident_versions(BlockAddr addr) const {
  std::size_t n = 0;
  const std::size_t set = llc_set(addr);
  for (std::size_t w = 0; w < config_.llc.ways; ++w) {
    const VersionedCacheLine& l = llc_[set * config_.llc.ways + w];
    if (l.valid && l.home_addr == addr) ++n;
  }
  return n;
}

bool CacheHierarchy::handle_version_overflow(BlockAddr addr) {
  const std::size_t set = llc_set(addr);
  for (std::size_t w = 0; w < config_.llc.ways; ++w) {
    if (!llc_way(set, w)->valid) return false;
  }
  bool overflow = false;
  const std::size_t way = choose_victim(set, &overflow);
  evict(llc_way(set, way), overflow);
  return true;
}

void CacheHierarchy::for_each_line(const std::function<void(VersionedCacheLine&)>& fn) {
  for (VersionedCacheLine& l : llc_) {
    if (l.valid) fn(l);
  }
  for (auto& [addr, vec] : staged_) {
    for (VersionedCacheLine& l : vec) fn(l);
  }
}

void CacheHierarchy::unstage(BlockAddr addr, std::uint64_t owner) {
  auto it = staged_.find(addr);
  if (it == staged_.end()) return;
  auto& vec = it->second;
  vec.erase(std::remove_if(vec.begin(), vec.end(),
                           [&](const VersionedCacheLine& l) { return l.owner == owner; }),
            vec.end());
  if (vec.empty()) staged_.erase(it);
}

std::size_t CacheHierarchy::staged_count() const {
  std::size_t n = 0;
  for (const auto& [addr, vec] : staged_) n += vec.size();
  return n;
}

std::uint64_t CacheHierarchy::tag_overhead_bits() const {
  return static_cast<std::uint64_t>(l1_.lines.size() + l2_.lines.size()) * kUpperTagBits +
         static_cast<std::uint64_t>(llc_.size()) * kLlcTagBits;
}

}  // namespace locsim
