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

#include "locsim/workloads.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <memory>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "locsim/error.hpp"

namespace locsim {

double Trace::pset() const {
  std::uint64_t blocks = 0;
  std::uint64_t n = 0;
  for (const TraceTx& tx : txs) {
    if (tx.abort) continue;
    std::unordered_set<BlockAddr> w;
    for (const TraceOp& op : tx.ops) {
      if (op.kind == OpKind::kWrite) w.insert(op.addr);
    }
    if (w.empty()) continue;
    blocks += w.size();
    ++n;
  }
  return n == 0 ? 0.0 : static_cast<double>(blocks) / static_cast<double>(n);
}

std::uint64_t Trace::program_bytes() const {
  std::uint64_t b = 0;
  for (const TraceTx& tx : txs) {
    for (const TraceOp& op : tx.ops) {
      if (op.kind == OpKind::kWrite) b += op.bytes;
    }
  }
  return b;
}

const char* workload_name(WorkloadKind kind) {
  switch (kind) {
    case WorkloadKind::kBTree: return "btree";
    case WorkloadKind::kHash: return "hash";
    case WorkloadKind::kRBTree: return "rbtree";
    case WorkloadKind::kSPS: return "sps";
  }
  return "?";
}

std::optional<WorkloadKind> parse_workload(std::string_view name) {
  std::string s;
  for (char c : name) {
    if (c != '-' && c != '_' && c != '+') s.push_back(static_cast<char>(std::tolower(c)));
  }
  if (s == "btree" || s == "bptree") return WorkloadKind::kBTree;
  if (s == "hash" || s == "hashtable") return WorkloadKind::kHash;
  if (s == "rbtree") return WorkloadKind::kRBTree;
  if (s == "sps") return WorkloadKind::kSPS;
  return std::nullopt;
}

void WorkloadSpec::validate() const {
  if (tx_size == 0) throw Error(ErrorCode::kInvalidConfig, "tx_size must be positive");
  if (hash_buckets == 0) throw Error(ErrorCode::kInvalidConfig, "hash_buckets must be positive");
  if (sps_entries < 2) throw Error(ErrorCode::kInvalidConfig, "sps needs at least two entries");
  if (delete_fraction < 0 || delete_fraction > 1 || key_locality < 0 || key_locality > 1) {
    throw Error(ErrorCode::kInvalidConfig, "fractions must lie in [0, 1]");
  }
}

namespace {

constexpr std::uint64_t kBlock = kBlockSize;
constexpr BlockAddr kStructBase = 16;  // first block of every structure

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

/// Byte-addressed view of the structure memory that records loads and
/// stores of the current transaction as trace operations.
class Mem {
 public:
  void begin_tx(TraceTx* tx) {
    tx_ = tx;
    seen_.clear();
  }
  void end_tx() { tx_ = nullptr; }

  std::uint64_t load(std::uint64_t addr, std::size_t n) {
    std::uint8_t buf[8] = {};
    read_bytes(addr, buf, n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  void store(std::uint64_t addr, std::uint64_t v, std::size_t n) {
    std::uint8_t buf[8];
    for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
    write_bytes(addr, buf, n);
  }
  void move(std::uint64_t dst, std::uint64_t src, std::size_t n) {
    if (n == 0) return;
    std::vector<std::uint8_t> tmp(n);
    read_bytes(src, tmp.data(), n);
    write_bytes(dst, tmp.data(), n);
  }
  void compute(std::uint64_t cycles) {
    if (tx_ != nullptr && cycles > 0) {
      TraceOp op;
      op.kind = OpKind::kCompute;
      op.cycles = cycles;
      tx_->ops.push_back(op);
    }
  }

  void read_bytes(std::uint64_t addr, std::uint8_t* out, std::size_t n) {
    while (n > 0) {
      const BlockAddr b = static_cast<BlockAddr>(addr / kBlock);
      const std::size_t off = addr % kBlock;
      const std::size_t k = std::min(n, kBlock - off);
      if (tx_ != nullptr && seen_.insert(b).second) {
        TraceOp op;
        op.kind = OpKind::kRead;
        op.addr = b;
        tx_->ops.push_back(op);
      }
      const Block& blk = block(b);
      std::memcpy(out, blk.data() + off, k);
      out += k;
      addr += k;
      n -= k;
    }
  }
  void write_bytes(std::uint64_t addr, const std::uint8_t* in, std::size_t n) {
    while (n > 0) {
      const BlockAddr b = static_cast<BlockAddr>(addr / kBlock);
      const std::size_t off = addr % kBlock;
      const std::size_t k = std::min(n, kBlock - off);
      Block& blk = blocks_[b];
      std::memcpy(blk.data() + off, in, k);
      if (tx_ != nullptr) {
        seen_.insert(b);
        if (!tx_->ops.empty() && tx_->ops.back().kind == OpKind::kWrite &&
            tx_->ops.back().addr == b) {
          tx_->ops.back().bytes += static_cast<std::uint32_t>(k);
          tx_->ops.back().data = blk;
        } else {
          TraceOp op;
          op.kind = OpKind::kWrite;
          op.addr = b;
          op.bytes = static_cast<std::uint32_t>(k);
          op.data = blk;
          tx_->ops.push_back(op);
        }
      }
      in += k;
      addr += k;
      n -= k;
    }
  }

  const Block& block(BlockAddr b) const {
    static const Block kZero{};
    auto it = blocks_.find(b);
    return it == blocks_.end() ? kZero : it->second;
  }
  std::map<BlockAddr, Block> snapshot() const {
    std::map<BlockAddr, Block> out;
    for (const auto& [a, b] : blocks_) {
      if (b != Block{}) out.emplace(a, b);
    }
    return out;
  }

 private:
  std::unordered_map<BlockAddr, Block> blocks_;
  TraceTx* tx_ = nullptr;
  std::unordered_set<BlockAddr> seen_;
};

std::uint64_t rd(const BlockReader& r, std::uint64_t addr, std::size_t n) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Block b = r(static_cast<BlockAddr>((addr + i) / kBlock));
    v |= static_cast<std::uint64_t>(b[(addr + i) % kBlock]) << (8 * i);
  }
  return v;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  std::uint64_t next() { return g_(); }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : g_() % n; }
  double unit() { return static_cast<double>(g_() >> 11) * (1.0 / 9007199254740992.0); }

 private:
  std::mt19937_64 g_;
};

/// Keys arrive in short ascending runs that start at random points.
class KeyGen {
 public:
  KeyGen(Rng& rng, double locality) : rng_(rng), locality_(locality) {}
  std::uint64_t next() {
    if (!started_ || rng_.unit() >= locality_) {
      cur_ = 1 + rng_.below(1ULL << 40);
      started_ = true;
    } else {
      cur_ += 1 + rng_.below(4);
    }
    return cur_;
  }

 private:
  Rng& rng_;
  double locality_;
  std::uint64_t cur_ = 0;
  bool started_ = false;
};

/// Picks uniformly among live keys.
class KeyPool {
 public:
  void add(std::uint64_t k) {
    if (pos_.count(k)) return;
    pos_[k] = keys_.size();
    keys_.push_back(k);
  }
  void remove(std::uint64_t k) {
    auto it = pos_.find(k);
    if (it == pos_.end()) return;
    const std::size_t i = it->second;
    keys_[i] = keys_.back();
    pos_[keys_[i]] = i;
    keys_.pop_back();
    pos_.erase(k);
  }
  bool empty() const { return keys_.empty(); }
  std::uint64_t pick(Rng& rng) const { return keys_[rng.below(keys_.size())]; }

 private:
  std::vector<std::uint64_t> keys_;
  std::unordered_map<std::uint64_t, std::size_t> pos_;
};

// ---------------------------------------------------------------------------
// B+ tree. Header block: root u32 @0, node count u32 @4. Node i occupies
// 64 blocks from kStructBase+1+64i: count u32 @0, leaf u32 @4, next leaf
// u32 @8 (id+1), keys u64[200] @64, leaf values u32[200] @1664,
// internal children u32[201] @2496.

constexpr std::uint32_t kFanout = 200;

class BTree {
 public:
  explicit BTree(Mem& m) : m_(m) {}

  static std::uint64_t header() { return kStructBase * kBlock; }
  static std::uint64_t node(std::uint32_t id) {
    return (kStructBase + 1 + 64ULL * id) * kBlock;
  }
  static std::uint64_t key_at(std::uint32_t id, std::uint32_t i) { return node(id) + 64 + 8ULL * i; }
  static std::uint64_t val_at(std::uint32_t id, std::uint32_t i) { return node(id) + 1664 + 4ULL * i; }
  static std::uint64_t child_at(std::uint32_t id, std::uint32_t i) { return node(id) + 2496 + 4ULL * i; }

  void init() {
    m_.store(header(), 0, 4);
    m_.store(header() + 4, 1, 4);
    m_.store(node(0) + 4, 1, 4);
  }

  void insert(std::uint64_t key, std::uint32_t val) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> path;  // (node, child index)
    std::uint32_t id = static_cast<std::uint32_t>(m_.load(header(), 4));
    while (m_.load(node(id) + 4, 4) == 0) {
      const std::uint32_t n = count(id);
      const std::uint32_t c = upper_bound(id, n, key);
      path.emplace_back(id, c);
      id = static_cast<std::uint32_t>(m_.load(child_at(id, c), 4));
    }
    const std::uint32_t n = count(id);
    const std::uint32_t pos = lower_bound(id, n, key);
    if (pos < n && m_.load(key_at(id, pos), 8) == key) {
      m_.store(val_at(id, pos), val, 4);
      return;
    }
    if (n < kFanout) {
      m_.move(key_at(id, pos + 1), key_at(id, pos), 8ULL * (n - pos));
      m_.move(val_at(id, pos + 1), val_at(id, pos), 4ULL * (n - pos));
      m_.store(key_at(id, pos), key, 8);
      m_.store(val_at(id, pos), val, 4);
      m_.store(node(id), n + 1, 4);
      return;
    }
    // Split the full leaf.
    std::vector<std::uint64_t> keys(n);
    std::vector<std::uint32_t> vals(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      keys[i] = m_.load(key_at(id, i), 8);
      vals[i] = static_cast<std::uint32_t>(m_.load(val_at(id, i), 4));
    }
    keys.insert(keys.begin() + pos, key);
    vals.insert(vals.begin() + pos, val);
    const std::uint32_t left = static_cast<std::uint32_t>(keys.size() / 2);
    const std::uint32_t right_id = alloc();
    write_leaf(id, keys, vals, 0, left);
    write_leaf(right_id, keys, vals, left, static_cast<std::uint32_t>(keys.size()));
    m_.store(node(right_id) + 4, 1, 4);
    m_.store(node(right_id) + 8, m_.load(node(id) + 8, 4), 4);
    m_.store(node(id) + 8, right_id + 1, 4);
    insert_parent(path, id, keys[left], right_id);
  }

  void erase(std::uint64_t key) {
    std::uint32_t id = static_cast<std::uint32_t>(m_.load(header(), 4));
    while (m_.load(node(id) + 4, 4) == 0) {
      const std::uint32_t c = upper_bound(id, count(id), key);
      id = static_cast<std::uint32_t>(m_.load(child_at(id, c), 4));
    }
    const std::uint32_t n = count(id);
    const std::uint32_t pos = lower_bound(id, n, key);
    if (pos >= n || m_.load(key_at(id, pos), 8) != key) return;
    m_.move(key_at(id, pos), key_at(id, pos + 1), 8ULL * (n - pos - 1));
    m_.move(val_at(id, pos), val_at(id, pos + 1), 4ULL * (n - pos - 1));
    m_.store(node(id), n - 1, 4);
  }

  static std::map<std::uint64_t, std::uint64_t> decode(const BlockReader& r) {
    std::map<std::uint64_t, std::uint64_t> out;
    std::uint32_t id = static_cast<std::uint32_t>(rd(r, header(), 4));
    while (rd(r, node(id) + 4, 4) == 0) id = static_cast<std::uint32_t>(rd(r, child_at(id, 0), 4));
    for (std::uint32_t guard = 0; guard < (1U << 20); ++guard) {
      const std::uint32_t n = static_cast<std::uint32_t>(rd(r, node(id), 4));
      for (std::uint32_t i = 0; i < n && i < kFanout; ++i) {
        out[rd(r, key_at(id, i), 8)] = rd(r, val_at(id, i), 4);
      }
      const std::uint32_t next = static_cast<std::uint32_t>(rd(r, node(id) + 8, 4));
      if (next == 0) break;
      id = next - 1;
    }
    return out;
  }

 private:
  std::uint32_t count(std::uint32_t id) { return static_cast<std::uint32_t>(m_.load(node(id), 4)); }
  std::uint32_t lower_bound(std::uint32_t id, std::uint32_t n, std::uint64_t key) {
    std::uint32_t lo = 0;
    std::uint32_t hi = n;
    while (lo < hi) {
      const std::uint32_t mid = (lo + hi) / 2;
      if (m_.load(key_at(id, mid), 8) < key) lo = mid + 1; else hi = mid;
    }
    return lo;
  }
  std::uint32_t upper_bound(std::uint32_t id, std::uint32_t n, std::uint64_t key) {
    std::uint32_t lo = 0;
    std::uint32_t hi = n;
    while (lo < hi) {
      const std::uint32_t mid = (lo + hi) / 2;
      if (m_.load(key_at(id, mid), 8) <= key) lo = mid + 1; else hi = mid;
    }
    return lo;
  }
  std::uint32_t alloc() {
    const std::uint32_t id = static_cast<std::uint32_t>(m_.load(header() + 4, 4));
    m_.store(header() + 4, id + 1, 4);
    return id;
  }
  void write_leaf(std::uint32_t id, const std::vector<std::uint64_t>& keys,
                  const std::vector<std::uint32_t>& vals, std::uint32_t from, std::uint32_t to) {
    for (std::uint32_t i = from; i < to; ++i) {
      m_.store(key_at(id, i - from), keys[i], 8);
      m_.store(val_at(id, i - from), vals[i], 4);
    }
    m_.store(node(id), to - from, 4);
  }
  void insert_parent(std::vector<std::pair<std::uint32_t, std::uint32_t>>& path,
                     std::uint32_t left_id, std::uint64_t sep, std::uint32_t right_id) {
    if (path.empty()) {
      const std::uint32_t root = alloc();
      m_.store(key_at(root, 0), sep, 8);
      m_.store(child_at(root, 0), left_id, 4);
      m_.store(child_at(root, 1), right_id, 4);
      m_.store(node(root), 1, 4);
      m_.store(header(), root, 4);
      return;
    }
    const auto [id, c] = path.back();
    path.pop_back();
    const std::uint32_t n = count(id);
    if (n < kFanout) {
      m_.move(key_at(id, c + 1), key_at(id, c), 8ULL * (n - c));
      m_.move(child_at(id, c + 2), child_at(id, c + 1), 4ULL * (n - c));
      m_.store(key_at(id, c), sep, 8);
      m_.store(child_at(id, c + 1), right_id, 4);
      m_.store(node(id), n + 1, 4);
      return;
    }
    std::vector<std::uint64_t> keys(n);
    std::vector<std::uint32_t> kids(n + 1);
    for (std::uint32_t i = 0; i < n; ++i) keys[i] = m_.load(key_at(id, i), 8);
    for (std::uint32_t i = 0; i <= n; ++i) kids[i] = static_cast<std::uint32_t>(m_.load(child_at(id, i), 4));
    keys.insert(keys.begin() + c, sep);
    kids.insert(kids.begin() + c + 1, right_id);
    const std::uint32_t mid = static_cast<std::uint32_t>(keys.size() / 2);
    const std::uint32_t sib = alloc();
    for (std::uint32_t i = 0; i < mid; ++i) m_.store(key_at(id, i), keys[i], 8);
    for (std::uint32_t i = 0; i <= mid; ++i) m_.store(child_at(id, i), kids[i], 4);
    m_.store(node(id), mid, 4);
    const std::uint32_t rn = static_cast<std::uint32_t>(keys.size()) - mid - 1;
    for (std::uint32_t i = 0; i < rn; ++i) m_.store(key_at(sib, i), keys[mid + 1 + i], 8);
    for (std::uint32_t i = 0; i <= rn; ++i) m_.store(child_at(sib, i), kids[mid + 1 + i], 4);
    m_.store(node(sib), rn, 4);
    insert_parent(path, id, keys[mid], sib);
  }

  Mem& m_;
};

// ---------------------------------------------------------------------------
// Chained hash table. Header block: count u64 @0, next entry u32 @8, free
// list head u32 @12 (index+1). Buckets u32[nb] (entry index+1) from block
// kStructBase+1, then 16-byte entries: key u64 @0, val u32 @8, next u32 @12.

class Hash {
 public:
  Hash(Mem& m, std::uint32_t buckets) : m_(m), nb_(buckets) {}

  static std::uint64_t header() { return kStructBase * kBlock; }
  static std::uint64_t bucket(std::uint32_t b) { return (kStructBase + 1) * kBlock + 4ULL * b; }
  static std::uint64_t entries_base(std::uint32_t nb) {
    return bucket(0) + ((4ULL * nb + kBlock - 1) / kBlock) * kBlock;
  }
  std::uint64_t entry(std::uint32_t e) const { return entries_base(nb_) + 16ULL * e; }
  std::uint32_t slot(std::uint64_t key) const { return static_cast<std::uint32_t>(mix64(key) % nb_); }

  void insert(std::uint64_t key, std::uint32_t val) {
    const std::uint32_t b = slot(key);
    std::uint32_t cur = static_cast<std::uint32_t>(m_.load(bucket(b), 4));
    while (cur != 0) {
      if (m_.load(entry(cur - 1), 8) == key) {
        m_.store(entry(cur - 1) + 8, val, 4);
        return;
      }
      cur = static_cast<std::uint32_t>(m_.load(entry(cur - 1) + 12, 4));
    }
    std::uint32_t e = static_cast<std::uint32_t>(m_.load(header() + 12, 4));
    if (e != 0) {
      m_.store(header() + 12, m_.load(entry(e - 1) + 12, 4), 4);
    } else {
      e = static_cast<std::uint32_t>(m_.load(header() + 8, 4)) + 1;
      m_.store(header() + 8, e, 4);
    }
    m_.store(entry(e - 1), key, 8);
    m_.store(entry(e - 1) + 8, val, 4);
    m_.store(entry(e - 1) + 12, m_.load(bucket(b), 4), 4);
    m_.store(bucket(b), e, 4);
    m_.store(header(), m_.load(header(), 8) + 1, 8);
  }

  void erase(std::uint64_t key) {
    const std::uint32_t b = slot(key);
    std::uint64_t link = bucket(b);
    std::uint32_t cur = static_cast<std::uint32_t>(m_.load(link, 4));
    while (cur != 0) {
      const std::uint32_t next = static_cast<std::uint32_t>(m_.load(entry(cur - 1) + 12, 4));
      if (m_.load(entry(cur - 1), 8) == key) {
        m_.store(link, next, 4);
        m_.store(entry(cur - 1) + 12, m_.load(header() + 12, 4), 4);
        m_.store(header() + 12, cur, 4);
        m_.store(header(), m_.load(header(), 8) - 1, 8);
        return;
      }
      link = entry(cur - 1) + 12;
      cur = next;
    }
  }

  static std::map<std::uint64_t, std::uint64_t> decode(const BlockReader& r, std::uint32_t nb) {
    std::map<std::uint64_t, std::uint64_t> out;
    for (std::uint32_t b = 0; b < nb; ++b) {
      std::uint32_t cur = static_cast<std::uint32_t>(rd(r, bucket(b), 4));
      for (std::uint32_t guard = 0; cur != 0 && guard < (1U << 20); ++guard) {
        const std::uint64_t e = entries_base(nb) + 16ULL * (cur - 1);
        out[rd(r, e, 8)] = rd(r, e + 8, 4);
        cur = static_cast<std::uint32_t>(rd(r, e + 12, 4));
      }
    }
    return out;
  }

 private:
  Mem& m_;
  std::uint32_t nb_;
};

// ---------------------------------------------------------------------------
// Red-black tree. Header block: root u32 @0 (index+1), count u64 @8, next
// node u32 @16. 32-byte nodes from block kStructBase+1: key u64 @0,
// val u32 @8, left u32 @12, right u32 @16, parent u32 @20, red u32 @24.
// Inserting an existing key overwrites its value.

class RBTree {
 public:
  explicit RBTree(Mem& m) : m_(m) {}

  static std::uint64_t header() { return kStructBase * kBlock; }
  static std::uint64_t nd(std::uint32_t n) { return (kStructBase + 1) * kBlock + 32ULL * (n - 1); }

  void insert(std::uint64_t key, std::uint32_t val) {
    std::uint32_t parent = 0;
    std::uint32_t cur = root();
    bool go_left = false;
    while (cur != 0) {
      const std::uint64_t k = m_.load(nd(cur), 8);
      if (k == key) {
        m_.store(nd(cur) + 8, val, 4);
        return;
      }
      parent = cur;
      go_left = key < k;
      cur = go_left ? left(cur) : right(cur);
    }
    const std::uint32_t z = static_cast<std::uint32_t>(m_.load(header() + 16, 4)) + 1;
    m_.store(header() + 16, z, 4);
    m_.store(nd(z), key, 8);
    m_.store(nd(z) + 8, val, 4);
    m_.store(nd(z) + 12, 0, 4);
    m_.store(nd(z) + 16, 0, 4);
    m_.store(nd(z) + 20, parent, 4);
    m_.store(nd(z) + 24, 1, 4);
    if (parent == 0) {
      set_root(z);
    } else if (go_left) {
      set_left(parent, z);
    } else {
      set_right(parent, z);
    }
    m_.store(header() + 8, m_.load(header() + 8, 8) + 1, 8);
    fixup(z);
  }

  static std::map<std::uint64_t, std::uint64_t> decode(const BlockReader& r) {
    std::map<std::uint64_t, std::uint64_t> out;
    std::vector<std::uint32_t> stack;
    const std::uint32_t root = static_cast<std::uint32_t>(rd(r, header(), 4));
    if (root != 0) stack.push_back(root);
    while (!stack.empty() && out.size() < (1U << 22)) {
      const std::uint32_t n = stack.back();
      stack.pop_back();
      out[rd(r, nd(n), 8)] = rd(r, nd(n) + 8, 4);
      const std::uint32_t l = static_cast<std::uint32_t>(rd(r, nd(n) + 12, 4));
      const std::uint32_t rr = static_cast<std::uint32_t>(rd(r, nd(n) + 16, 4));
      if (l != 0) stack.push_back(l);
      if (rr != 0) stack.push_back(rr);
    }
    return out;
  }

 private:
  std::uint32_t root() { return static_cast<std::uint32_t>(m_.load(header(), 4)); }
  void set_root(std::uint32_t n) { m_.store(header(), n, 4); }
  std::uint32_t left(std::uint32_t n) { return static_cast<std::uint32_t>(m_.load(nd(n) + 12, 4)); }
  std::uint32_t right(std::uint32_t n) { return static_cast<std::uint32_t>(m_.load(nd(n) + 16, 4)); }
  std::uint32_t parent(std::uint32_t n) { return static_cast<std::uint32_t>(m_.load(nd(n) + 20, 4)); }
  bool red(std::uint32_t n) { return n != 0 && m_.load(nd(n) + 24, 4) != 0; }
  void set_left(std::uint32_t n, std::uint32_t v) { m_.store(nd(n) + 12, v, 4); }
  void set_right(std::uint32_t n, std::uint32_t v) { m_.store(nd(n) + 16, v, 4); }
  void set_parent(std::uint32_t n, std::uint32_t v) { m_.store(nd(n) + 20, v, 4); }
  void set_red(std::uint32_t n, bool v) { m_.store(nd(n) + 24, v ? 1 : 0, 4); }

  void rotate_left(std::uint32_t x) {
    const std::uint32_t y = right(x);
    const std::uint32_t yl = left(y);
    set_right(x, yl);
    if (yl != 0) set_parent(yl, x);
    const std::uint32_t p = parent(x);
    set_parent(y, p);
    if (p == 0) {
      set_root(y);
    } else if (left(p) == x) {
      set_left(p, y);
    } else {
      set_right(p, y);
    }
    set_left(y, x);
    set_parent(x, y);
  }
  void rotate_right(std::uint32_t x) {
    const std::uint32_t y = left(x);
    const std::uint32_t yr = right(y);
    set_left(x, yr);
    if (yr != 0) set_parent(yr, x);
    const std::uint32_t p = parent(x);
    set_parent(y, p);
    if (p == 0) {
      set_root(y);
    } else if (right(p) == x) {
      set_right(p, y);
    } else {
      set_left(p, y);
    }
    set_right(y, x);
    set_parent(x, y);
  }
  void fixup(std::uint32_t z) {
    while (red(parent(z))) {
      const std::uint32_t p = parent(z);
      const std::uint32_t g = parent(p);
      if (p == left(g)) {
        const std::uint32_t u = right(g);
        if (red(u)) {
          set_red(p, false);
          set_red(u, false);
          set_red(g, true);
          z = g;
          continue;
        }
        if (z == right(p)) {
          z = p;
          rotate_left(z);
        }
        set_red(parent(z), false);
        set_red(parent(parent(z)), true);
        rotate_right(parent(parent(z)));
      } else {
        const std::uint32_t u = left(g);
        if (red(u)) {
          set_red(p, false);
          set_red(u, false);
          set_red(g, true);
          z = g;
          continue;
        }
        if (z == left(p)) {
          z = p;
          rotate_right(z);
        }
        set_red(parent(z), false);
        set_red(parent(parent(z)), true);
        rotate_left(parent(parent(z)));
      }
    }
    const std::uint32_t r = root();
    if (red(r)) set_red(r, false);
  }

  Mem& m_;
};

// ---------------------------------------------------------------------------
// SPS: u64 array from block kStructBase; each operation swaps two entries.

std::uint64_t sps_entry(std::uint32_t i) { return kStructBase * kBlock + 8ULL * i; }

}  // namespace

GeneratedWorkload generate(const WorkloadSpec& spec) {
  spec.validate();
  GeneratedWorkload g;
  g.trace.workload = workload_name(spec.kind);
  Mem mem;
  Rng rng(spec.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(spec.kind));
  KeyGen keys(rng, spec.key_locality);
  KeyPool pool;
  auto& ref = g.reference;

  std::function<void()> op;
  switch (spec.kind) {
    case WorkloadKind::kBTree: {
      auto t = std::make_shared<BTree>(mem);
      t->init();
      op = [&, t] {
        if (!pool.empty() && rng.unit() < spec.delete_fraction) {
          const std::uint64_t k = pool.pick(rng);
          t->erase(k);
          pool.remove(k);
          ref.erase(k);
        } else {
          const std::uint64_t k = keys.next();
          const std::uint32_t v = static_cast<std::uint32_t>(rng.next());
          t->insert(k, v);
          pool.add(k);
          ref[k] = v;
        }
      };
      g.decode = [](const BlockReader& r) { return BTree::decode(r); };
      break;
    }
    case WorkloadKind::kHash: {
      auto t = std::make_shared<Hash>(mem, spec.hash_buckets);
      const std::uint64_t space = 4ULL * (spec.prefill + spec.ops) + 16;
      op = [&, t, space] {
        if (!pool.empty() && rng.unit() < spec.delete_fraction) {
          const std::uint64_t k = pool.pick(rng);
          t->erase(k);
          pool.remove(k);
          ref.erase(k);
        } else {
          const std::uint64_t k = 1 + rng.below(space);
          const std::uint32_t v = static_cast<std::uint32_t>(rng.next());
          t->insert(k, v);
          pool.add(k);
          ref[k] = v;
        }
      };
      const std::uint32_t nb = spec.hash_buckets;
      g.decode = [nb](const BlockReader& r) { return Hash::decode(r, nb); };
      break;
    }
    case WorkloadKind::kRBTree: {
      auto t = std::make_shared<RBTree>(mem);
      op = [&, t] {
        const std::uint64_t k = keys.next();
        const std::uint32_t v = static_cast<std::uint32_t>(rng.next());
        t->insert(k, v);
        ref[k] = v;
      };
      g.decode = [](const BlockReader& r) { return RBTree::decode(r); };
      break;
    }
    case WorkloadKind::kSPS: {
      const std::uint32_t n = spec.sps_entries;
      for (std::uint32_t i = 0; i < n; ++i) {
        mem.store(sps_entry(i), i + 1, 8);
        ref[i] = i + 1;
      }
      op = [&, n] {
        const std::uint32_t i = static_cast<std::uint32_t>(rng.below(n));
        std::uint32_t j = static_cast<std::uint32_t>(rng.below(n - 1));
        if (j >= i) ++j;
        const std::uint64_t a = mem.load(sps_entry(i), 8);
        const std::uint64_t b = mem.load(sps_entry(j), 8);
        mem.store(sps_entry(i), b, 8);
        mem.store(sps_entry(j), a, 8);
        std::swap(ref[i], ref[j]);
      };
      g.decode = [n](const BlockReader& r) {
        std::map<std::uint64_t, std::uint64_t> out;
        for (std::uint32_t i = 0; i < n; ++i) out[i] = rd(r, sps_entry(i), 8);
        return out;
      };
      break;
    }
  }

  const std::uint32_t prefill = spec.kind == WorkloadKind::kSPS ? 0 : spec.prefill;
  for (std::uint32_t i = 0; i < prefill; ++i) op();
  g.trace.initial = mem.snapshot();

  for (std::uint32_t done = 0; done < spec.ops;) {
    TraceTx tx;
    mem.begin_tx(&tx);
    for (std::uint32_t i = 0; i < spec.tx_size && done < spec.ops; ++i, ++done) {
      mem.compute(spec.compute_per_op);
      op();
    }
    mem.end_tx();
    g.trace.txs.push_back(std::move(tx));
  }
  g.final_memory = mem.snapshot();
  return g;
}

Trace random_trace(const RandomTraceSpec& spec) {
  Rng rng(spec.seed * 0x2545f4914f6cdd1dULL + 7);
  Trace t;
  t.workload = "random";
  auto random_block = [&] {
    Block b;
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.next());
    return b;
  };
  for (BlockAddr a = 1; a <= spec.addr_space; ++a) {
    if (rng.below(2) == 0) t.initial[a] = random_block();
  }
  for (std::uint32_t i = 0; i < spec.txs; ++i) {
    TraceTx tx;
    const bool read_only = rng.unit() < spec.read_only_rate;
    const std::uint32_t n = 1 + static_cast<std::uint32_t>(rng.below(spec.max_blocks));
    for (std::uint32_t k = 0; k < n; ++k) {
      TraceOp op;
      op.addr = 1 + static_cast<BlockAddr>(rng.below(spec.addr_space));
      if (read_only || rng.below(4) == 0) {
        op.kind = OpKind::kRead;
      } else {
        op.kind = OpKind::kWrite;
        op.bytes = kBlockSize;
        op.data = random_block();
      }
      tx.ops.push_back(op);
      if (rng.below(3) == 0) {
        TraceOp c;
        c.kind = OpKind::kCompute;
        c.cycles = 10 + rng.below(200);
        tx.ops.push_back(c);
      }
    }
    tx.abort = !read_only && rng.unit() < spec.abort_rate;
    t.txs.push_back(std::move(tx));
  }
  return t;
}

}  // namespace locsim
