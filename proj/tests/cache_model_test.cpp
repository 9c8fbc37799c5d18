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

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "locsim/error.hpp"

namespace locsim {
namespace {

Block filled(std::uint8_t v) {
  Block b;
  b.fill(v);
  return b;
}

struct Status : TxStatusView {
  std::set<std::uint64_t> committed;
  bool is_committed(std::uint64_t seq) const override { return committed.count(seq) > 0; }
};

struct Memory : MemorySide {
  std::map<BlockAddr, Block> home;
  std::vector<VersionedCacheLine> evicted;
  bool stage_tx = true;
  Block load_home(BlockAddr addr) override { return home[addr]; }
  EvictAction on_evict(VersionedCacheLine& line, bool) override {
    evicted.push_back(line);
    if (line.transactional() && stage_tx) return EvictAction::kStage;
    if (line.dirty) home[line.home_addr] = line.data;
    return EvictAction::kDrop;
  }
};

TxContext tx(std::uint64_t seq) { return TxContext{seq, static_cast<TxId>(seq), 0, 0}; }

// Two LLC sets of two ways: even addresses share set 0.
CacheConfig tiny() {
  CacheConfig c;
  c.l1 = {128, 1, 1};
  c.l2 = {256, 2, 8};
  c.llc = {256, 2, 21};
  return c;
}

TEST(CacheConfig, Validation) {
  CacheConfig ok;
  EXPECT_NO_THROW(ok.validate());
  CacheConfig bad = ok;
  bad.l2.size_bytes = 4 * 1024 * 1024;
  EXPECT_THROW(bad.validate(), Error);
  bad = ok;
  bad.llc.ways = 0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Cache, LatencyByLevel) {
  Status st;
  Memory mem;
  CacheHierarchy c(CacheConfig{}, 168, st, mem);
  EXPECT_EQ(c.read(5, TxContext{}).latency, 1U + 8 + 21 + 168);
  EXPECT_EQ(c.read(5, TxContext{}).latency, 1U);
}

TEST(Cache, ReadSeesOwnThenCommittedThenHome) {
  Status st;
  Memory mem;
  mem.home[4] = filled(1);
  CacheHierarchy c(CacheConfig{}, 100, st, mem);
  c.write(4, filled(2), tx(10));
  EXPECT_EQ(c.read(4, tx(10)).data, filled(2));
  EXPECT_EQ(c.read(4, tx(11)).data, filled(1));
  EXPECT_EQ(c.read(4, TxContext{}).data, filled(1));
  st.committed.insert(10);
  EXPECT_EQ(c.read(4, tx(11)).data, filled(2));
  c.write(4, filled(3), tx(11));
  EXPECT_EQ(c.resident_versions(4), 2U);
  EXPECT_EQ(c.read(4, tx(12)).data, filled(2));
  st.committed.insert(11);
  EXPECT_EQ(c.read(4, tx(12)).data, filled(3));
}

TEST(Cache, RewriteOfLoggedLineMarksRelog) {
  Status st;
  Memory mem;
  CacheHierarchy c(CacheConfig{}, 100, st, mem);
  EXPECT_TRUE(c.write(7, filled(1), tx(1)).new_version);
  c.find(7, 1)->tx_dirty = false;
  const WriteResult w = c.write(7, filled(2), tx(1));
  EXPECT_FALSE(w.new_version);
  EXPECT_TRUE(w.relogged);
  EXPECT_EQ(c.resident_versions(7), 1U);
}

TEST(Cache, ReclaimAndDrop) {
  Status st;
  Memory mem;
  CacheHierarchy c(CacheConfig{}, 100, st, mem);
  c.write(9, filled(1), tx(1));
  c.write(9, filled(2), tx(2));
  c.write(9, filled(3), tx(3));
  std::vector<std::uint64_t> removed;
  EXPECT_EQ(c.reclaim_versions(9, 2, [&](const VersionedCacheLine& l) { removed.push_back(l.owner); }), 1U);
  EXPECT_EQ(removed, (std::vector<std::uint64_t>{1}));
  EXPECT_EQ(c.drop_versions(9, 3), 1U);
  EXPECT_EQ(c.versions(9).size(), 1U);
  EXPECT_EQ(c.versions(9)[0]->owner, 2U);
}

TEST(Cache, EvictedVersionIsStagedAndPulledBack) {
  Status st;
  Memory mem;
  CacheHierarchy c(tiny(), 100, st, mem);
  c.write(0, filled(1), tx(1));
  c.find(0, 1)->tx_dirty = false;  // logged, so evictable
  c.read(2, TxContext{});
  c.read(4, TxContext{});
  ASSERT_EQ(c.staged_count(), 1U);
  EXPECT_FALSE(c.is_resident(0, 1));
  EXPECT_EQ(c.read(0, tx(1)).data, filled(1));
  EXPECT_TRUE(c.is_resident(0, 1));
  EXPECT_EQ(c.stats().staged_fetches, 1U);
}

TEST(Cache, TxDirtyLinesForceVersionOverflow) {
  Status st;
  Memory mem;
  CacheHierarchy c(tiny(), 100, st, mem);
  c.write(0, filled(1), tx(1));
  c.write(0, filled(2), tx(2));
  c.write(0, filled(3), tx(3));
  EXPECT_EQ(c.stats().version_overflows, 1U);
  ASSERT_FALSE(mem.evicted.empty());
  EXPECT_EQ(mem.evicted.back().owner, 1U);
  EXPECT_TRUE(mem.evicted.back().tx_dirty);
}

TEST(Cache, PlainWritesStayNewestUntilEvicted) {
  Status st;
  Memory mem;
  mem.stage_tx = false;
  CacheHierarchy c(tiny(), 100, st, mem);
  c.write(0, filled(5), TxContext{});
  c.read(2, TxContext{});
  c.read(4, TxContext{});
  EXPECT_EQ(mem.home[0], filled(5));
  EXPECT_EQ(c.read(0, TxContext{}).data, filled(5));
}

TEST(Cache, TagOverhead) {
  Status st;
  Memory mem;
  CacheHierarchy c(CacheConfig{}, 100, st, mem);
  const std::uint64_t l1 = 32 * 1024 / 64, l2 = 256 * 1024 / 64, llc = 1024 * 1024 / 64;
  EXPECT_EQ(c.tag_overhead_bits(), 9 * (l1 + l2) + 12 * llc);
}

}  // namespace
}  // namespace locsim
