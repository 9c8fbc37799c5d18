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

#include <gtest/gtest.h>

#include <sstream>

#include "json.hpp"
#include "locsim/error.hpp"
#include "locsim/recovery.hpp"
#include "scenarios.hpp"

namespace locsim {
namespace {

using scenario::filled;

EngineConfig config(ProtocolMode m, std::uint32_t sd = 16) {
  EngineConfig c;
  c.mode = m;
  c.sd = sd;
  c.memory.log_blocks = kLogBodyOffset + 256 * kUnitBlocks;
  return c;
}

PersistentImage blank(const EngineConfig& c) { return PersistentImage(c.memory.log_blocks); }

constexpr ProtocolMode kLogged[] = {ProtocolMode::kSWAL, ProtocolMode::kHWAL, ProtocolMode::kECWAL,
                                    ProtocolMode::kLOCWAL};

TEST(TxStateEntry, PacksInto48Bits) {
  TxStateEntry e;
  e.cid = 5;
  e.tid = 1;
  e.txid = 200;
  e.txcnt = 32768;
  e.state = TxState::kCommitted;
  e.phase = TxPhase::kInPlaceWrite;
  e.wrts = 1000;
  const std::uint64_t bits = e.pack();
  EXPECT_LT(bits, 1ULL << 48);
  const TxStateEntry d = TxStateEntry::unpack(bits);
  EXPECT_EQ(d.cid, 5);
  EXPECT_EQ(d.tid, 1);
  EXPECT_EQ(d.txid, 200);
  EXPECT_EQ(d.txcnt, 32768);
  EXPECT_EQ(d.state, TxState::kCommitted);
  EXPECT_EQ(d.phase, TxPhase::kInPlaceWrite);
  EXPECT_EQ(d.wrts, 1000);
}

TEST(EngineConfig, RejectsBadSd) {
  EngineConfig c = config(ProtocolMode::kLOCWAL, 0);
  EXPECT_THROW(c.validate(), Error);
  c.sd = 129;
  EXPECT_THROW(c.validate(), Error);
}

TEST(TxEngine, ReadsSeeOwnAndCommittedWrites) {
  for (ProtocolMode m : kLogged) {
    const EngineConfig c = config(m);
    TxEngine eng(c, blank(c));
    const TxHandle t = eng.tx_begin();
    eng.tx_write(t, 7, filled(1));
    EXPECT_EQ(eng.tx_read(t, 7), filled(1)) << protocol_name(m);
    eng.tx_commit(t);
    EXPECT_EQ(eng.read(7), filled(1)) << protocol_name(m);
    const TxHandle u = eng.tx_begin();
    eng.tx_write(u, 7, filled(2));
    eng.tx_abort(u);
    EXPECT_EQ(eng.read(7), filled(1)) << protocol_name(m);
    eng.quiesce();
    EXPECT_EQ(eng.controller().image().home(7), filled(1)) << protocol_name(m);
  }
}

TEST(TxEngine, CommitRecordsPerProtocol) {
  for (ProtocolMode m : kLogged) {
    const EngineConfig c = config(m);
    TxEngine eng(c, blank(c));
    for (int i = 0; i < 10; ++i) {
      const TxHandle t = eng.tx_begin();
      eng.tx_write(t, static_cast<BlockAddr>(i + 1), filled(static_cast<std::uint8_t>(i + 1)));
      eng.tx_commit(t);
    }
    eng.finish();
    const std::uint64_t expect = uses_commit_records(m) ? 10 : 0;
    EXPECT_EQ(eng.stats().commit_records, expect) << protocol_name(m);
    EXPECT_EQ(eng.controller().counts().commit, expect) << protocol_name(m);
  }
}

TEST(TxEngine, OnlyLocAllowsConcurrentTransactions) {
  for (ProtocolMode m : kLogged) {
    const EngineConfig c = config(m);
    TxEngine eng(c, blank(c));
    const TxHandle t = eng.tx_begin();
    if (m == ProtocolMode::kLOCWAL) {
      const TxHandle u = eng.tx_begin();
      eng.tx_write(u, 1, filled(1));
      EXPECT_THROW(eng.tx_commit(u), Error);
      eng.tx_commit(t);
      eng.tx_commit(u);
    } else {
      EXPECT_THROW(eng.tx_begin(), Error) << protocol_name(m);
    }
  }
}

TEST(TxEngine, InactiveHandlesThrow) {
  const EngineConfig c = config(ProtocolMode::kHWAL);
  TxEngine eng(c, blank(c));
  const TxHandle t = eng.tx_begin();
  eng.tx_commit(t);
  EXPECT_THROW(eng.tx_write(t, 1, filled(1)), Error);
  EXPECT_THROW(eng.tx_commit(t), Error);
}

TEST(TxEngine, WindowSkipsSupersededBlocks) {
  const scenario::SkipResult r = scenario::coalesced_window();
  EXPECT_EQ(r.t1_logged, 0U);
  EXPECT_EQ(r.t1_skipped, 4U);
  EXPECT_EQ(r.t1_txcnt, 4U);
  EXPECT_EQ(r.t1_pair_sum, 4U);
  EXPECT_EQ(r.pairs, 2U);
  EXPECT_EQ(r.recovered.size(), 4U);
  EXPECT_TRUE(r.home_ok);
}

TEST(TxEngine, AbortCascadesAndRescuesPredecessor) {
  const scenario::AbortResult r = scenario::aborted_successor();
  EXPECT_EQ(r.recovered, (std::vector<TxId>{r.t1}));
  EXPECT_EQ(r.aborted, 3U);
  EXPECT_EQ(r.rescued, 4U);
  EXPECT_TRUE(r.home_ok);
  EXPECT_TRUE(r.prefix_ok);
}

TEST(TxEngine, TxIdsWrapAcrossManyWindows) {
  for (std::uint32_t sd : {1U, 16U, 128U}) {
    const EngineConfig c = config(ProtocolMode::kLOCWAL, sd);
    TxEngine eng(c, blank(c));
    for (int i = 0; i < 700; ++i) {
      const TxHandle t = eng.tx_begin();
      eng.tx_write(t, static_cast<BlockAddr>(i % 50 + 1), filled(static_cast<std::uint8_t>(i % 251 + 1)));
      eng.tx_commit(t);
    }
    eng.quiesce();
    EXPECT_EQ(eng.stats().committed, 700U);
    EXPECT_EQ(eng.check_max_commit(), static_cast<TxId>(699 & 0xff));
    for (int a = 0; a < 50; ++a) {
      const int last = 650 + a;
      EXPECT_EQ(eng.controller().image().home(static_cast<BlockAddr>(a + 1)),
                filled(static_cast<std::uint8_t>(last % 251 + 1)))
          << "sd " << sd;
    }
  }
}

TEST(TxEngine, FlushMakesTransactionDurable) {
  const EngineConfig c = config(ProtocolMode::kLOCWAL);
  TxEngine eng(c, blank(c));
  const TxHandle t = eng.tx_begin();
  eng.tx_write(t, 3, filled(3));
  eng.tx_commit(t);
  EXPECT_FALSE(eng.history()[t.seq].durable);
  eng.tx_flush(t);
  EXPECT_TRUE(eng.history()[t.seq].durable);
  EXPECT_GT(eng.stats().stalls.total(), 0U);
  PersistentImage img = eng.controller().image();
  recover(img);
  EXPECT_EQ(img.home(3), filled(3));
}

TEST(TxEngine, EventLogIsNdjson) {
  EngineConfig c = config(ProtocolMode::kLOCWAL);
  c.keep_events = true;
  TxEngine eng(c, blank(c));
  const TxHandle t = eng.tx_begin();
  eng.tx_write(t, 3, filled(3));
  eng.tx_commit(t);
  eng.finish();
  std::ostringstream out;
  eng.write_event_log(out);
  std::istringstream in(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    EXPECT_TRUE(nlohmann::json::accept(line)) << line;
    ++n;
  }
  EXPECT_GT(n, 3U);
}

TEST(TxEngine, BaselineWritesNoLog) {
  const EngineConfig c = config(ProtocolMode::kBaseline);
  TxEngine eng(c, blank(c));
  for (int i = 0; i < 5; ++i) {
    const TxHandle t = eng.tx_begin();
    eng.tx_write(t, 1, filled(1));
    eng.tx_commit(t);
  }
  eng.quiesce();
  EXPECT_EQ(eng.controller().counts().data + eng.controller().counts().dep, 0U);
}

}  // namespace
}  // namespace locsim
