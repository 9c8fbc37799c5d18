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

#include "locsim/sim_harness.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "scenarios.hpp"

namespace locsim {
namespace {

using scenario::filled;

constexpr ProtocolMode kLogged[] = {ProtocolMode::kSWAL, ProtocolMode::kHWAL, ProtocolMode::kECWAL,
                                    ProtocolMode::kLOCWAL};

TEST(OracleReplay, LaterWritesWinAndZeroBlocksVanish) {
  const std::map<BlockAddr, Block> init{{1, filled(1)}, {2, filled(2)}};
  const std::map<BlockAddr, Block> a{{1, filled(5)}, {3, filled(3)}};
  const std::map<BlockAddr, Block> b{{1, filled(6)}, {2, Block{}}};
  const auto out = oracle_replay(init, {&a, &b});
  EXPECT_EQ(out, (std::map<BlockAddr, Block>{{1, filled(6)}, {3, filled(3)}}));
}

TEST(Run, MetricsAreConsistent) {
  RandomTraceSpec spec;
  spec.txs = 40;
  const Trace t = random_trace(spec);
  for (ProtocolMode m : kLogged) {
    const RunResult r = run(scenario::sweep_config(m, 4, false), t);
    std::uint64_t live = 0;
    for (const TraceTx& tx : t.txs) live += tx.abort ? 0 : 1;
    EXPECT_EQ(r.metrics.committed, live);
    EXPECT_EQ(r.metrics.memory_bytes, r.metrics.persists.bytes());
    EXPECT_EQ(r.metrics.program_bytes, t.program_bytes());
    EXPECT_GT(r.metrics.cycles, 0U);
  }
}

TEST(Run, DeterministicAcrossRepeats) {
  RandomTraceSpec spec;
  spec.seed = 9;
  const Trace t = random_trace(spec);
  const EngineConfig c = scenario::sweep_config(ProtocolMode::kLOCWAL, 16, true);
  const RunResult a = run(c, t);
  const RunResult b = run(c, t);
  EXPECT_EQ(a.metrics.cycles, b.metrics.cycles);
  EXPECT_EQ(a.completion_order, b.completion_order);
  EXPECT_TRUE(a.final_image == b.final_image);
}

TEST(Run, QuiescedImageMatchesOracle) {
  RandomTraceSpec spec;
  spec.seed = 4;
  const Trace t = random_trace(spec);
  const auto sets = write_sets(t);
  std::vector<const std::map<BlockAddr, Block>*> committed;
  for (std::size_t i = 0; i < t.txs.size(); ++i) {
    if (!t.txs[i].abort) committed.push_back(&sets[i]);
  }
  const auto expect = oracle_replay(t.initial, committed);
  for (ProtocolMode m : kLogged) {
    const RunResult r = run(scenario::sweep_config(m, 4, true), t);
    std::map<BlockAddr, Block> home;
    for (const auto& [addr, data] : r.final_image.normalized_home()) {
      if (addr < kShadowBase) home[addr] = data;
    }
    EXPECT_EQ(home, expect) << protocol_name(m);
  }
}

TEST(CrashSweep, AllProtocolsSmallSample) {
  for (ProtocolMode m : kLogged) {
    for (std::uint32_t sd : {1U, 4U}) {
      for (bool tiny : {false, true}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
          RandomTraceSpec spec;
          spec.seed = seed;
          const SweepSummary s = crash_sweep(scenario::sweep_config(m, sd, tiny), random_trace(spec));
          EXPECT_EQ(s.failures, 0U) << protocol_name(m) << " sd " << sd << " tiny " << tiny << " seed "
                                    << seed << ": " << (s.results.empty() ? "" : s.results[0].failure);
          EXPECT_EQ(s.points, s.total_persists + 1);
        }
      }
    }
  }
}

TEST(CrashSweep, SelectedPointsAndCsv) {
  RandomTraceSpec spec;
  const Trace t = random_trace(spec);
  EngineConfig c = scenario::sweep_config(ProtocolMode::kLOCWAL, 4, false);
  c.keep_records = true;
  const RunResult r = run(c, t);
  const auto pts = stratified_points(r, 5, 1);
  ASSERT_FALSE(pts.empty());
  EXPECT_EQ(pts.front(), 0U);
  EXPECT_EQ(pts.back(), r.completion_order.size());
  EXPECT_TRUE(std::is_sorted(pts.begin(), pts.end()));
  SweepOptions opt;
  opt.points = pts;
  opt.keep_all = true;
  const SweepSummary s = crash_sweep(c, t, opt);
  EXPECT_EQ(s.points, pts.size());
  EXPECT_EQ(s.failures, 0U);
  std::ostringstream out;
  write_sweep_csv(out, {s});
  const std::string csv = out.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "protocol,sd,k,last_kind,recovered,acked,pass,failure");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), pts.size() + 1);
}

TEST(CrashSweep, AckedTransactionsAreCounted) {
  RandomTraceSpec spec;
  spec.txs = 30;
  SweepOptions opt;
  opt.keep_all = true;
  const SweepSummary s =
      crash_sweep(scenario::sweep_config(ProtocolMode::kHWAL, 1, false), random_trace(spec), opt);
  ASSERT_FALSE(s.results.empty());
  EXPECT_EQ(s.results.front().acked, 0U);
  EXPECT_GT(s.results.back().acked, 0U);
  EXPECT_GE(s.results.back().recovered, s.results.back().acked);
}

}  // namespace
}  // namespace locsim
