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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"

namespace locsim {

PersistentImage initial_image(const EngineConfig& config, const Trace& trace) {
  PersistentImage img(config.memory.log_blocks);
  for (const auto& [addr, data] : trace.initial) img.set_home(addr, data);
  return img;
}

RunResult run(const EngineConfig& config, const Trace& trace, bool quiesce, std::ostream* event_log) {
  EngineConfig cfg = config;
  if (event_log != nullptr) cfg.keep_events = true;
  TxEngine eng(cfg, initial_image(cfg, trace));
  for (const TraceTx& tx : trace.txs) {
    const TxHandle h = eng.tx_begin();
    for (const TraceOp& op : tx.ops) {
      switch (op.kind) {
        case OpKind::kRead: eng.tx_read(h, op.addr); break;
        case OpKind::kWrite: eng.tx_write(h, op.addr, op.data, op.bytes); break;
        case OpKind::kCompute: eng.compute(op.cycles); break;
      }
    }
    if (tx.abort) {
      eng.tx_abort(h);
    } else {
      eng.tx_commit(h);
    }
  }
  eng.finish();
  const std::uint64_t cycles = eng.finish_time();
  if (quiesce) eng.quiesce();

  RunResult r;
  RunMetrics& m = r.metrics;
  m.protocol = protocol_name(cfg.mode);
  m.sd = cfg.sd;
  m.workload = trace.workload;
  m.txs = trace.txs.size();
  m.committed = eng.stats().committed;
  m.aborted = eng.stats().aborted;
  m.cycles = cycles;
  m.program_bytes = eng.stats().program_bytes;
  m.persists = eng.controller().counts();
  m.memory_bytes = m.persists.bytes();
  m.stalls = eng.stats().stalls;
  m.commit_records = eng.stats().commit_records;
  m.pset = trace.pset();
  m.engine = eng.stats();
  r.start_image = eng.controller().initial_image();
  r.final_image = eng.controller().image();
  r.history = eng.history();
  r.records = eng.controller().records();
  r.completion_order = eng.controller().completion_order();
  r.truncations = eng.truncations();
  if (event_log != nullptr) eng.write_event_log(*event_log);
  return r;
}

std::vector<std::map<BlockAddr, Block>> write_sets(const Trace& trace) {
  std::vector<std::map<BlockAddr, Block>> out;
  out.reserve(trace.txs.size());
  for (const TraceTx& tx : trace.txs) {
    std::map<BlockAddr, Block> ws;
    for (const TraceOp& op : tx.ops) {
      if (op.kind == OpKind::kWrite) ws[op.addr] = op.data;
    }
    out.push_back(std::move(ws));
  }
  return out;
}

std::map<BlockAddr, Block> oracle_replay(const std::map<BlockAddr, Block>& initial,
                                         const std::vector<const std::map<BlockAddr, Block>*>& committed) {
  std::map<BlockAddr, Block> img = initial;
  for (const auto* ws : committed) {
    for (const auto& [addr, data] : *ws) img[addr] = data;
  }
  for (auto it = img.begin(); it != img.end();) {
    if (it->second == Block{}) {
      it = img.erase(it);
    } else {
      ++it;
    }
  }
  return img;
}

namespace {

void save_artifacts(const std::string& dir, const SweepSummary& s, std::uint64_t k,
                    const PersistentImage& crash_image, const RunResult& r) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  const std::string stem = dir + "/crash_" + s.protocol + "_sd" + std::to_string(s.sd) + "_k" +
                           std::to_string(k);
  crash_image.dump(stem + ".img");
  std::ofstream out(stem + ".ndjson");
  for (std::uint64_t i = 0; i < k; ++i) {
    const PersistRecord& p = r.records[r.completion_order[i] - 1];
    nlohmann::json j = {{"order", i + 1},
                        {"id", p.id},
                        {"kind", persist_kind_name(p.kind)},
                        {"region", p.region == Region::kHome ? "home" : "log"},
                        {"index", p.index},
                        {"bank", p.bank},
                        {"issue", p.issue_time},
                        {"complete", p.complete_time},
                        {"data", to_hex(p.data)}};
    out << j.dump() << '\n';
  }
}

}  // namespace

SweepSummary crash_sweep(const EngineConfig& config, const Trace& trace, const SweepOptions& options) {
  EngineConfig cfg = config;
  cfg.keep_records = true;
  const RunResult r = run(cfg, trace, true);
  SweepSummary s;
  s.protocol = protocol_name(cfg.mode);
  s.sd = cfg.sd;
  s.total_persists = r.completion_order.size();

  const auto sets = write_sets(trace);
  std::map<std::pair<std::uint16_t, TxId>, std::uint64_t> seq_of;
  for (const TxSummary& t : r.history) {
    if (t.window_seq) seq_of[{*t.window_seq, t.txid}] = t.seq;
  }

  std::vector<std::uint64_t> points;
  if (options.points) {
    points = *options.points;
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
  } else {
    for (std::uint64_t k = 0; k <= s.total_persists; ++k) points.push_back(k);
  }

  // Transactions before a completed truncation live only in the home area.
  std::map<PersistId, std::uint64_t> position;
  for (std::size_t i = 0; i < r.completion_order.size(); ++i) position[r.completion_order[i]] = i + 1;

  PersistentImage img = r.start_image;
  std::uint64_t applied = 0;
  for (std::uint64_t k : points) {
    if (k > s.total_persists) continue;
    while (applied < k) {
      const PersistRecord& p = r.records[r.completion_order[applied] - 1];
      img.write(p.region, p.index, p.data);
      ++applied;
    }
    CrashPointResult c;
    c.k = k;
    if (k > 0) c.last_kind = r.records[r.completion_order[k - 1] - 1].kind;
    PersistentImage rec = img;
    std::string why;
    std::set<std::uint64_t> recovered;
    try {
      const RecoveryReport rep = recover(rec);
      for (const RecoveredTx& t : rep.committed) {
        auto it = seq_of.find({t.window_seq, t.txid});
        if (it == seq_of.end()) {
          why = "recovered unknown tx " + std::to_string(t.txid);
          break;
        }
        recovered.insert(it->second);
      }
    } catch (const std::exception& e) {
      why = std::string("recovery threw: ") + e.what();
    }
    std::uint64_t base = 0;
    for (const Truncation& t : r.truncations) {
      if (position.at(t.head) <= k) base = std::max(base, t.first_kept_seq);
    }
    for (const TxSummary& t : r.history) {
      if (t.seq < base && t.state == TxState::kCommitted && t.has_writes) recovered.insert(t.seq);
    }
    c.recovered = recovered.size();
    if (why.empty()) {
      const std::uint64_t top = recovered.empty() ? 0 : *recovered.rbegin() + 1;
      for (const TxSummary& t : r.history) {
        const bool in = recovered.count(t.seq) > 0;
        if (in && t.state != TxState::kCommitted) {
          why = "recovered non-committed tx seq " + std::to_string(t.seq);
        } else if (!in && t.seq < top && t.state == TxState::kCommitted && t.has_writes) {
          why = "committed set not prefix-closed at seq " + std::to_string(t.seq);
        } else if (t.durable && t.ack_order <= k && t.has_writes) {
          ++c.acked;
          if (!in) why = "acknowledged tx seq " + std::to_string(t.seq) + " lost";
        }
        if (!why.empty()) break;
      }
    }
    if (why.empty()) {
      std::vector<const std::map<BlockAddr, Block>*> committed;
      for (std::uint64_t seq : recovered) committed.push_back(&sets[seq]);
      const auto expect = oracle_replay(trace.initial, committed);
      if (rec.normalized_home() != expect) why = "recovered home differs from oracle replay";
    }
    c.pass = why.empty();
    c.failure = why;
    ++s.points;
    if (!c.pass) {
      ++s.failures;
      save_artifacts(options.artifact_dir, s, k, img, r);
    }
    if (!c.pass || options.keep_all) s.results.push_back(std::move(c));
  }
  return s;
}

std::vector<std::uint64_t> stratified_points(const RunResult& run, std::size_t random_fill,
                                             std::uint64_t seed) {
  std::set<std::uint64_t> pts{0, run.completion_order.size()};
  for (std::size_t i = 0; i < run.completion_order.size(); ++i) {
    const PersistKind kind = run.records[run.completion_order[i] - 1].kind;
    if (kind != PersistKind::kData && kind != PersistKind::kCheckpoint) {
      pts.insert(i);
      pts.insert(i + 1);
    }
  }
  std::mt19937_64 g(seed);
  for (std::size_t i = 0; i < random_fill && !run.completion_order.empty(); ++i) {
    pts.insert(g() % (run.completion_order.size() + 1));
  }
  return {pts.begin(), pts.end()};
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepSummary>& sweeps) {
  out << "protocol,sd,k,last_kind,recovered,acked,pass,failure\n";
  for (const SweepSummary& s : sweeps) {
    for (const CrashPointResult& c : s.results) {
      out << s.protocol << ',' << s.sd << ',' << c.k << ','
          << (c.k == 0 ? "none" : persist_kind_name(c.last_kind)) << ',' << c.recovered << ','
          << c.acked << ',' << (c.pass ? 1 : 0) << ',' << '"' << c.failure << '"' << '\n';
    }
  }
}

}  // namespace locsim
