#include <gtest/gtest.h>

#include <map>
#include <random>

#include "mvtree/tree.hpp"
#include "mvtree/verify/access.hpp"
#include "mvtree/verify/history.hpp"
#include "mvtree/verify/invariants.hpp"
#include "mvtree/verify/model.hpp"
#include "mvtree/verify/races.hpp"
#include "mvtree/verify/recorder.hpp"
#include "mvtree/verify/stress.hpp"

namespace {

using namespace mvtree::verify;
using mvtree::Key;
using mvtree::TreeOptions;
using mvtree::detail::TreeAccess;

Operation find_op(Key k) { return {OpKind::kFind, k, 0, 0}; }
Operation insert_op(Key k, Value v) { return {OpKind::kInsert, k, 0, v}; }
Operation remove_op(Key k) { return {OpKind::kRemove, k, 0, 0}; }
Operation scan_op(Key lo, Key hi) { return {OpKind::kScan, lo, hi, 0}; }

OpResult value(std::optional<Value> v) { return {v, {}}; }
OpResult entries(Entries e) { return {std::nullopt, std::move(e)}; }

class HistoryBuilder {
 public:
  HistoryBuilder& invoke(int thread, Operation op) {
    h_.events.push_back({thread, true, op, {}, ++clock_});
    pending_[thread] = op;
    return *this;
  }
  HistoryBuilder& ret(int thread, OpResult result) {
    h_.events.push_back({thread, false, pending_.at(thread), std::move(result), ++clock_});
    return *this;
  }
  HistoryBuilder& op(int thread, Operation o, OpResult result) {
    return invoke(thread, o).ret(thread, std::move(result));
  }
  [[nodiscard]] const History& history() const { return h_; }

 private:
  History h_;
  std::uint64_t clock_ = 0;
  std::map<int, Operation> pending_;
};

TEST(Model, MirrorsSetContract) {
  SequentialModel m;
  EXPECT_EQ(m.insert(5, 50), std::nullopt);
  EXPECT_EQ(m.insert(5, 51), 50);
  EXPECT_EQ(m.find(5), 50);
  EXPECT_EQ(m.insert(7, 70), std::nullopt);
  EXPECT_EQ(m.scan(1, 6), (Entries{{5, 50}}));
  EXPECT_EQ(m.scan(5, 7), (Entries{{5, 50}, {7, 70}}));
  EXPECT_EQ(m.remove(5), 50);
  EXPECT_EQ(m.remove(5), std::nullopt);
  EXPECT_EQ(m.size(), 1U);
}

TEST(Model, VersionLogSnapshots) {
  VersionLog log;
  log.preload(1, 10);
  log.record(2, 3, 20, 1);
  log.record(1, 5, std::nullopt, 2);
  log.record(2, 5, 21, 3);
  log.record(3, 7, 30, 4);
  EXPECT_EQ(log.snapshot_at(0), (Entries{{1, 10}}));
  EXPECT_EQ(log.snapshot_at(4), (Entries{{1, 10}, {2, 20}}));
  EXPECT_EQ(log.snapshot_at(5), (Entries{{2, 21}}));
  EXPECT_EQ(log.snapshot_at(9), (Entries{{2, 21}, {3, 30}}));
  EXPECT_EQ(log.snapshot_at(9, 3, 3), (Entries{{3, 30}}));
}

TEST(Model, EqualVersionsOrderedBySequence) {
  VersionLog log;
  log.record(4, 2, 1, 1);
  log.record(4, 2, std::nullopt, 2);
  EXPECT_TRUE(log.snapshot_at(2).empty());
}

TEST(Lincheck, SingleThreadIsIdentityOrder) {
  HistoryBuilder h;
  h.op(0, insert_op(1, 10), value(std::nullopt))
      .op(0, find_op(1), value(10))
      .op(0, scan_op(1, 4), entries({{1, 10}}))
      .op(0, remove_op(1), value(10));
  ASSERT_TRUE(well_formed(h.history()));
  const auto r = check_linearizable(h.history());
  ASSERT_TRUE(r.linearizable) << r.explanation;
  EXPECT_EQ(r.order, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Lincheck, InsertConcurrentWithFind) {
  HistoryBuilder h;
  h.invoke(1, insert_op(5, 1)).invoke(2, find_op(5)).ret(2, value(1)).ret(1, value(std::nullopt));
  const auto r = check_linearizable(h.history());
  ASSERT_TRUE(r.linearizable) << r.explanation;
  const auto ops = complete_operations(h.history());
  ASSERT_EQ(r.order.size(), 2U);
  EXPECT_EQ(ops[r.order[0]].op.kind, OpKind::kInsert);
}

TEST(Lincheck, FindBeforeInsertSeesNothing) {
  HistoryBuilder h;
  h.op(2, find_op(5), value(1)).op(1, insert_op(5, 1), value(std::nullopt));
  const auto r = check_linearizable(h.history());
  EXPECT_FALSE(r.linearizable);
  EXPECT_FALSE(r.explanation.empty());
}

TEST(Lincheck, ScanOmittingPresentKeyIsRejected) {
  // Forged from the model: after the inserts complete, the model's scan
  // would return both keys; the recorded scan drops one.
  SequentialModel model;
  model.insert(1, 1);
  model.insert(2, 2);
  HistoryBuilder h;
  h.op(0, insert_op(1, 1), value(std::nullopt)).op(0, insert_op(2, 2), value(std::nullopt));
  Entries forged = model.scan(1, 4);
  ASSERT_EQ(forged.size(), 2U);
  forged.erase(forged.begin());
  h.invoke(1, scan_op(1, 4)).invoke(2, remove_op(3)).ret(2, value(std::nullopt));
  h.ret(1, entries(forged));
  const auto r = check_linearizable(h.history());
  EXPECT_FALSE(r.linearizable);
  EXPECT_FALSE(r.explanation.empty());
}

TEST(Lincheck, ConcurrentScanMaySeeEitherState) {
  HistoryBuilder h;
  h.op(0, insert_op(1, 1), value(std::nullopt));
  h.invoke(0, remove_op(1)).invoke(1, scan_op(1, 4)).ret(1, entries({{1, 1}})).ret(0, value(1));
  EXPECT_TRUE(check_linearizable(h.history()).linearizable);
}

TEST(Lincheck, InitialModelIsUsed) {
  SequentialModel initial;
  initial.insert(3, 30);
  HistoryBuilder h;
  h.op(0, find_op(3), value(30));
  EXPECT_TRUE(check_linearizable(h.history(), initial).linearizable);
  EXPECT_FALSE(check_linearizable(h.history()).linearizable);
}

TEST(Lincheck, SizeBoundIsEnforced) {
  HistoryBuilder h;
  for (std::size_t i = 0; i <= kMaxCheckedOperations; ++i) h.op(0, find_op(1), value(std::nullopt));
  EXPECT_THROW(check_linearizable(h.history()), std::length_error);
}

TEST(Lincheck, MalformedHistoryIsDetected) {
  History h;
  h.events.push_back({0, false, find_op(1), {}, 1});
  std::string why;
  EXPECT_FALSE(well_formed(h, &why));
  EXPECT_FALSE(why.empty());
  EXPECT_THROW(complete_operations(h), std::invalid_argument);
  HistoryBuilder twice;
  twice.invoke(0, find_op(1)).invoke(0, find_op(2));
  EXPECT_FALSE(well_formed(twice.history()));
}

TEST(Recorder, OneThreadThreeOps) {
  RecordConfig c;
  c.threads = 1;
  c.ops_per_thread = 3;
  const auto h = record_history(c);
  EXPECT_EQ(h.events.size(), 6U);
  EXPECT_TRUE(well_formed(h));
}

TEST(Recorder, ThreeThreadsFiveOps) {
  RecordConfig c;
  c.threads = 3;
  c.ops_per_thread = 5;
  const auto h = record_history(c);
  EXPECT_EQ(h.events.size(), 30U);
  std::string why;
  EXPECT_TRUE(well_formed(h, &why)) << why;
  std::map<int, bool> expect_invoke;
  for (const auto& e : h.events) {
    auto [it, fresh] = expect_invoke.emplace(e.thread, true);
    EXPECT_EQ(e.invoke, it->second);
    it->second = !it->second;
  }
  EXPECT_EQ(expect_invoke.size(), 3U);
}

TEST(Recorder, RecordedRunsAreLinearizableSnapshots) {
  for (std::uint64_t s = 1; s <= 100; ++s) {
    RecordConfig c;
    c.threads = 2 + static_cast<int>(s % 3);
    c.seed = s;
    c.prefill = static_cast<Key>(s % 3);
    const auto run = record_run(c);
    ASSERT_TRUE(run.error.empty()) << run.error;
    const auto r = check_linearizable(run.history, run.initial);
    ASSERT_TRUE(r.linearizable) << "seed " << s << ": " << r.explanation;
    EXPECT_EQ(check_scan_snapshots(run), "") << "seed " << s;
  }
}

TEST(Recorder, SnapshotCheckCatchesWrongScan) {
  RecordConfig c;
  c.scan_percent = 100;
  c.prefill = 2;
  auto run = record_run(c);
  ASSERT_FALSE(run.scans.empty());
  EXPECT_EQ(check_scan_snapshots(run), "");
  run.scans.front().result.emplace_back(99, 99);
  EXPECT_NE(check_scan_snapshots(run), "");
}

TEST(Invariants, FreshAndSeededTreesAreClean) {
  mvtree::VersionedAbTree<int> empty{TreeOptions{.a = 2, .b = 4}};
  EXPECT_TRUE(check_invariants(empty).ok());
  mvtree::VersionedAbTree<int> tree{TreeOptions{.a = 2, .b = 8}};
  std::mt19937_64 rng{3};
  std::uniform_int_distribution<Key> key{1, 1000};
  for (int i = 0; i < 500; ++i) tree.insert(key(rng), i);
  const auto r = check_invariants(tree);
  EXPECT_TRUE(r.ok()) << r.summary();
  EXPECT_EQ(r.live_keys, tree.scan(1, 1000).size());
}

TEST(Invariants, DuplicateKeyAcrossLeavesIsReported) {
  mvtree::VersionedAbTree<int> tree{TreeOptions{.a = 2, .b = 4}};
  for (Key k : {1, 3, 5, 7, 4}) tree.insert(k, 0);
  auto* right = TreeAccess::leftmost_leaf(tree)->right();
  ASSERT_NE(right, nullptr);
  TreeAccess::plant_key(tree, *right, 1, 0);
  const auto r = check_invariants(tree);
  ASSERT_FALSE(r.ok());
  bool uniqueness = false;
  for (const auto& v : r.violations) {
    uniqueness |= v.invariant == "uniqueness";
    EXPECT_FALSE(v.node.empty());
    EXPECT_FALSE(v.witness.empty());
  }
  EXPECT_TRUE(uniqueness) << r.summary();
}

TEST(Invariants, KeyOutsideLeafRangeIsReported) {
  mvtree::VersionedAbTree<int> tree{TreeOptions{.a = 2, .b = 4}};
  for (Key k : {1, 3, 5, 7, 4}) tree.insert(k, 0);
  TreeAccess::plant_key(tree, *TreeAccess::leftmost_leaf(tree), 9, 0);
  const auto r = check_invariants(tree);
  bool range = false;
  for (const auto& v : r.violations) range |= v.invariant == "key-range";
  EXPECT_TRUE(range) << r.summary();
}

TEST(Invariants, ShortStressDrainsClean) {
  StressConfig c;
  c.threads = 8;
  c.seconds = 1.0;
  const auto out = run_stress(c);
  EXPECT_TRUE(out.report.ok()) << out.report.summary();
  EXPECT_EQ(out.malformed_scans, 0U);
  EXPECT_GT(out.operations, 0U);
  EXPECT_EQ(out.report.tagged_nodes, 0U);
  EXPECT_EQ(out.report.underfull_nodes, 0U);
}

TEST(Races, AllSchedulesPass) {
  const auto update = run_update_race_scenarios();
  const auto scan = run_scan_race_scenarios();
  const auto baseline = run_unscripted_baseline();
  EXPECT_GE(update.size(), 20U);
  EXPECT_GE(scan.size(), 20U);
  EXPECT_FALSE(baseline.empty());
  for (const auto* group : {&update, &scan, &baseline})
    for (const auto& o : *group) EXPECT_TRUE(o.passed) << o.name << "\n" << o.trace;
}

}  // namespace
