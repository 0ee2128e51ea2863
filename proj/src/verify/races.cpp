#include "mvtree/verify/races.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "mvtree/tree.hpp"
#include "mvtree/verify/history.hpp"
#include "mvtree/verify/model.hpp"
#include "mvtree/verify/scripted_hooks.hpp"

namespace mvtree::verify {

namespace {

using ScriptedTree = VersionedAbTree<Value, ScriptedHooks>;

Entries to_entries(const ScanResult<Value>& r) { return {r.entries.begin(), r.entries.end()}; }

std::string entries_string(const Entries& e) {
  return OpResult{std::nullopt, e}.to_string(OpKind::kScan);
}

// Collects failure messages; the outcome passes when there are none.
class Expect {
 public:
  void that(bool condition, const std::string& message) {
    if (!condition) failures_ << message << '\n';
  }
  ScenarioOutcome finish(std::string name, const ScriptedHooks& hooks) const {
    ScenarioOutcome out{std::move(name), failures_.str().empty(), {}};
    if (!out.passed) out.trace = failures_.str() + "--- hook trace ---\n" + hooks.trace();
    return out;
  }

 private:
  std::ostringstream failures_;
};

enum class UpdateKind { kInsertNew, kDelete, kReinsert };

const char* update_name(UpdateKind kind) {
  switch (kind) {
    case UpdateKind::kInsertNew: return "insert-new";
    case UpdateKind::kDelete: return "delete";
    case UpdateKind::kReinsert: return "reinsert";
  }
  return "?";
}

struct UpdateSchedule {
  UpdateKind kind;
  int pre_scans;
  bool covering;
  int stalled_scans;
  /// Arm the stall; false runs the same steps without pausing.
  bool scripted = true;

  [[nodiscard]] std::string name() const {
    std::ostringstream out;
    out << "update-race/" << update_name(kind) << "/pre" << pre_scans << '/'
        << (covering ? "covering" : "disjoint") << "/scans" << stalled_scans;
    if (!scripted) out << "/unscripted";
    return out.str();
  }
};

constexpr Key kRaceKey = 4;
constexpr Value kRaceValue = 777;

struct UpdateRunResult {
  std::optional<Value> returned;
  std::vector<ScanResult<Value>> stalled;
  Entries final_contents;
  std::optional<Value> final_find;
};

// Tree holding 2, 4, 6 in one leaf (b = 8); for a reinsert, 4 is deleted
// first. The updater works on key 4.
template <typename Tree>
void prepare(Tree& tree, SequentialModel& model, UpdateKind kind) {
  for (Key k : {2, 6}) {
    tree.insert(k, k * 10);
    model.insert(k, k * 10);
  }
  if (kind != UpdateKind::kInsertNew) {
    tree.insert(kRaceKey, kRaceKey * 10);
    model.insert(kRaceKey, kRaceKey * 10);
  }
  if (kind == UpdateKind::kReinsert) {
    tree.remove(kRaceKey);
    model.remove(kRaceKey);
  }
}

template <typename Tree>
std::optional<Value> do_update(Tree& tree, UpdateKind kind) {
  return kind == UpdateKind::kDelete ? tree.remove(kRaceKey)
                                     : tree.insert(kRaceKey, kRaceValue);
}

ScenarioOutcome run_update_schedule(const UpdateSchedule& s) {
  ScriptedHooks hooks;
  ScriptedTree tree{{.a = 2, .b = 8}, hooks};
  SequentialModel before;
  prepare(tree, before, s.kind);
  SequentialModel after = before;
  const auto expected_return = s.kind == UpdateKind::kDelete
                                   ? after.remove(kRaceKey)
                                   : after.insert(kRaceKey, kRaceValue);

  for (int i = 0; i < s.pre_scans; ++i) tree.scan(100, 200);
  hooks.clear_events();

  const Key low = s.covering ? 1 : 50;
  const Key high = s.covering ? 10 : 60;
  Expect expect;
  UpdateRunResult r;

  if (s.scripted) hooks.arm(HookPoint::kUpdateVersionRead, kRaceKey);
  std::thread updater{[&] {
    ScriptedHooks::set_thread_tag(1);
    r.returned = do_update(tree, s.kind);
  }};
  ScriptedHooks::set_thread_tag(0);
  if (s.scripted) {
    if (!hooks.wait_until_parked()) {
      expect.that(false, "updater never reached the stall point");
      hooks.release();
      updater.join();
      return expect.finish(s.name(), hooks);
    }
  } else {
    updater.join();
  }
  const Version read_version = s.scripted ? hooks.parked_event()->event.version : 0;
  for (int i = 0; i < s.stalled_scans; ++i) r.stalled.push_back(tree.scan(low, high));
  if (s.scripted) {
    hooks.release();
    updater.join();
  }

  r.final_find = tree.find(kRaceKey);
  r.final_contents = to_entries(tree.scan(kMinClientKey, kMaxClientKey));

  // Exactly one compare-exchange moved the value from pending.
  int winners = 0;
  std::optional<Version> installed;
  for (const auto& e : hooks.events()) {
    if (e.event.key != kRaceKey) continue;
    if ((e.point == HookPoint::kUpdateVersionCas || e.point == HookPoint::kHelpCas) &&
        e.event.flag)
      ++winners;
    if (e.point == HookPoint::kUpdateInstalled) installed = e.event.version;
  }
  expect.that(winners == 1, "expected one winning compare-exchange, saw " +
                                std::to_string(winners));
  expect.that(installed.has_value(), "no install event");
  expect.that(r.returned == expected_return, "updater returned the wrong value");
  expect.that(r.final_find == after.find(kRaceKey), "find after the race disagrees");
  expect.that(r.final_contents == after.scan(kMinClientKey, kMaxClientKey),
              "final contents " + entries_string(r.final_contents) + " expected " +
                  entries_string(after.scan(kMinClientKey, kMaxClientKey)));

  for (const auto& scan : r.stalled) {
    // Legal outcomes: the scan is ordered before or after the update, decided
    // by the value's final version.
    const bool sees_update = installed && *installed <= scan.version;
    const auto expected = (sees_update ? after : before).scan(low, high);
    expect.that(to_entries(scan) == expected,
                "scan at version " + std::to_string(scan.version) + " returned " +
                    entries_string(to_entries(scan)) + ", expected " +
                    entries_string(expected));
    if (s.scripted) {
      // The updater read its version before this scan incremented the
      // counter, so a scan that helped ordered itself before the update.
      expect.that(read_version <= scan.version, "scan version below the updater's read");
    }
  }
  if (s.scripted && s.covering) {
    int helps = 0;
    for (const auto& e : hooks.events())
      if (e.point == HookPoint::kHelpCas && e.event.key == kRaceKey && e.event.flag) ++helps;
    expect.that(helps == 1, "covering scan did not help the stalled update");
    expect.that(installed && *installed > r.stalled.front().version,
                "helped version not newer than the helping scan");
  }
  return expect.finish(s.name(), hooks);
}

struct ScanSchedule {
  int deletes_before;
  int deletes_after;
  int extra_scans;

  [[nodiscard]] std::string name() const {
    std::ostringstream out;
    out << "scan-race/before" << deletes_before << "/after" << deletes_after << "/extra"
        << extra_scans;
    return out.str();
  }
};

ScenarioOutcome run_scan_schedule(const ScanSchedule& s) {
  ScriptedHooks hooks;
  ScriptedTree tree{{.a = 2, .b = 8}, hooks};
  SequentialModel model;
  for (Key k = 1; k <= 12; ++k) {
    tree.insert(k, k * 10);
    model.insert(k, k * 10);
  }
  tree.drain_maintenance();
  hooks.clear_events();
  Expect expect;

  hooks.arm(HookPoint::kScanPublished);
  std::optional<ScanResult<Value>> stalled;
  std::thread scanner{[&] {
    ScriptedHooks::set_thread_tag(1);
    stalled = tree.scan(1, 12);
  }};
  ScriptedHooks::set_thread_tag(0);
  if (!hooks.wait_until_parked()) {
    expect.that(false, "scan never reached the stall point");
    hooks.release();
    scanner.join();
    return expect.finish(s.name(), hooks);
  }

  std::set<Key> removed_before;
  for (Key k = 1; k <= s.deletes_before; ++k) {
    tree.remove(k);
    model.remove(k);
    removed_before.insert(k);
  }
  // The snapshot the stalled scan must return: compaction assigns its
  // version now, after the deletes above.
  const auto snapshot = model.scan(1, 12);
  tree.compact();

  std::optional<Version> helped;
  for (const auto& e : hooks.events())
    if (e.point == HookPoint::kCompactionMinVersion) {
      helped = e.event.version;
      break;
    }

  std::set<Key> removed_after;
  for (Key k = 6; k < 6 + s.deletes_after; ++k) {
    tree.remove(k);
    model.remove(k);
    removed_after.insert(k);
  }
  tree.compact();
  for (int i = 0; i < s.extra_scans; ++i) {
    const auto now = tree.scan(1, 12);
    expect.that(to_entries(now) == model.scan(1, 12), "extra scan disagrees with the model");
    expect.that(helped && now.version > *helped, "extra scan did not get a newer version");
  }

  hooks.release();
  scanner.join();

  expect.that(helped.has_value(), "compaction did not report a minimum version");
  expect.that(stalled.has_value(), "stalled scan returned nothing");
  if (helped && stalled) {
    expect.that(stalled->version == *helped,
                "scan version " + std::to_string(stalled->version) +
                    " differs from the version compaction assigned, " + std::to_string(*helped));
    expect.that(to_entries(*stalled) == snapshot,
                "stalled scan returned " + entries_string(to_entries(*stalled)) +
                    ", expected " + entries_string(snapshot));
  }
  for (const auto& e : hooks.events()) {
    if (e.point != HookPoint::kCompactionRemove) continue;
    expect.that(helped && e.event.version <= *helped,
                "compaction removed key " + std::to_string(e.event.key) +
                    " deleted after the protected version");
    expect.that(removed_before.count(e.event.key) == 1,
                "compaction removed key " + std::to_string(e.event.key) +
                    " that the stalled scan may read");
  }
  // Once the scan is gone the later tombstones go too.
  tree.compact();
  expect.that(to_entries(tree.scan(1, 12)) == model.scan(1, 12),
              "contents after the race disagree with the model");
  return expect.finish(s.name(), hooks);
}

std::vector<UpdateSchedule> update_schedules(bool scripted) {
  std::vector<UpdateSchedule> out;
  for (auto kind : {UpdateKind::kInsertNew, UpdateKind::kDelete, UpdateKind::kReinsert})
    for (int pre = 0; pre <= 2; ++pre)
      for (bool covering : {true, false})
        for (int scans = 1; scans <= 2; ++scans)
          out.push_back({kind, pre, covering, scans, scripted});
  return out;
}

}  // namespace

std::vector<ScenarioOutcome> run_update_race_scenarios() {
  std::vector<ScenarioOutcome> out;
  for (const auto& s : update_schedules(true)) out.push_back(run_update_schedule(s));
  return out;
}

std::vector<ScenarioOutcome> run_scan_race_scenarios() {
  std::vector<ScenarioOutcome> out;
  for (int before = 0; before <= 3; ++before)
    for (int after = 0; after <= 2; ++after)
      for (int extra = 0; extra <= 1; ++extra)
        out.push_back(run_scan_schedule({before, after, extra}));
  return out;
}

std::vector<ScenarioOutcome> run_unscripted_baseline() {
  std::vector<ScenarioOutcome> out;
  for (const auto& s : update_schedules(false)) {
    auto outcome = run_update_schedule(s);
    // Same steps on a tree without instrumentation must give the same answers.
    VersionedAbTree<Value> plain{{.a = 2, .b = 8}};
    SequentialModel model;
    prepare(plain, model, s.kind);
    for (int i = 0; i < s.pre_scans; ++i) plain.scan(100, 200);
    const bool same_return =
        do_update(plain, s.kind) == (s.kind == UpdateKind::kDelete
                                         ? model.remove(kRaceKey)
                                         : model.insert(kRaceKey, kRaceValue));
    const Key low = s.covering ? 1 : 50;
    const Key high = s.covering ? 10 : 60;
    bool same_scans = true;
    for (int i = 0; i < s.stalled_scans; ++i)
      same_scans = same_scans && to_entries(plain.scan(low, high)) == model.scan(low, high);
    if (!same_return || !same_scans) {
      outcome.passed = false;
      outcome.trace += "uninstrumented tree gave different results\n";
    }
    out.push_back(std::move(outcome));
  }
  return out;
}

std::vector<ScenarioOutcome> run_race_scenarios() {
  auto out = run_update_race_scenarios();
  auto scans = run_scan_race_scenarios();
  out.insert(out.end(), scans.begin(), scans.end());
  return out;
}

}  // namespace mvtree::verify
