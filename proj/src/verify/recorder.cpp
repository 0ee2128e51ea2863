#include "mvtree/verify/recorder.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mvtree/verify/scripted_hooks.hpp"

namespace mvtree::verify {

namespace {

using RecordingTree = VersionedAbTree<Value, ScriptedHooks>;

struct ThreadLog {
  std::vector<Event> events;
  std::vector<ScanObservation> scans;
  /// Operations that changed the set, in program order: key and new value.
  std::vector<std::pair<Key, std::optional<Value>>> changes;
};

Operation draw(std::mt19937_64& rng, const RecordConfig& config, int thread, int index) {
  std::uniform_int_distribution<Key> key{1, config.key_space};
  std::uniform_int_distribution<int> percent{0, 99};
  Operation op;
  op.key = key(rng);
  if (percent(rng) < config.scan_percent) {
    op.kind = OpKind::kScan;
    op.high = std::uniform_int_distribution<Key>{op.key, config.key_space}(rng);
    return op;
  }
  switch (std::uniform_int_distribution<int>{0, 2}(rng)) {
    case 0: op.kind = OpKind::kFind; break;
    case 1:
      op.kind = OpKind::kInsert;
      op.value = (thread + 1) * 1000 + index;
      break;
    default: op.kind = OpKind::kRemove; break;
  }
  return op;
}

void maybe_yield(std::mt19937_64& rng, bool enabled) {
  if (!enabled) return;
  const auto n = std::uniform_int_distribution<int>{0, 3}(rng);
  for (int i = 0; i < n; ++i) std::this_thread::yield();
}

}  // namespace

RecordedRun record_run(const RecordConfig& config) {
  if (config.threads < 1 || config.ops_per_thread < 0 || config.key_space < 1)
    throw std::invalid_argument{"bad record configuration"};
  ScriptedHooks hooks;
  RecordingTree tree{config.tree, hooks};
  RecordedRun run;
  for (Key k = 1; k <= config.prefill; ++k) {
    tree.insert(k, k * 10);
    run.initial.insert(k, k * 10);
    run.installs.preload(k, k * 10);
  }
  hooks.clear_events();

  std::atomic<std::uint64_t> clock{1};
  std::vector<ThreadLog> logs(static_cast<std::size_t>(config.threads));
  std::barrier start{config.threads};
  std::vector<std::thread> workers;
  for (int t = 0; t < config.threads; ++t) {
    workers.emplace_back([&, t] {
      ScriptedHooks::set_thread_tag(t);
      auto& log = logs[static_cast<std::size_t>(t)];
      std::mt19937_64 rng{config.seed * 1'000'003 + static_cast<std::uint64_t>(t)};
      start.arrive_and_wait();
      for (int i = 0; i < config.ops_per_thread; ++i) {
        const Operation op = draw(rng, config, t, i);
        maybe_yield(rng, config.yields);
        log.events.push_back({t, true, op, {}, clock.fetch_add(1)});
        OpResult result;
        Version scan_version = 0;
        switch (op.kind) {
          case OpKind::kFind: result.value = tree.find(op.key); break;
          case OpKind::kInsert:
            result.value = tree.insert(op.key, op.value);
            if (!result.value) log.changes.emplace_back(op.key, op.value);
            break;
          case OpKind::kRemove:
            result.value = tree.remove(op.key);
            if (result.value) log.changes.emplace_back(op.key, std::nullopt);
            break;
          case OpKind::kScan: {
            auto s = tree.scan(op.key, op.high);
            scan_version = s.version;
            result.entries.assign(s.entries.begin(), s.entries.end());
            break;
          }
        }
        log.events.push_back({t, false, op, result, clock.fetch_add(1)});
        if (op.kind == OpKind::kScan)
          log.scans.push_back({t, op.key, op.high, scan_version, result.entries});
        maybe_yield(rng, config.yields);
      }
    });
  }
  for (auto& w : workers) w.join();

  for (auto& log : logs) {
    run.history.events.insert(run.history.events.end(), log.events.begin(),
                              log.events.end());
    run.scans.insert(run.scans.end(), log.scans.begin(), log.scans.end());
  }
  std::sort(run.history.events.begin(), run.history.events.end(),
            [](const Event& x, const Event& y) { return x.timestamp < y.timestamp; });

  // Pair each thread's install events with its state-changing operations.
  std::vector<std::size_t> next(logs.size(), 0);
  for (const auto& r : hooks.events()) {
    if (r.point != HookPoint::kUpdateInstalled) continue;
    if (r.thread < 0 || r.thread >= config.threads) {
      run.error = "install event from an unknown thread";
      break;
    }
    const auto t = static_cast<std::size_t>(r.thread);
    if (next[t] >= logs[t].changes.size()) {
      run.error = "more installs than changing operations on thread " + std::to_string(t);
      break;
    }
    const auto& [key, value] = logs[t].changes[next[t]++];
    if (key != r.event.key || value.has_value() != r.event.flag) {
      run.error = "install event does not match operation on thread " + std::to_string(t);
      break;
    }
    run.installs.record(key, r.event.version, value, r.sequence + 1);
  }
  for (std::size_t t = 0; run.error.empty() && t < logs.size(); ++t)
    if (next[t] != logs[t].changes.size())
      run.error = "changing operation without install on thread " + std::to_string(t);
  return run;
}

History record_history(const RecordConfig& config) { return record_run(config).history; }

std::string check_scan_snapshots(const RecordedRun& run) {
  if (!run.error.empty()) return run.error;
  for (const auto& s : run.scans) {
    const auto expected = run.installs.snapshot_at(s.version, s.low, s.high);
    if (expected != s.result) {
      std::ostringstream out;
      out << "T" << s.thread << " scan(" << s.low << ", " << s.high << ") at version "
          << s.version << " returned " << OpResult{std::nullopt, s.result}.to_string(OpKind::kScan)
          << ", versions give "
          << OpResult{std::nullopt, expected}.to_string(OpKind::kScan);
      return out.str();
    }
  }
  return {};
}

}  // namespace mvtree::verify
