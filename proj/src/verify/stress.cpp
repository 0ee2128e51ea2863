#include "mvtree/verify/stress.hpp"

#include <atomic>
#include <barrier>
#include <chrono>
#include <random>
#include <thread>
#include <vector>

#include "mvtree/verify/model.hpp"

namespace mvtree::verify {

StressOutcome run_stress(const StressConfig& config) {
  VersionedAbTree<Value> tree{config.tree};
  std::atomic<bool> stop{false};
  std::barrier start{config.threads + 1};
  struct Counters {
    std::uint64_t ops = 0;
    std::uint64_t scans = 0;
    std::uint64_t malformed = 0;
  };
  std::vector<Counters> counters(static_cast<std::size_t>(config.threads));
  std::vector<std::thread> workers;
  for (int t = 0; t < config.threads; ++t) {
    workers.emplace_back([&, t] {
      std::mt19937_64 rng{config.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(t + 1))};
      std::uniform_int_distribution<Key> key{1, config.key_range};
      std::uniform_int_distribution<int> percent{0, 99};
      auto& c = counters[static_cast<std::size_t>(t)];
      start.arrive_and_wait();
      while (!stop.load(std::memory_order_relaxed)) {
        const int p = percent(rng);
        const Key k = key(rng);
        if (p < config.update_percent / 2) {
          tree.insert(k, k);
        } else if (p < config.update_percent) {
          tree.remove(k);
        } else if (p < config.update_percent + config.find_percent) {
          tree.find(k);
        } else {
          const auto r = tree.scan(k, k + config.scan_span - 1);
          ++c.scans;
          Key prev = k - 1;
          for (const auto& [sk, sv] : r.entries) {
            if (sk <= prev || sk > k + config.scan_span - 1 || sv != sk) {
              ++c.malformed;
              break;
            }
            prev = sk;
          }
        }
        ++c.ops;
      }
    });
  }
  start.arrive_and_wait();
  std::this_thread::sleep_for(std::chrono::duration<double>(config.seconds));
  stop.store(true);
  for (auto& w : workers) w.join();

  StressOutcome out;
  for (const auto& c : counters) {
    out.operations += c.ops;
    out.scans += c.scans;
    out.malformed_scans += c.malformed;
  }
  tree.drain_maintenance();
  out.report = check_invariants(tree, true);
  return out;
}

}  // namespace mvtree::verify
