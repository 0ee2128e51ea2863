#include <algorithm>
#include <map>
#include <mutex>
#include <stdexcept>

#include "mvtree/bench/workload.hpp"
#include "mvtree/thread_slot.hpp"
#include "mvtree/tree.hpp"

namespace mvtree::bench {

namespace {

class TreeSet final : public ConcurrentSet {
 public:
  explicit TreeSet(TreeOptions options) : tree_{options} {}

  bool insert(Key key, std::int64_t value) override {
    return !tree_.insert(key, value).has_value();
  }
  bool remove(Key key) override { return tree_.remove(key).has_value(); }
  bool contains(Key key) override { return tree_.find(key).has_value(); }
  std::size_t scan(Key low, Key high) override { return tree_.scan(low, high).size(); }

 private:
  VersionedAbTree<std::int64_t> tree_;
};

class GlobalLockSet final : public ConcurrentSet {
 public:
  bool insert(Key key, std::int64_t value) override {
    std::lock_guard lock{mutex_};
    return map_.emplace(key, value).second;
  }
  bool remove(Key key) override {
    std::lock_guard lock{mutex_};
    return map_.erase(key) > 0;
  }
  bool contains(Key key) override {
    std::lock_guard lock{mutex_};
    return map_.count(key) > 0;
  }
  std::size_t scan(Key low, Key high) override {
    std::vector<std::pair<Key, std::int64_t>> out;
    std::lock_guard lock{mutex_};
    for (auto it = map_.lower_bound(low); it != map_.end() && it->first <= high; ++it)
      out.emplace_back(*it);
    return out.size();
  }

 private:
  std::mutex mutex_;
  std::map<Key, std::int64_t> map_;
};

}  // namespace

std::unique_ptr<ConcurrentSet> make_set(const std::string& structure, int a, int b,
                                        std::size_t max_threads) {
  if (structure == "tree") {
    TreeOptions options;
    options.a = a;
    options.b = b;
    options.max_threads = std::min(max_threads, kMaxThreadSlots);
    return std::make_unique<TreeSet>(options);
  }
  if (structure == "global-lock") return std::make_unique<GlobalLockSet>();
  throw std::invalid_argument{"unknown structure: " + structure};
}

}  // namespace mvtree::bench
