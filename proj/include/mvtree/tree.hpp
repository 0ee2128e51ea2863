#pragma once

/// \file
/// Concurrent ordered set with linearizable range scans.
///
/// A leaf-oriented relaxed (a,b)-tree. Finds are lock-free and validate leaf
/// reads with the leaf version counter. Scans are wait-free: they take a
/// version from the global counter and read each key's value as of that
/// version from the key's history, so they never validate or retry. Inserts
/// and deletes lock the target leaf, and for structural changes also its
/// parent, grandparent and list neighbours.
///
/// Deletion is logical: the key's latest value becomes empty (a tombstone) with
/// a fresh version. Tombstones are removed physically when an insert finds its
/// leaf full and no ongoing scan can still need them.

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mvtree/hooks.hpp"
#include "mvtree/node.hpp"
#include "mvtree/node_key.hpp"
#include "mvtree/reclaim.hpp"
#include "mvtree/sync.hpp"
#include "mvtree/thread_slot.hpp"
#include "mvtree/version_store.hpp"

namespace mvtree {

namespace detail {
struct TreeAccess;
}  // namespace detail

struct TreeOptions {
  /// Minimum node size; 2 <= a <= b / 2.
  int a = 2;
  /// Maximum node size (leaf slots, internal children).
  int b = 256;
  /// Threads whose process-wide slot id is at or above this limit cannot use
  /// the tree.
  std::size_t max_threads = 128;
  /// Drop history entries that no ongoing scan can read once a key's history
  /// grows past `prune_threshold`.
  bool prune_history = true;
  std::size_t prune_threshold = 16;
};

/// Validates `options`; throws std::invalid_argument.
inline void validate(const TreeOptions& options) {
  if (options.a < 2 || options.b < 2 * options.a)
    throw std::invalid_argument{"tree parameters need 2 <= a <= b/2"};
  if (options.max_threads == 0 || options.max_threads > kMaxThreadSlots)
    throw std::invalid_argument{"max_threads out of range"};
}

template <typename V>
struct ScanResult {
  /// Ascending by key.
  std::vector<std::pair<Key, V>> entries;
  /// Version the scan read at.
  Version version = 0;

  [[nodiscard]] std::size_t size() const noexcept { return entries.size(); }
  [[nodiscard]] std::vector<Key> keys() const {
    std::vector<Key> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.first);
    return out;
  }
  [[nodiscard]] std::vector<V> values() const {
    std::vector<V> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.second);
    return out;
  }
};

/// Outcome of an optimistic single-leaf lookup.
template <typename V>
struct LeafLookup {
  /// Key present in the leaf, tombstone or not.
  bool found = false;
  /// Latest value; empty when absent or deleted.
  std::optional<V> value;
};

template <typename V, typename Hooks = NoHooks>
class VersionedAbTree {
 public:
  using Value = V;
  using Leaf = LeafNode<V>;
  using Cell = ValueCell<V>;
  using Entry = VersionedValue<V>;

  explicit VersionedAbTree(TreeOptions options = {}, Hooks hooks = {})
      : options_{(validate(options), options)},
        hooks_{std::move(hooks)},
        scans_{options.max_threads},
        reclaim_{options.max_threads} {
    std::vector<Node*> root{new Leaf{options_.b, 0}};
    entry_ = new InternalNode{{}, root, 0};
  }

  VersionedAbTree(const VersionedAbTree&) = delete;
  VersionedAbTree& operator=(const VersionedAbTree&) = delete;

  ~VersionedAbTree() {
    reclaim_.drain_all();
    destroy_subtree(entry_);
  }

  [[nodiscard]] const TreeOptions& options() const noexcept { return options_; }
  Hooks& hooks() noexcept { return hooks_; }
  [[nodiscard]] const GlobalVersion& global_version() const noexcept {
    return gv_;
  }

  /// Latest value of `key`, or empty if the key is absent.
  std::optional<V> find(Key key) {
    check_key(key);
    auto pin = reclaim_.pin(slot());
    const auto path = search(key);
    return search_leaf(*static_cast<Leaf*>(path.node), key).value;
  }

  /// Adds `key` with `value` if the key is absent and returns empty. If the
  /// key is present, leaves it unchanged and returns its value.
  std::optional<V> insert(Key key, V value) {
    check_key(key);
    auto pin = reclaim_.pin(slot());
    return update(key, std::optional<V>{std::move(value)});
  }

  /// Deletes `key` and returns the value it had, or empty if it was absent.
  std::optional<V> remove(Key key) {
    check_key(key);
    auto pin = reclaim_.pin(slot());
    return update(key, std::nullopt);
  }

  /// Every present key in [low, high] with its value, as of a single instant.
  ScanResult<V> scan(Key low, Key high) {
    if (low > high) throw std::invalid_argument{"scan bounds out of order"};
    const auto self = slot();
    auto pin = reclaim_.pin(self);

    auto* record = new ScanData{low, high};
    scans_.publish(self, record);
    hooks_.at(HookPoint::kScanPublished, {low, 0, false});
    ScanResult<V> result;
    result.version = OngoingScans::new_version(*record, gv_);
    hooks_.at(HookPoint::kScanVersionAssigned, {low, result.version, false});

    std::vector<std::pair<Key, V>> batch;
    batch.reserve(static_cast<std::size_t>(options_.b));
    auto* leaf = static_cast<Leaf*>(search(low).node);
    while (leaf != nullptr) {
      batch.clear();
      const bool more = scan_leaf(*leaf, result.version, low, high, batch);
      std::sort(batch.begin(), batch.end(),
                [](const auto& x, const auto& y) { return x.first < y.first; });
      for (auto& kv : batch) result.entries.push_back(std::move(kv));
      if (!more) break;
      leaf = leaf->right();
    }

    scans_.publish(self, nullptr);
    reclaim_.retire(self, record);
    return result;
  }

  /// Root-to-leaf descent for `key` that stops early at `target`. No locks,
  /// no writes. The caller must be pinned.
  PathInfo search(Key key, const Node* target = nullptr) const noexcept {
    PathInfo p;
    p.parent = entry_;
    p.node = entry_->child(0);
    while (!p.node->is_leaf() && p.node != target) {
      auto* in = static_cast<InternalNode*>(p.node);
      const int i = in->route(key);
      p.grandparent = p.parent;
      p.parent_index = p.node_index;
      p.parent = in;
      p.node = in->child(i);
      p.node_index = i;
    }
    return p;
  }

  /// Double-collect read of `key` in `leaf`. A value still carrying the
  /// deferred version of an unfinished splitting insert reads as absent.
  LeafLookup<V> search_leaf(const Leaf& leaf, Key key) const {
    Backoff backoff;
    for (;;) {
      const auto before = leaf.version().read_begin();
      if (LeafVersion::is_odd(before)) {
        backoff.pause();
        continue;
      }
      LeafLookup<V> out;
      bool deferred = false;
      const int i = leaf.find_slot(key);
      if (i >= 0) {
        if (const Cell* cell = leaf.cell_at(i); cell != nullptr) {
          const Entry* latest = cell->latest();
          deferred = latest->version.load(std::memory_order_acquire) ==
                     kDeferredVersion;
          out.found = true;
          out.value = latest->value;
        }
      }
      if (!leaf.version().read_validate(before)) continue;
      if (deferred) return {};
      return out;
    }
  }

  /// Physically removes every tombstone that no ongoing scan can read, then
  /// repairs the leaves it shrank. Safe to run concurrently with other
  /// operations. Returns the number of keys removed.
  std::size_t compact() {
    auto pin = reclaim_.pin(slot());
    std::size_t removed = 0;
    for (Leaf* leaf = leftmost_leaf(); leaf != nullptr;) {
      auto guard = leaf->lock().acquire();
      if (leaf->is_marked()) {
        // Replaced meanwhile; restart from where its keys now live.
        const Key resume = leaf->search_key();
        guard.reset();
        leaf = static_cast<Leaf*>(search(resume).node);
        continue;
      }
      const int n = clean_obsolete_keys(*leaf);
      removed += static_cast<std::size_t>(n);
      Leaf* next = leaf->right();
      const bool underfull = n > 0 && leaf->size() < options_.a;
      guard.reset();
      if (underfull) fix_underfull(leaf);
      leaf = next;
    }
    return removed;
  }

  /// Repeats tag removal and underfull repair until the tree is a strict
  /// (a,b)-tree. Quiescent use only.
  void drain_maintenance() {
    auto pin = reclaim_.pin(slot());
    for (std::size_t round = 0;; ++round) {
      Node* work = find_maintenance_work(entry_->child(0), true);
      if (work == nullptr) return;
      if (round == kMaxDrainRounds)
        throw std::logic_error{"maintenance did not converge"};
      if (work->is_tagged())
        fix_tagged(static_cast<InternalNode*>(work));
      else
        fix_underfull(work);
    }
  }

  /// Number of present keys. Exact only at quiescence.
  [[nodiscard]] std::size_t size_estimate() {
    auto pin = reclaim_.pin(slot());
    std::size_t n = 0;
    for (Leaf* leaf = leftmost_leaf(); leaf != nullptr; leaf = leaf->right()) {
      for (int i = 0; i < leaf->capacity(); ++i) {
        if (leaf->key_at(i) == kEmptyKey) continue;
        const Cell* cell = leaf->cell_at(i);
        if (cell == nullptr) continue;
        const Entry* latest = cell->latest();
        if (latest->value.has_value() &&
            latest->version.load(std::memory_order_acquire) != kDeferredVersion)
          ++n;
      }
    }
    return n;
  }

 private:
  friend struct detail::TreeAccess;


  static constexpr std::size_t kMaxDrainRounds = 10'000'000;

  static void check_key(Key key) {
    if (key == kEmptyKey) throw std::invalid_argument{"reserved key"};
  }

  std::size_t slot() const {
    const auto s = this_thread_slot();
    if (s >= options_.max_threads)
      throw std::length_error{"thread slot exceeds the tree's max_threads"};
    return s;
  }

  Leaf* leftmost_leaf() const noexcept {
    Node* n = entry_->child(0);
    while (!n->is_leaf()) n = static_cast<InternalNode*>(n)->child(0);
    return static_cast<Leaf*>(n);
  }

  template <typename T>
  void retire(T* p) {
    reclaim_.retire(this_thread_slot(), p);
  }

  void retire_node(Node* n) {
    if (n->is_leaf())
      retire(static_cast<Leaf*>(n));
    else
      retire(static_cast<InternalNode*>(n));
  }

  static int node_size(const Node* n) noexcept {
    return n->is_leaf() ? static_cast<const Leaf*>(n)->size()
                        : static_cast<const InternalNode*>(n)->size();
  }

  // -- updates ---------------------------------------------------------------

  /// Shared body of insert (`value` set) and delete (`value` empty).
  std::optional<V> update(Key key, std::optional<V> value) {
    const bool inserting = value.has_value();
    Backoff backoff;
    for (;;) {
      const auto path = search(key);
      auto* leaf = static_cast<Leaf*>(path.node);
      auto seen = search_leaf(*leaf, key);
      if (inserting && seen.value.has_value()) return seen.value;
      if (!inserting && !seen.value.has_value()) return std::nullopt;

      auto leaf_guard = leaf->lock().acquire();
      if (leaf->is_marked()) continue;

      const auto [allowed, index] = can_update_key_in_index(key, value, *leaf);
      if (allowed) {
        std::optional<V> previous = leaf->cell_at(index)->latest()->value;
        update_key_in_index(index, std::move(value), *leaf);
        return inserting ? std::nullopt : previous;
      }
      if (index >= 0) {
        // Present, and the transition is a no-op: a live key for an insert,
        // a tombstone for a delete.
        return inserting ? leaf->cell_at(index)->latest()->value : std::nullopt;
      }
      if (!inserting) return std::nullopt;

      if (insert_key(key, value, *leaf) == InsertCode::kSuccess)
        return std::nullopt;
      if (clean_obsolete_keys(*leaf) > 0) {
        [[maybe_unused]] const auto code = insert_key(key, value, *leaf);
        assert(code == InsertCode::kSuccess);
        const bool underfull = leaf->size() < options_.a;
        leaf_guard.reset();
        if (underfull) fix_underfull(leaf);
        return std::nullopt;
      }

      // Splitting insert.
      InternalNode* parent = path.parent;
      auto parent_guard = parent->lock().acquire();
      if (parent->is_marked() || parent->child(path.node_index) != leaf) {
        continue;
      }
      LockGuard left_guard;
      LockGuard right_guard;
      if (!lock_leaf_neighbours(*leaf, *leaf, *parent, path.node_index,
                                path.node_index, left_guard, right_guard)) {
        parent_guard.reset();
        leaf_guard.reset();
        backoff.pause();
        continue;
      }
      InternalNode* tagged = create_tagged_internal_node(
          key, std::move(value), *leaf, path.node_index, *parent);
      right_guard.reset();
      left_guard.reset();
      parent_guard.reset();
      leaf_guard.reset();
      fix_tagged(tagged);
      return std::nullopt;
    }
  }

  /// Locks the outer list neighbours of the adjacent leaves first..last
  /// (children `first_index`..`last_index` of `parent`) unless they are
  /// siblings under `parent`, whose lock already covers them. Non-blocking,
  /// since these locks fall outside the usual order. On false nothing extra
  /// is held and the caller should release its locks and retry.
  bool lock_leaf_neighbours(const Leaf& first, const Leaf& last,
                            const InternalNode& parent, int first_index,
                            int last_index, LockGuard& left_guard,
                            LockGuard& right_guard) {
    Leaf* left = first.left();
    if (left != nullptr &&
        !(first_index > 0 && parent.child(first_index - 1) == left)) {
      left_guard = left->lock().try_acquire();
      if (!left_guard.owns_lock() || left->is_marked() ||
          left->right() != &first) {
        left_guard.reset();
        return false;
      }
    }
    Leaf* right = last.right();
    if (right != nullptr && !(last_index + 1 < parent.size() &&
                              parent.child(last_index + 1) == right)) {
      right_guard = right->lock().try_acquire();
      if (!right_guard.owns_lock() || right->is_marked() ||
          right->left() != &last) {
        right_guard.reset();
        left_guard.reset();
        return false;
      }
    }
    return true;
  }

  /// Stamps the pending latest value of `cell` with the current version,
  /// unless a reader helped first. Leaf lock held.
  void stamp_latest(Cell& cell) {
    const auto version = gv_.read();
    hooks_.at(HookPoint::kUpdateVersionRead, {cell.key(), version, false});
    const bool won = cell.cas_latest_version(version);
    const auto final_version = cell.latest_version();
    hooks_.at(HookPoint::kUpdateVersionCas, {cell.key(), final_version, won});
    hooks_.at(HookPoint::kUpdateInstalled,
              {cell.key(), final_version, cell.latest()->value.has_value()});
  }

 public:
  // Leaf-level steps. The caller holds the leaf's lock.

  /// kRetry: the leaf has no vacant slot.
  enum class InsertCode { kSuccess, kRetry };

  /// Where `value` may replace the latest value of `key` in `leaf`: only a
  /// tombstone may become a value and only a value may become a tombstone.
  /// Returns (allowed, slot index or -1 if the key is absent).
  std::pair<bool, int> can_update_key_in_index(Key key,
                                               const std::optional<V>& value,
                                               const Leaf& leaf) const {
    const int i = leaf.find_slot(key);
    if (i < 0) return {false, -1};
    const bool deleted = !leaf.cell_at(i)->latest()->value.has_value();
    return {deleted == value.has_value(), i};
  }

  /// Archives the key's latest value and installs `value` with a new version.
  /// Returns the new latest value.
  std::optional<V> update_key_in_index(int index, std::optional<V> value,
                                       Leaf& leaf) {
    Cell* cell = leaf.cell_at(index);
    {
      ModifyWindow window{leaf.version()};
      cell->put_new_value(std::move(value), gv_);
      stamp_latest(*cell);
    }
    if (options_.prune_history &&
        cell->history_length() > options_.prune_threshold) {
      if (auto* chain =
              cell->detach_history_below(scans_.min_ongoing_scan_version(gv_)))
        reclaim_.retire(this_thread_slot(), chain,
                        [](void* p) { Cell::free_chain(static_cast<Entry*>(p)); });
    }
    return cell->latest()->value;
  }

  /// Places a new key in the first vacant slot of `leaf`.
  InsertCode insert_key(Key key, const std::optional<V>& value, Leaf& leaf) {
    const int i = leaf.first_empty_slot();
    if (i < 0) return InsertCode::kRetry;
    auto* cell = new Cell{key, value};
    ModifyWindow window{leaf.version()};
    leaf.fill_slot(i, cell);
    stamp_latest(*cell);
    return InsertCode::kSuccess;
  }

  /// Removes tombstones whose deletion version no ongoing scan is older than.
  /// Returns the number removed.
  int clean_obsolete_keys(Leaf& leaf) {
    const auto min_version = scans_.min_ongoing_scan_version(gv_);
    hooks_.at(HookPoint::kCompactionMinVersion, {0, min_version, false});
    int removed = 0;
    for (int i = 0; i < leaf.capacity(); ++i) {
      const Key key = leaf.key_at(i);
      if (key == kEmptyKey) continue;
      Cell* cell = leaf.cell_at(i);
      const Entry* latest = help_and_get_value_by_version(*cell, kLatestVersion, gv_);
      if (latest == nullptr || latest->value.has_value()) continue;
      const auto version = latest->version.load(std::memory_order_seq_cst);
      if (version > min_version) continue;
      {
        ModifyWindow window{leaf.version()};
        leaf.clear_slot(i);
      }
      hooks_.at(HookPoint::kCompactionRemove, {key, version, false});
      retire(cell);
      ++removed;
    }
    return removed;
  }

  /// Collects (key, value as of `version`) for keys of `leaf` in [low, high]
  /// into `out`. No locks, no validation. Returns false once a key above
  /// `high` was seen, meaning the scan is done after this leaf.
  bool scan_leaf(const Leaf& leaf, Version version, Key low, Key high,
                 std::vector<std::pair<Key, V>>& out) {
    bool more = true;
    for (int i = 0; i < leaf.capacity(); ++i) {
      const Key key = leaf.key_at(i);
      if (key == kEmptyKey) continue;
      if (key > high) {
        more = false;
        continue;
      }
      if (key < low) continue;
      const Cell* cell = leaf.cell_at(i);
      // A vacated or recycled slot; neither cell belongs to this read.
      if (cell == nullptr || cell->key() != key) continue;
      bool helped = false;
      const Entry* entry = help_and_get_value_by_version(*cell, version, gv_, &helped);
      if (helped)
        hooks_.at(HookPoint::kHelpCas, {key, cell->latest_version(), true});
      if (entry != nullptr && entry->value.has_value())
        out.emplace_back(key, *entry->value);
    }
    return more;
  }

 private:
  /// Replaces the full `leaf` (child `index` of `parent`) by a tagged node
  /// over two fresh leaves sharing its keys plus the new one. Leaf, parent and
  /// non-sibling neighbours locked.
  InternalNode* create_tagged_internal_node(Key key, std::optional<V> value,
                                            Leaf& leaf, int index,
                                            InternalNode& parent);

  // -- rebalancing (rebalance_impl.hpp) ---------------------------------------

  void fix_tagged(InternalNode* tagged);
  void fix_underfull(Node* node);
  Node* find_maintenance_work(Node* node, bool is_root) const;

  struct Collected {
    std::vector<std::pair<Key, Cell*>> cells;  // leaves
    std::vector<Node*> children;               // internal nodes
    std::vector<Key> keys;                     // internal routing keys
  };
  static Collected collect_pair(Node* left, Node* right, Key separator);
  Leaf* build_leaf(std::span<const std::pair<Key, Cell*>> cells, Key fallback);
  static Node* build_internal(std::span<Node* const> children,
                              std::vector<Key> keys);

  void destroy_subtree(Node* n) noexcept {
    if (n->is_leaf()) {
      auto* leaf = static_cast<Leaf*>(n);
      for (int i = 0; i < leaf->capacity(); ++i)
        if (leaf->key_at(i) != kEmptyKey) delete leaf->cell_at(i);
      delete leaf;
      return;
    }
    auto* in = static_cast<InternalNode*>(n);
    for (int i = 0; i < in->size(); ++i) destroy_subtree(in->child(i));
    delete in;
  }

  const TreeOptions options_;
  [[no_unique_address]] Hooks hooks_;
  GlobalVersion gv_;
  OngoingScans scans_;
  mutable EpochReclaimer reclaim_;
  InternalNode* entry_ = nullptr;
};

}  // namespace mvtree

#include "mvtree/detail/rebalance_impl.hpp"
