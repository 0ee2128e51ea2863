#pragma once

/// \file
/// Structural checker for a quiescent tree.

#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvtree/verify/access.hpp"

namespace mvtree::verify {

struct Violation {
  std::string invariant;
  std::string node;
  std::string witness;
};

struct InvariantReport {
  std::vector<Violation> violations;
  std::size_t tagged_nodes = 0;
  std::size_t underfull_nodes = 0;
  std::size_t leaves = 0;
  std::size_t internal_nodes = 0;
  /// Present keys (latest value not a tombstone).
  std::size_t live_keys = 0;
  /// Occupied leaf slots, tombstones included.
  std::size_t stored_keys = 0;
  /// Untagged internal levels above the leaves.
  int height = 0;

  [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
  [[nodiscard]] std::string summary() const;
};

inline std::string InvariantReport::summary() const {
  std::ostringstream out;
  out << "leaves=" << leaves << " internal=" << internal_nodes
      << " height=" << height << " live_keys=" << live_keys
      << " stored_keys=" << stored_keys << " tagged=" << tagged_nodes
      << " underfull=" << underfull_nodes << " violations=" << violations.size();
  for (const auto& v : violations)
    out << "\n  [" << v.invariant << "] " << v.node << ": " << v.witness;
  return out.str();
}

namespace detail {

inline std::string describe(const Node* n) {
  std::ostringstream out;
  out << (n->is_leaf() ? "leaf" : (n->is_tagged() ? "tagged" : "internal")) << '@'
      << static_cast<const void*>(n) << "(search_key=" << n->search_key() << ')';
  return out.str();
}

template <typename Tree>
class InvariantChecker {
 public:
  using Leaf = typename Tree::Leaf;

  InvariantChecker(Tree& tree, bool strict) : tree_{tree}, strict_{strict} {}

  InvariantReport run() {
    auto* entry = mvtree::detail::TreeAccess::entry(tree_);
    if (entry->is_marked()) add("entry", entry, "entry sentinel is marked");
    if (entry->size() != 1 || !entry->keys().empty())
      add("entry", entry, "entry sentinel must have one child and no keys");
    Node* root = entry->child(0);
    std::optional<int> leaf_depth;
    walk(root, true, std::nullopt, std::nullopt, 0, leaf_depth);
    report_.height = leaf_depth.value_or(0);
    check_leaf_list();
    return std::move(report_);
  }

 private:
  void add(const char* invariant, const Node* n, std::string witness) {
    report_.violations.push_back({invariant, describe(n), std::move(witness)});
  }

  // Key range of a node is [lo, hi); nullopt is unbounded.
  void walk(Node* n, bool is_root, std::optional<Key> lo, std::optional<Key> hi,
            int depth, std::optional<int>& leaf_depth) {
    const int a = tree_.options().a;
    const int b = tree_.options().b;
    if (n->is_marked()) add("reachable-unmarked", n, "reachable node is marked");
    if (n->lock().is_locked()) add("quiescent", n, "lock held at quiescence");
    if (n->is_leaf()) {
      auto* leaf = static_cast<Leaf*>(n);
      in_order_leaves_.push_back(leaf);
      ++report_.leaves;
      if (leaf_depth && *leaf_depth != depth)
        add("shape", n,
            "leaf at depth " + std::to_string(depth) + ", expected " +
                std::to_string(*leaf_depth));
      if (!leaf_depth) leaf_depth = depth;
      if (leaf->size() > b) add("shape", n, "leaf over capacity");
      if (!is_root && leaf->size() < a) underfull(n);
      check_leaf(*leaf, lo, hi);
      return;
    }

    auto* in = static_cast<InternalNode*>(n);
    ++report_.internal_nodes;
    const auto& keys = in->keys();
    if (static_cast<int>(keys.size()) + 1 != in->size())
      add("shape", n, "key count is not child count - 1");
    if (in->size() > b) add("shape", n, "more than b children");
    if (in->is_tagged()) {
      ++report_.tagged_nodes;
      if (strict_) add("shape", n, "tagged node remains");
      if (in->size() != 2) add("shape", n, "tagged node without exactly two children");
    } else if (is_root) {
      if (in->size() < 2) add("shape", n, "internal root with fewer than two children");
    } else if (in->size() < a) {
      underfull(n);
    }
    for (std::size_t i = 0; i + 1 < keys.size(); ++i)
      if (!(keys[i] < keys[i + 1]))
        add("search-tree", n, "routing keys not strictly increasing");
    for (Key k : keys) {
      if ((lo && k < *lo) || (hi && k >= *hi))
        add("key-range", n, "routing key " + std::to_string(k) + " outside node range");
    }
    // Tagged nodes do not count as a level.
    const int child_depth = in->is_tagged() ? depth : depth + 1;
    for (int i = 0; i < in->size(); ++i) {
      const auto child_lo =
          i == 0 ? lo : std::optional<Key>{keys[static_cast<std::size_t>(i) - 1]};
      const auto child_hi = i + 1 == in->size()
                                ? hi
                                : std::optional<Key>{keys[static_cast<std::size_t>(i)]};
      Node* c = in->child(i);
      if (c == nullptr) {
        add("shape", n, "null child " + std::to_string(i));
        continue;
      }
      walk(c, false, child_lo, child_hi, child_depth, leaf_depth);
    }
  }

  void underfull(const Node* n) {
    ++report_.underfull_nodes;
    if (strict_) add("shape", n, "underfull node remains");
  }

  void check_leaf(Leaf& leaf, std::optional<Key> lo, std::optional<Key> hi) {
    if (LeafVersion::is_odd(leaf.version().load()))
      add("quiescent", &leaf, "leaf version is odd");
    int occupied = 0;
    for (int i = 0; i < leaf.capacity(); ++i) {
      const Key k = leaf.key_at(i);
      const auto* cell = leaf.cell_at(i);
      if (k == kEmptyKey) {
        if (cell != nullptr) add("slot", &leaf, "vacant slot with a cell");
        continue;
      }
      ++occupied;
      if (cell == nullptr) {
        add("slot", &leaf, "key " + std::to_string(k) + " without a cell");
        continue;
      }
      if (cell->key() != k)
        add("slot", &leaf, "slot key " + std::to_string(k) + " holds a cell of key " +
                               std::to_string(cell->key()));
      if ((lo && k < *lo) || (hi && k >= *hi))
        add("key-range", &leaf, "key " + std::to_string(k) + " outside leaf range");
      if (auto [it, fresh] = owner_.emplace(k, &leaf); !fresh)
        add("uniqueness", &leaf,
            "key " + std::to_string(k) + " also stored in " + describe(it->second));
      check_cell(leaf, *cell);
    }
    if (occupied != leaf.size())
      add("slot", &leaf,
          "size " + std::to_string(leaf.size()) + " but " + std::to_string(occupied) +
              " occupied slots");
    report_.stored_keys += static_cast<std::size_t>(occupied);
  }

  void check_cell(const Leaf& leaf, const typename Tree::Cell& cell) {
    const auto* head = cell.latest();
    const auto latest = head->version.load();
    if (latest == kPendingVersion || latest == kDeferredVersion) {
      add("version", &leaf, "key " + std::to_string(cell.key()) + " has an unassigned version");
      return;
    }
    if (head->value.has_value()) ++report_.live_keys;
    auto previous = latest;
    for (const auto* e = head->older.load(); e != nullptr; e = e->older.load()) {
      const auto v = e->version.load();
      if (v > latest || v > previous || v == kPendingVersion)
        add("version", &leaf,
            "key " + std::to_string(cell.key()) + " history version " + std::to_string(v) +
                " above newer version " + std::to_string(previous));
      previous = v;
    }
  }

  void check_leaf_list() {
    if (in_order_leaves_.empty()) return;
    auto* first = mvtree::detail::TreeAccess::leftmost_leaf(tree_);
    if (first != in_order_leaves_.front())
      add("leaf-list", first, "leftmost leaf differs from the tree's first leaf");
    if (first->left() != nullptr) add("leaf-list", first, "leftmost leaf has a left link");
    std::size_t i = 0;
    const Leaf* prev = nullptr;
    std::optional<Key> prev_max;
    std::set<const Leaf*> seen;
    for (const Leaf* l = in_order_leaves_.front(); l != nullptr; l = l->right()) {
      if (!seen.insert(l).second) {
        add("leaf-list", l, "cycle in right links");
        return;
      }
      if (i >= in_order_leaves_.size() || in_order_leaves_[i] != l) {
        add("leaf-list", l, "right links diverge from in-order leaves at position " +
                                std::to_string(i));
        return;
      }
      if (l->left() != prev) add("leaf-list", l, "left link is not the previous leaf");
      std::optional<Key> lo_key;
      std::optional<Key> hi_key;
      for (int s = 0; s < l->capacity(); ++s) {
        const Key k = l->key_at(s);
        if (k == kEmptyKey) continue;
        if (!lo_key || k < *lo_key) lo_key = k;
        if (!hi_key || k > *hi_key) hi_key = k;
      }
      if (lo_key && prev_max && !(*prev_max < *lo_key))
        add("leaf-list", l, "keys not greater than every key of the left neighbour");
      if (hi_key) prev_max = hi_key;
      prev = l;
      ++i;
    }
    if (i != in_order_leaves_.size())
      add("leaf-list", in_order_leaves_[i], "right links stop before the last leaf");
  }

  Tree& tree_;
  bool strict_;
  InvariantReport report_;
  std::vector<Leaf*> in_order_leaves_;
  std::unordered_map<Key, const Leaf*> owner_;
};

}  // namespace detail

/// Checks a quiescent tree: (a,b)-tree shape with equal untagged depth, key
/// ranges and search-tree order, key uniqueness, leaf-list order and
/// connectivity, reachable nodes unmarked, slot/cell consistency and history
/// version order. In strict mode any remaining tagged or underfull node is a
/// violation; otherwise they are only counted.
template <typename Tree>
InvariantReport check_invariants(Tree& tree, bool strict = true) {
  return detail::InvariantChecker<Tree>{tree, strict}.run();
}

}  // namespace mvtree::verify
