#pragma once

// Privileged view of a tree for checkers and tests. Only meaningful when the
// caller knows nothing else is restructuring the tree.

#include <algorithm>
#include <utility>
#include <vector>

#include "mvtree/tree.hpp"

namespace mvtree::detail {

struct TreeAccess {
  template <typename Tree>
  static InternalNode* entry(Tree& t) noexcept {
    return t.entry_;
  }

  template <typename Tree>
  static Node* root(Tree& t) noexcept {
    return t.entry_->child(0);
  }

  template <typename Tree>
  static typename Tree::Leaf* leftmost_leaf(Tree& t) noexcept {
    return t.leftmost_leaf();
  }

  template <typename Tree>
  static GlobalVersion& global_version(Tree& t) noexcept {
    return t.gv_;
  }

  template <typename Tree>
  static OngoingScans& scans(Tree& t) noexcept {
    return t.scans_;
  }

  template <typename Tree>
  static EpochReclaimer& reclaimer(Tree& t) noexcept {
    return t.reclaim_;
  }

  /// Locks `leaf` and runs compaction on it.
  template <typename Tree>
  static int clean_leaf(Tree& t, typename Tree::Leaf& leaf) {
    auto pin = t.reclaim_.pin(this_thread_slot());
    auto guard = leaf.lock().acquire();
    return t.clean_obsolete_keys(leaf);
  }

  template <typename Tree>
  static void fix_tagged(Tree& t, InternalNode* tagged) {
    auto pin = t.reclaim_.pin(this_thread_slot());
    t.fix_tagged(tagged);
  }
  template <typename Tree>
  static void fix_underfull(Tree& t, Node* node) {
    auto pin = t.reclaim_.pin(this_thread_slot());
    t.fix_underfull(node);
  }
  /// Writes `key` into a vacant slot of `leaf`, bypassing every rule. For
  /// negative tests of the invariant checker.
  template <typename Tree>
  static void plant_key(Tree& t, typename Tree::Leaf& leaf, Key key,
                        typename Tree::Value value) {
    auto guard = leaf.lock().acquire();
    const int i = leaf.first_empty_slot();
    if (i < 0) return;
    auto* cell = new typename Tree::Cell{key, std::move(value), t.gv_.read()};
    ModifyWindow window{leaf.version()};
    leaf.fill_slot(i, cell);
  }
};

}  // namespace mvtree::detail

namespace mvtree::verify {

/// (key, value) visible at `version` for every key, ascending, read straight
/// from the leaves. Quiescent use, or with other threads only parked.
template <typename Tree>
std::vector<std::pair<Key, typename Tree::Value>> collect_at_version(
    Tree& tree, Version version) {
  using mvtree::detail::TreeAccess;
  std::vector<std::pair<Key, typename Tree::Value>> out;
  auto& gv = TreeAccess::global_version(tree);
  for (auto* leaf = TreeAccess::leftmost_leaf(tree); leaf != nullptr;
       leaf = leaf->right()) {
    for (int i = 0; i < leaf->capacity(); ++i) {
      if (leaf->key_at(i) == kEmptyKey) continue;
      const auto* entry = help_and_get_value_by_version(*leaf->cell_at(i), version, gv);
      if (entry != nullptr && entry->value.has_value())
        out.emplace_back(leaf->key_at(i), *entry->value);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  return out;
}

}  // namespace mvtree::verify
