#pragma once

// Structural maintenance for VersionedAbTree: splitting inserts, tag removal,
// underfull repair. Included from tree.hpp.
//
// Every change builds fresh nodes, swings one child link in a locked parent
// (or grandparent), then marks and retires the replaced nodes. Blocking locks
// are taken bottom-up: leaves or same-level siblings left to right, then the
// parent, then the grandparent. List neighbours under a different parent are
// only try-locked.

#include <array>
#include <span>
#include <stdexcept>

#include "mvtree/tree.hpp"

namespace mvtree {

template <typename V, typename Hooks>
InternalNode* VersionedAbTree<V, Hooks>::create_tagged_internal_node(
    Key key, std::optional<V> value, Leaf& leaf, int index,
    InternalNode& parent) {
  // Until the new key is stamped below, readers treat it as absent and
  // scans never help it: the fresh leaves are reachable through the leaf
  // list before the parent link is written, so any earlier version could be
  // seen by a scan while finds still route to the old leaf.
  auto* fresh = new Cell{key, std::move(value), kDeferredVersion};

  std::vector<std::pair<Key, Cell*>> cells;
  cells.reserve(static_cast<std::size_t>(leaf.capacity()) + 1);
  for (int i = 0; i < leaf.capacity(); ++i)
    if (leaf.key_at(i) != kEmptyKey) cells.emplace_back(leaf.key_at(i), leaf.cell_at(i));
  cells.emplace_back(key, fresh);
  std::sort(cells.begin(), cells.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  const auto left_count = cells.size() / 2;
  const std::span<const std::pair<Key, Cell*>> all{cells};
  Leaf* lower = build_leaf(all.first(left_count), leaf.search_key());
  Leaf* upper = build_leaf(all.subspan(left_count), key);
  // Hold the fresh leaves until the new key is stamped, so no updater archives
  // a value that still has the deferred version.
  auto lower_guard = lower->lock().try_acquire();
  auto upper_guard = upper->lock().try_acquire();
  assert(lower_guard.owns_lock() && upper_guard.owns_lock());

  Leaf* left = leaf.left();
  Leaf* right = leaf.right();
  lower->set_left(left);
  lower->set_right(upper);
  upper->set_left(lower);
  upper->set_right(right);

  const Key separator = cells[left_count].first;
  const std::array<Node*, 2> halves{lower, upper};
  auto* tagged = new InternalNode{{separator}, halves, separator, true};

  if (left != nullptr) left->set_right(lower);
  if (right != nullptr) right->set_left(upper);
  parent.set_child(index, tagged);
  leaf.mark();

  const auto version = gv_.read();
  fresh->cas_latest_version(version, kDeferredVersion);
  hooks_.at(HookPoint::kUpdateInstalled, {key, version, true});
  retire(&leaf);
  return tagged;
}

template <typename V, typename Hooks>
typename VersionedAbTree<V, Hooks>::Leaf* VersionedAbTree<V, Hooks>::build_leaf(
    std::span<const std::pair<Key, Cell*>> cells, Key fallback) {
  auto* leaf = new Leaf{options_.b, cells.empty() ? fallback : cells.front().first};
  int i = 0;
  for (const auto& [k, cell] : cells) leaf->fill_slot(i++, cell);
  return leaf;
}

template <typename V, typename Hooks>
Node* VersionedAbTree<V, Hooks>::build_internal(std::span<Node* const> children,
                                                std::vector<Key> keys) {
  return new InternalNode{std::move(keys), children, children.front()->search_key()};
}

template <typename V, typename Hooks>
typename VersionedAbTree<V, Hooks>::Collected
VersionedAbTree<V, Hooks>::collect_pair(Node* left, Node* right, Key separator) {
  Collected out;
  if (left->is_leaf()) {
    for (auto* n : {static_cast<Leaf*>(left), static_cast<Leaf*>(right)})
      for (int i = 0; i < n->capacity(); ++i)
        if (n->key_at(i) != kEmptyKey) out.cells.emplace_back(n->key_at(i), n->cell_at(i));
    std::sort(out.cells.begin(), out.cells.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    return out;
  }
  auto* l = static_cast<InternalNode*>(left);
  auto* r = static_cast<InternalNode*>(right);
  out.children = l->children_snapshot();
  for (Node* c : r->children_snapshot()) out.children.push_back(c);
  out.keys = l->keys();
  out.keys.push_back(separator);
  out.keys.insert(out.keys.end(), r->keys().begin(), r->keys().end());
  return out;
}

template <typename V, typename Hooks>
void VersionedAbTree<V, Hooks>::fix_tagged(InternalNode* tagged) {
  for (;;) {
    if (tagged->is_marked()) return;
    const auto path = search(tagged->search_key(), tagged);
    if (path.node != tagged) return;
    InternalNode* parent = path.parent;

    auto tagged_guard = tagged->lock().acquire();
    if (tagged->is_marked()) return;
    auto parent_guard = parent->lock().acquire();
    if (parent->is_marked() || parent->child(path.node_index) != tagged) continue;

    if (parent == entry_) {
      // Tagged root: the tree simply grew by one level.
      const auto kids = tagged->children_snapshot();
      auto* root = new InternalNode{tagged->keys(), kids, tagged->search_key()};
      entry_->set_child(0, root);
      tagged->mark();
      retire(tagged);
      return;
    }
    if (parent->is_tagged()) {
      parent_guard.reset();
      tagged_guard.reset();
      fix_tagged(parent);
      continue;
    }

    InternalNode* grand = path.grandparent;
    auto grand_guard = grand->lock().acquire();
    if (grand->is_marked() || grand->child(path.parent_index) != parent) continue;

    const int at = path.node_index;
    std::vector<Key> keys = parent->keys();
    keys.insert(keys.begin() + at, tagged->keys().front());
    std::vector<Node*> children = parent->children_snapshot();
    children[static_cast<std::size_t>(at)] = tagged->child(0);
    children.insert(children.begin() + at + 1, tagged->child(1));

    if (static_cast<int>(children.size()) <= options_.b) {
      auto* absorbed = new InternalNode{std::move(keys), children, parent->search_key()};
      grand->set_child(path.parent_index, absorbed);
      parent->mark();
      tagged->mark();
      retire(parent);
      retire(tagged);
      const bool underfull = grand != entry_ && absorbed->size() < options_.a;
      grand_guard.reset();
      parent_guard.reset();
      tagged_guard.reset();
      if (underfull) fix_underfull(absorbed);
      return;
    }

    // Parent overflows: split it and push a tag one level up.
    const auto half = children.size() / 2;
    const std::span<Node* const> kids{children};
    Node* lower = build_internal(
        kids.first(half), std::vector<Key>(keys.begin(), keys.begin() + half - 1));
    Node* upper = build_internal(
        kids.subspan(half), std::vector<Key>(keys.begin() + half, keys.end()));
    const bool at_root = grand == entry_;
    const std::array<Node*, 2> halves{lower, upper};
    auto* top = new InternalNode{{keys[half - 1]}, halves, lower->search_key(), !at_root};
    grand->set_child(path.parent_index, top);
    parent->mark();
    tagged->mark();
    retire(parent);
    retire(tagged);
    if (at_root) return;
    tagged = top;
  }
}

template <typename V, typename Hooks>
void VersionedAbTree<V, Hooks>::fix_underfull(Node* node) {
  const int a = options_.a;
  Backoff backoff;
  for (;;) {
    if (node == entry_ || node->is_marked()) return;
    const auto path = search(node->search_key(), node);
    if (path.node != node) return;
    InternalNode* parent = path.parent;
    if (parent == entry_) return;  // root
    if (node_size(node) >= a) return;
    if (node->is_tagged()) {
      fix_tagged(static_cast<InternalNode*>(node));
      return;
    }
    if (parent->is_tagged()) {
      fix_tagged(parent);
      continue;
    }
    InternalNode* grand = path.grandparent;
    if (grand != entry_ && parent->size() < a) {
      // Repair the parent first; combining below it needs a sibling.
      fix_underfull(parent);
      continue;
    }
    assert(parent->size() >= 2);

    const int li = path.node_index == 0 ? 0 : path.node_index - 1;
    Node* left = parent->child(li);
    Node* right = parent->child(li + 1);

    auto left_guard = left->lock().acquire();
    auto right_guard = right->lock().acquire();
    if (node->is_marked()) return;
    if (left->is_marked() || right->is_marked()) continue;
    auto parent_guard = parent->lock().acquire();
    if (parent->is_marked() || parent->child(li) != left ||
        parent->child(li + 1) != right)
      continue;
    auto grand_guard = grand->lock().acquire();
    if (grand->is_marked() || grand->child(path.parent_index) != parent) continue;

    if (node_size(node) >= a) return;
    if (left->is_tagged() || right->is_tagged()) {
      auto* t = static_cast<InternalNode*>(left->is_tagged() ? left : right);
      grand_guard.reset();
      parent_guard.reset();
      right_guard.reset();
      left_guard.reset();
      fix_tagged(t);
      continue;
    }

    LockGuard outer_left;
    LockGuard outer_right;
    Leaf* l = nullptr;
    Leaf* r = nullptr;
    if (left->is_leaf()) {
      l = static_cast<Leaf*>(left);
      r = static_cast<Leaf*>(right);
      if (l->right() != r ||
          !lock_leaf_neighbours(*l, *r, *parent, li, li + 1, outer_left, outer_right)) {
        grand_guard.reset();
        parent_guard.reset();
        right_guard.reset();
        left_guard.reset();
        backoff.pause();
        continue;
      }
    }

    auto parts = collect_pair(left, right, parent->keys()[static_cast<std::size_t>(li)]);
    const int total = node_size(left) + node_size(right);
    std::vector<Key> parent_keys = parent->keys();
    std::vector<Node*> parent_children = parent->children_snapshot();

    if (total > 2 * a) {
      // Distribute: left gets floor(total / 2).
      Node* new_left;
      Node* new_right;
      Key separator;
      if (l != nullptr) {
        const std::span<const std::pair<Key, Cell*>> all{parts.cells};
        const auto half = all.size() / 2;
        Leaf* nl = build_leaf(all.first(half), l->search_key());
        Leaf* nr = build_leaf(all.subspan(half), r->search_key());
        separator = parts.cells[half].first;
        Leaf* outer_l = l->left();
        Leaf* outer_r = r->right();
        nl->set_left(outer_l);
        nl->set_right(nr);
        nr->set_left(nl);
        nr->set_right(outer_r);
        if (outer_l != nullptr) outer_l->set_right(nl);
        if (outer_r != nullptr) outer_r->set_left(nr);
        new_left = nl;
        new_right = nr;
      } else {
        const std::span<Node* const> kids{parts.children};
        const auto half = kids.size() / 2;
        new_left = build_internal(
            kids.first(half),
            std::vector<Key>(parts.keys.begin(), parts.keys.begin() + half - 1));
        new_right = build_internal(
            kids.subspan(half),
            std::vector<Key>(parts.keys.begin() + half, parts.keys.end()));
        separator = parts.keys[half - 1];
      }
      parent_keys[static_cast<std::size_t>(li)] = separator;
      parent_children[static_cast<std::size_t>(li)] = new_left;
      parent_children[static_cast<std::size_t>(li) + 1] = new_right;
      auto* new_parent = new InternalNode{std::move(parent_keys), parent_children,
                                          parent->search_key()};
      grand->set_child(path.parent_index, new_parent);
      left->mark();
      right->mark();
      parent->mark();
      retire_node(left);
      retire_node(right);
      retire(parent);
      return;
    }

    // Combine into one node.
    Node* merged;
    if (l != nullptr) {
      Leaf* m = build_leaf(parts.cells, l->search_key());
      Leaf* outer_l = l->left();
      Leaf* outer_r = r->right();
      m->set_left(outer_l);
      m->set_right(outer_r);
      if (outer_l != nullptr) outer_l->set_right(m);
      if (outer_r != nullptr) outer_r->set_left(m);
      merged = m;
    } else {
      merged = build_internal(parts.children, std::move(parts.keys));
    }

    if (grand == entry_ && parent->size() == 2) {
      // The root had only these two children; the merged node replaces it.
      entry_->set_child(0, merged);
      left->mark();
      right->mark();
      parent->mark();
      retire_node(left);
      retire_node(right);
      retire(parent);
      return;
    }

    parent_keys.erase(parent_keys.begin() + li);
    parent_children[static_cast<std::size_t>(li)] = merged;
    parent_children.erase(parent_children.begin() + li + 1);
    auto* new_parent =
        new InternalNode{std::move(parent_keys), parent_children, parent->search_key()};
    grand->set_child(path.parent_index, new_parent);
    left->mark();
    right->mark();
    parent->mark();
    retire_node(left);
    retire_node(right);
    retire(parent);

    outer_right.reset();
    outer_left.reset();
    grand_guard.reset();
    parent_guard.reset();
    right_guard.reset();
    left_guard.reset();
    fix_underfull(merged);
    fix_underfull(new_parent);
    return;
  }
}

template <typename V, typename Hooks>
Node* VersionedAbTree<V, Hooks>::find_maintenance_work(Node* node,
                                                       bool is_root) const {
  if (node->is_tagged()) return node;
  if (!is_root && node_size(node) < options_.a) return node;
  if (node->is_leaf()) return nullptr;
  auto* in = static_cast<const InternalNode*>(node);
  for (int i = 0; i < in->size(); ++i)
    if (Node* w = find_maintenance_work(in->child(i), false)) return w;
  return nullptr;
}

}  // namespace mvtree
