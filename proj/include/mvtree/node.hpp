#pragma once

/// \file
/// Tree vertices.
///
/// Internal nodes have immutable routing keys and mutable child links; adding
/// or removing a key means building a replacement node. Leaves keep their
/// keys unsorted in a fixed slot array with holes, so a simple insert or a
/// compaction touches a single slot. Leaves are also chained left to right,
/// and that chain is what range scans walk.

#include <algorithm>
#include <atomic>
#include <cassert>
#include <memory>
#include <span>
#include <vector>

#include "mvtree/node_key.hpp"
#include "mvtree/sync.hpp"
#include "mvtree/version_store.hpp"

namespace mvtree {

class Node {
 public:
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  [[nodiscard]] bool is_leaf() const noexcept { return is_leaf_; }
  [[nodiscard]] bool is_tagged() const noexcept { return tagged_; }
  [[nodiscard]] bool is_marked() const noexcept {
    return marked_.load(std::memory_order_acquire);
  }
  /// Lock holder only. Never undone.
  void mark() noexcept { marked_.store(true, std::memory_order_release); }

  /// A key inside this node's key range, fixed at construction. Used to find
  /// the node again from the root.
  [[nodiscard]] Key search_key() const noexcept { return search_key_; }

  [[nodiscard]] QueueLock& lock() noexcept { return lock_; }

 protected:
  Node(bool leaf, bool tagged, Key search_key) noexcept
      : is_leaf_{leaf}, tagged_{tagged}, search_key_{search_key} {}
  ~Node() = default;

 private:
  const bool is_leaf_;
  const bool tagged_;
  std::atomic<bool> marked_{false};
  const Key search_key_;
  QueueLock lock_;
};

/// Routing node: `keys().size() + 1 == size()` children. A tagged node always
/// has exactly two children and records a pending height imbalance.
class InternalNode final : public Node {
 public:
  InternalNode(std::vector<Key> keys, std::span<Node* const> children,
               Key search_key, bool tagged = false)
      : Node{false, tagged, search_key},
        keys_{std::move(keys)},
        size_{static_cast<int>(children.size())},
        children_{std::make_unique<std::atomic<Node*>[]>(children.size())} {
    assert(keys_.size() + 1 == children.size());
    assert(std::is_sorted(keys_.begin(), keys_.end()));
    assert(!tagged || children.size() == 2);
    for (std::size_t i = 0; i < children.size(); ++i)
      children_[i].store(children[i], std::memory_order_relaxed);
  }

  /// Number of children.
  [[nodiscard]] int size() const noexcept { return size_; }
  [[nodiscard]] const std::vector<Key>& keys() const noexcept { return keys_; }

  [[nodiscard]] Node* child(int i) const noexcept {
    return children_[i].load(std::memory_order_acquire);
  }
  /// Holder of this node's lock only.
  void set_child(int i, Node* n) noexcept {
    children_[i].store(n, std::memory_order_release);
  }

  /// Index of the child whose range holds `key`: keys >= a routing key go
  /// right of it.
  [[nodiscard]] int route(Key key) const noexcept {
    return static_cast<int>(std::upper_bound(keys_.begin(), keys_.end(), key) -
                            keys_.begin());
  }

  [[nodiscard]] int index_of(const Node* n) const noexcept {
    for (int i = 0; i < size_; ++i)
      if (child(i) == n) return i;
    return -1;
  }

  [[nodiscard]] std::vector<Node*> children_snapshot() const {
    std::vector<Node*> out(static_cast<std::size_t>(size_));
    for (int i = 0; i < size_; ++i) out[static_cast<std::size_t>(i)] = child(i);
    return out;
  }

 private:
  const std::vector<Key> keys_;
  const int size_;
  std::unique_ptr<std::atomic<Node*>[]> children_;
};

template <typename V>
struct LeafSlot {
  std::atomic<Key> key{kEmptyKey};
  std::atomic<ValueCell<V>*> cell{nullptr};
};

/// Leaf with `capacity` unsorted slots. A slot's key is kEmptyKey exactly when
/// it holds no cell. Cells are shared by reference with replacement leaves;
/// a leaf never owns the cells it points at.
template <typename V>
class LeafNode final : public Node {
 public:
  using Cell = ValueCell<V>;

  LeafNode(int capacity, Key search_key)
      : Node{true, false, search_key},
        capacity_{capacity},
        slots_{std::make_unique<LeafSlot<V>[]>(static_cast<std::size_t>(capacity))} {}

  [[nodiscard]] int capacity() const noexcept { return capacity_; }

  /// Occupied slots, including logically deleted keys.
  [[nodiscard]] int size() const noexcept {
    return size_.load(std::memory_order_acquire);
  }

  [[nodiscard]] Key key_at(int i) const noexcept {
    return slots_[i].key.load(std::memory_order_acquire);
  }
  [[nodiscard]] Cell* cell_at(int i) const noexcept {
    return slots_[i].cell.load(std::memory_order_acquire);
  }

  /// Lock holder only, inside a modify window (or before publication).
  void fill_slot(int i, Cell* cell) noexcept {
    slots_[i].cell.store(cell, std::memory_order_release);
    slots_[i].key.store(cell->key(), std::memory_order_release);
    size_.store(size_.load(std::memory_order_relaxed) + 1,
                std::memory_order_release);
  }
  void clear_slot(int i) noexcept {
    slots_[i].key.store(kEmptyKey, std::memory_order_release);
    slots_[i].cell.store(nullptr, std::memory_order_release);
    size_.store(size_.load(std::memory_order_relaxed) - 1,
                std::memory_order_release);
  }

  /// Slot index holding `key`, or -1.
  [[nodiscard]] int find_slot(Key key) const noexcept {
    for (int i = 0; i < capacity_; ++i)
      if (key_at(i) == key) return i;
    return -1;
  }
  [[nodiscard]] int first_empty_slot() const noexcept {
    for (int i = 0; i < capacity_; ++i)
      if (key_at(i) == kEmptyKey) return i;
    return -1;
  }

  LeafVersion& version() noexcept { return version_; }
  [[nodiscard]] const LeafVersion& version() const noexcept { return version_; }

  [[nodiscard]] LeafNode* left() const noexcept {
    return left_.load(std::memory_order_acquire);
  }
  [[nodiscard]] LeafNode* right() const noexcept {
    return right_.load(std::memory_order_acquire);
  }
  void set_left(LeafNode* n) noexcept { left_.store(n, std::memory_order_release); }
  void set_right(LeafNode* n) noexcept {
    right_.store(n, std::memory_order_release);
  }

 private:
  const int capacity_;
  std::unique_ptr<LeafSlot<V>[]> slots_;
  std::atomic<int> size_{0};
  LeafVersion version_;
  std::atomic<LeafNode*> left_{nullptr};
  std::atomic<LeafNode*> right_{nullptr};
};

/// Where a root-to-leaf descent ended. `node == parent->child(node_index)` and
/// `parent == grandparent->child(parent_index)` held when the links were read.
struct PathInfo {
  InternalNode* grandparent = nullptr;
  InternalNode* parent = nullptr;
  int parent_index = 0;
  Node* node = nullptr;
  int node_index = 0;
};

}  // namespace mvtree
