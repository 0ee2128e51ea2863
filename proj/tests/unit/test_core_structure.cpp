#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <limits>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "mvtree/reclaim.hpp"
#include "mvtree/thread_slot.hpp"
#include "mvtree/tree.hpp"
#include "mvtree/verify/access.hpp"
#include "mvtree/verify/invariants.hpp"

namespace {

using mvtree::InternalNode;
using mvtree::Key;
using mvtree::Node;
using mvtree::TreeOptions;
using mvtree::detail::TreeAccess;
using Tree = mvtree::VersionedAbTree<int>;
using Leaf = Tree::Leaf;

struct LeafRange {
  const Leaf* leaf;
  Key low;   // inclusive
  Key high;  // exclusive; max() means unbounded
};

// Half-open key ranges of the leaves, computed top-down from routing keys.
void leaf_ranges(const Node* n, Key low, Key high, std::vector<LeafRange>& out) {
  if (n->is_leaf()) {
    out.push_back({static_cast<const Leaf*>(n), low, high});
    return;
  }
  const auto* in = static_cast<const InternalNode*>(n);
  for (int i = 0; i < in->size(); ++i) {
    const Key lo = i == 0 ? low : in->keys()[static_cast<std::size_t>(i - 1)];
    const Key hi = i + 1 == in->size() ? high : in->keys()[static_cast<std::size_t>(i)];
    leaf_ranges(in->child(i), lo, hi, out);
  }
}

bool leaf_holds(const Leaf& leaf, Key key) { return leaf.find_slot(key) >= 0; }

TEST(Search, SingleLeafTree) {
  Tree tree{TreeOptions{.a = 2, .b = 4}};
  const auto p = tree.search(42);
  EXPECT_EQ(p.grandparent, nullptr);
  EXPECT_EQ(p.parent, TreeAccess::entry(tree));
  EXPECT_EQ(p.node_index, 0);
  EXPECT_TRUE(p.node->is_leaf());
  EXPECT_EQ(p.node, TreeAccess::root(tree));
}

TEST(Search, RoutingKeyGoesRight) {
  const std::vector<Node*> none(2, nullptr);
  InternalNode n{{10}, none, 0};
  EXPECT_EQ(n.route(10), 1);
  EXPECT_EQ(n.route(9), 0);
  EXPECT_EQ(n.route(11), 1);
  const std::vector<Node*> three(3, nullptr);
  InternalNode m{{10, 20}, three, 0};
  EXPECT_EQ(m.route(std::numeric_limits<Key>::min() + 1), 0);
  EXPECT_EQ(m.route(19), 1);
  EXPECT_EQ(m.route(20), 2);
}

TEST(Search, RootRoutingInBuiltTree) {
  Tree tree{TreeOptions{.a = 2, .b = 4}};
  for (Key k = 1; k <= 5; ++k) tree.insert(k, 0);
  auto* root = TreeAccess::root(tree);
  ASSERT_FALSE(root->is_leaf());
  const auto* in = static_cast<InternalNode*>(root);
  const Key sep = in->keys().front();
  const auto p = tree.search(sep);
  EXPECT_TRUE(leaf_holds(*static_cast<Leaf*>(p.node), sep));
  EXPECT_GE(p.node_index, 1);
}

TEST(Search, RandomTreeAgainstReferenceSet) {
  for (const int b : {4, 8, 16}) {
    Tree tree{TreeOptions{.a = 2, .b = b}};
    std::set<Key> reference;
    std::mt19937_64 rng{static_cast<std::uint64_t>(b)};
    std::uniform_int_distribution<Key> key{1, 5000};
    while (reference.size() < 1000) {
      const Key k = key(rng);
      reference.insert(k);
      tree.insert(k, static_cast<int>(k));
    }
    // Delete a tenth and compact so the tree also went through merges.
    std::vector<Key> keys(reference.begin(), reference.end());
    for (std::size_t i = 0; i < keys.size(); i += 10) {
      tree.remove(keys[i]);
      reference.erase(keys[i]);
    }
    tree.compact();
    tree.drain_maintenance();

    std::vector<LeafRange> ranges;
    leaf_ranges(TreeAccess::root(tree), std::numeric_limits<Key>::min(),
                std::numeric_limits<Key>::max(), ranges);
    for (const Key k : reference) {
      const auto* leaf = static_cast<const Leaf*>(tree.search(k).node);
      ASSERT_TRUE(leaf_holds(*leaf, k)) << "b=" << b << " key " << k;
      EXPECT_EQ(tree.find(k), static_cast<int>(k));
    }
    // Every query key, present or not, lands in the leaf whose range holds it.
    for (Key k = 1; k <= 5001; ++k) {
      const auto* leaf = static_cast<const Leaf*>(tree.search(k).node);
      const auto it = std::find_if(ranges.begin(), ranges.end(),
                                   [&](const LeafRange& r) { return r.leaf == leaf; });
      ASSERT_NE(it, ranges.end());
      ASSERT_GE(k, it->low);
      ASSERT_TRUE(it->high == std::numeric_limits<Key>::max() || k < it->high);
    }
    const auto report = mvtree::verify::check_invariants(tree, true);
    EXPECT_TRUE(report.ok()) << report.summary();
    EXPECT_EQ(report.live_keys, reference.size());
  }
}

TEST(Search, StopsAtTarget) {
  Tree tree{TreeOptions{.a = 2, .b = 4}};
  for (Key k = 1; k <= 40; ++k) tree.insert(k, 0);
  auto* root = TreeAccess::root(tree);
  ASSERT_FALSE(root->is_leaf());
  const auto p = tree.search(7, root);
  EXPECT_EQ(p.node, root);
  EXPECT_EQ(p.parent, TreeAccess::entry(tree));
}

TEST(SearchLeaf, AbsentPresentAndDeleted) {
  Tree tree{TreeOptions{.a = 2, .b = 4}};
  tree.insert(5, 50);
  tree.insert(6, 60);
  tree.remove(6);
  const auto& leaf = *static_cast<Leaf*>(tree.search(5).node);
  const auto absent = tree.search_leaf(leaf, 9);
  EXPECT_FALSE(absent.found);
  EXPECT_FALSE(absent.value.has_value());
  const auto present = tree.search_leaf(leaf, 5);
  EXPECT_TRUE(present.found);
  EXPECT_EQ(present.value, 50);
  const auto deleted = tree.search_leaf(leaf, 6);
  EXPECT_TRUE(deleted.found);
  EXPECT_FALSE(deleted.value.has_value());
  EXPECT_FALSE(tree.find(6).has_value());
}

// A writer flips a key between two values; a concurrent reader only ever
// sees one of them, never a torn or vacant state.
TEST(SearchLeaf, OnlyReturnsCommittedValues) {
  Tree tree{TreeOptions{.a = 2, .b = 64}};
  tree.insert(1, 100);
  std::atomic<bool> stop{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    while (!stop) {
      const auto v = tree.find(1);
      if (v.has_value() && *v != 100 && *v != 200) ++bad;
    }
  });
  for (int i = 0; i < 20'000; ++i) {
    tree.remove(1);
    tree.insert(1, i % 2 == 0 ? 200 : 100);
  }
  stop = true;
  reader.join();
  EXPECT_EQ(bad.load(), 0);
}

TEST(Keys, ReservedKeyRejected) {
  Tree tree;
  EXPECT_THROW(tree.insert(mvtree::kEmptyKey, 1), std::invalid_argument);
  EXPECT_THROW(tree.find(mvtree::kEmptyKey), std::invalid_argument);
  EXPECT_THROW(tree.remove(mvtree::kEmptyKey), std::invalid_argument);
}

TEST(Keys, ExtremeClientKeys) {
  Tree tree{TreeOptions{.a = 2, .b = 4}};
  for (Key k : {mvtree::kMinClientKey, Key{0}, Key{-1}, mvtree::kMaxClientKey})
    EXPECT_FALSE(tree.insert(k, 1).has_value());
  for (Key k = 1; k < 20; ++k) tree.insert(k, 2);
  EXPECT_EQ(tree.find(mvtree::kMinClientKey), 1);
  EXPECT_EQ(tree.find(mvtree::kMaxClientKey), 1);
  const auto all = tree.scan(mvtree::kMinClientKey, mvtree::kMaxClientKey);
  EXPECT_EQ(all.size(), 23U);
  EXPECT_TRUE(std::is_sorted(all.entries.begin(), all.entries.end()));
}

TEST(Options, Validation) {
  EXPECT_THROW(Tree(TreeOptions{.a = 1, .b = 4}), std::invalid_argument);
  EXPECT_THROW(Tree(TreeOptions{.a = 3, .b = 5}), std::invalid_argument);
  EXPECT_THROW(Tree(TreeOptions{.a = 2, .b = 4, .max_threads = 0}), std::invalid_argument);
  EXPECT_NO_THROW(Tree(TreeOptions{.a = 2, .b = 4}));
}

TEST(Invariants, FreshTreeIsClean) {
  Tree tree;
  const auto report = mvtree::verify::check_invariants(tree, true);
  EXPECT_TRUE(report.ok()) << report.summary();
  EXPECT_EQ(report.leaves, 1U);
}

TEST(ThreadSlots, LowestFreeFirstAndReused) {
  const auto mine = mvtree::this_thread_slot();
  EXPECT_EQ(mvtree::this_thread_slot(), mine);
  std::size_t first = 0, second = 0;
  std::thread a([&] { first = mvtree::this_thread_slot(); });
  a.join();
  std::thread b([&] { second = mvtree::this_thread_slot(); });
  b.join();
  EXPECT_NE(first, mine);
  EXPECT_EQ(first, second);
}

TEST(ThreadSlots, SlotAboveTreeLimitIsRejected) {
  Tree tree{TreeOptions{.a = 2, .b = 4, .max_threads = 1}};
  // With slot 0 or 1 taken by a live thread, at most one of this thread and
  // the holder can sit in slot 0, so a third thread lands at 1 or above.
  (void)mvtree::this_thread_slot();
  std::atomic<bool> hold{true}, registered{false};
  std::thread holder([&] {
    (void)mvtree::this_thread_slot();
    registered = true;
    while (hold) std::this_thread::yield();
  });
  while (!registered) std::this_thread::yield();
  bool threw = false;
  std::thread user([&] {
    try {
      tree.insert(1, 1);
      (void)tree.find(1);
    } catch (const std::length_error&) {
      threw = true;
    }
  });
  user.join();
  hold = false;
  holder.join();
  EXPECT_TRUE(threw);
}

TEST(Reclaimer, DefersUntilUnpinned) {
  static std::atomic<int> freed{0};
  freed = 0;
  mvtree::EpochReclaimer ebr{4};
  std::atomic<bool> reader_pinned{false}, release{false};
  std::thread reader([&] {
    auto pin = ebr.pin(1);
    reader_pinned = true;
    while (!release) std::this_thread::yield();
  });
  while (!reader_pinned) std::this_thread::yield();
  {
    for (int i = 0; i < 1000; ++i) {
      auto pin = ebr.pin(0);
      ebr.retire(0, new int{i}, [](void* p) {
        delete static_cast<int*>(p);
        ++freed;
      });
    }
  }
  // The reader pinned before everything was retired, so nothing may go.
  EXPECT_EQ(freed.load(), 0);
  release = true;
  reader.join();
  for (int i = 0; i < 1000; ++i) {
    auto pin = ebr.pin(0);
    ebr.retire(0, new int{i}, [](void* p) {
      delete static_cast<int*>(p);
      ++freed;
    });
  }
  EXPECT_GT(freed.load(), 0);
  ebr.drain_all();
  EXPECT_EQ(freed.load(), 2000);
  EXPECT_EQ(ebr.pending(), 0U);
}

// Unlinked leaves stay readable with their old contents while a reader that
// found them is still pinned.
TEST(Reclaimer, ReplacedLeafKeepsContent) {
  Tree tree{TreeOptions{.a = 2, .b = 4}};
  for (Key k : {1, 3, 5, 7}) tree.insert(k, static_cast<int>(k * 10));
  auto* old_leaf = static_cast<Leaf*>(TreeAccess::root(tree));
  auto& ebr = TreeAccess::reclaimer(tree);
  std::atomic<bool> pinned{false}, done{false};
  std::vector<std::pair<Key, int>> seen;
  std::thread reader([&] {
    auto pin = ebr.pin(mvtree::this_thread_slot());
    pinned = true;
    while (!done) std::this_thread::yield();
    for (int i = 0; i < old_leaf->capacity(); ++i) {
      const Key k = old_leaf->key_at(i);
      if (k == mvtree::kEmptyKey) continue;
      seen.emplace_back(k, *old_leaf->cell_at(i)->latest()->value);
    }
  });
  while (!pinned) std::this_thread::yield();
  tree.insert(4, 40);
  EXPECT_TRUE(old_leaf->is_marked());
  done = true;
  reader.join();
  std::sort(seen.begin(), seen.end());
  const std::vector<std::pair<Key, int>> expected{{1, 10}, {3, 30}, {5, 50}, {7, 70}};
  EXPECT_EQ(seen, expected);
}

}  // namespace
