#pragma once

/// \file
/// Queue lock and the leaf modification-version protocol.
///
/// Every tree node carries a QueueLock. Leaves additionally carry a
/// LeafVersion that lock holders bump to odd before touching the leaf and back
/// to even when done, so lock-free readers can validate what they read.

#include <array>
#include <atomic>
#include <cassert>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <utility>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#endif

namespace mvtree {

inline void cpu_relax() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  _mm_pause();
#elif defined(__aarch64__)
  asm volatile("yield" ::: "memory");
#endif
}

/// Spins with a pause instruction for a while, then starts yielding so that a
/// preempted lock holder on an oversubscribed machine gets to run.
class Backoff {
 public:
  void pause() noexcept {
    if (spins_ < kSpinLimit) {
      ++spins_;
      cpu_relax();
    } else {
      std::this_thread::yield();
    }
  }

 private:
  static constexpr unsigned kSpinLimit = 128;
  unsigned spins_ = 0;
};

namespace detail {

struct alignas(64) McsNode {
  std::atomic<McsNode*> next{nullptr};
  std::atomic<bool> locked{false};
};

/// Per-thread pool of MCS waiter records. A thread holds at most a handful of
/// node locks at once (leaf, sibling, parent, grandparent, two neighbours).
class McsNodePool {
 public:
  static constexpr std::size_t kCapacity = 32;

  McsNode* acquire() noexcept {
    for (std::size_t i = 0; i < kCapacity; ++i) {
      const std::uint64_t bit = std::uint64_t{1} << i;
      if ((used_ & bit) == 0) {
        used_ |= bit;
        return &nodes_[i];
      }
    }
    assert(false && "too many queue locks held by one thread");
    std::abort();
  }

  void release(McsNode* node) noexcept {
    const auto i = static_cast<std::size_t>(node - nodes_.data());
    assert(i < kCapacity && (used_ & (std::uint64_t{1} << i)) != 0);
    used_ &= ~(std::uint64_t{1} << i);
  }

  static McsNodePool& local() noexcept {
    static thread_local McsNodePool pool;
    return pool;
  }

 private:
  std::array<McsNode, kCapacity> nodes_{};
  std::uint64_t used_ = 0;
};

}  // namespace detail

class QueueLock;

/// Ownership token for a QueueLock. Movable, not copyable; releases on
/// destruction. Must be released on the acquiring thread.
class [[nodiscard]] LockGuard {
 public:
  LockGuard() noexcept = default;
  LockGuard(const LockGuard&) = delete;
  LockGuard& operator=(const LockGuard&) = delete;
  LockGuard(LockGuard&& other) noexcept
      : lock_{std::exchange(other.lock_, nullptr)},
        node_{std::exchange(other.node_, nullptr)} {}
  LockGuard& operator=(LockGuard&& other) noexcept {
    if (this != &other) {
      reset();
      lock_ = std::exchange(other.lock_, nullptr);
      node_ = std::exchange(other.node_, nullptr);
    }
    return *this;
  }
  ~LockGuard() { reset(); }

  [[nodiscard]] bool owns_lock() const noexcept { return lock_ != nullptr; }
  [[nodiscard]] const QueueLock* lock() const noexcept { return lock_; }

  inline void reset() noexcept;

 private:
  friend class QueueLock;
  LockGuard(QueueLock* lock, detail::McsNode* node) noexcept
      : lock_{lock}, node_{node} {}

  QueueLock* lock_ = nullptr;
  detail::McsNode* node_ = nullptr;
};

/// Mellor-Crummey/Scott queue lock. Waiters enqueue a record and spin only on
/// that record's flag; the lock is granted in arrival order.
class QueueLock {
 public:
  QueueLock() noexcept = default;
  QueueLock(const QueueLock&) = delete;
  QueueLock& operator=(const QueueLock&) = delete;

  LockGuard acquire() noexcept {
    auto* me = detail::McsNodePool::local().acquire();
    me->next.store(nullptr, std::memory_order_relaxed);
    me->locked.store(true, std::memory_order_relaxed);
    auto* pred = tail_.exchange(me, std::memory_order_acq_rel);
    if (pred != nullptr) {
      pred->next.store(me, std::memory_order_release);
      Backoff backoff;
      while (me->locked.load(std::memory_order_acquire)) backoff.pause();
    }
    return LockGuard{this, me};
  }

  /// Acquires only if nobody holds or waits for the lock.
  LockGuard try_acquire() noexcept {
    auto* me = detail::McsNodePool::local().acquire();
    me->next.store(nullptr, std::memory_order_relaxed);
    me->locked.store(false, std::memory_order_relaxed);
    detail::McsNode* expected = nullptr;
    if (tail_.compare_exchange_strong(expected, me, std::memory_order_acq_rel,
                                      std::memory_order_relaxed)) {
      return LockGuard{this, me};
    }
    detail::McsNodePool::local().release(me);
    return LockGuard{};
  }

  /// True while some thread holds or waits for the lock. Diagnostic only.
  [[nodiscard]] bool is_locked() const noexcept {
    return tail_.load(std::memory_order_acquire) != nullptr;
  }

 private:
  friend class LockGuard;

  void release(detail::McsNode* me) noexcept {
    auto* succ = me->next.load(std::memory_order_acquire);
    if (succ == nullptr) {
      detail::McsNode* expected = me;
      if (tail_.compare_exchange_strong(expected, nullptr,
                                        std::memory_order_acq_rel,
                                        std::memory_order_relaxed)) {
        detail::McsNodePool::local().release(me);
        return;
      }
      // A successor swapped the tail but has not linked itself yet.
      Backoff backoff;
      while ((succ = me->next.load(std::memory_order_acquire)) == nullptr)
        backoff.pause();
    }
    succ->locked.store(false, std::memory_order_release);
    detail::McsNodePool::local().release(me);
  }

  std::atomic<detail::McsNode*> tail_{nullptr};
};

inline void LockGuard::reset() noexcept {
  if (lock_ != nullptr) {
    lock_->release(node_);
    lock_ = nullptr;
    node_ = nullptr;
  }
}

/// Leaf modification counter: odd exactly while a lock holder is changing the
/// leaf. Readers use the double-collect pattern in read_begin/read_validate.
class LeafVersion {
 public:
  explicit LeafVersion(std::uint64_t initial = 0) noexcept : value_{initial} {}

  /// Lock holder only. Counter must be even.
  void begin_modify() noexcept {
    const auto v = value_.load(std::memory_order_relaxed);
    assert((v & 1U) == 0 && "begin_modify on an odd leaf version");
    value_.store(v + 1, std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_release);
  }

  /// Lock holder only. Counter must be odd.
  void end_modify() noexcept {
    const auto v = value_.load(std::memory_order_relaxed);
    assert((v & 1U) == 1 && "end_modify on an even leaf version");
    value_.store(v + 1, std::memory_order_release);
  }

  [[nodiscard]] std::uint64_t read_begin() const noexcept {
    return value_.load(std::memory_order_acquire);
  }

  /// True if nothing changed since `begin`, which must have been even.
  [[nodiscard]] bool read_validate(std::uint64_t begin) const noexcept {
    std::atomic_thread_fence(std::memory_order_acquire);
    return value_.load(std::memory_order_relaxed) == begin;
  }

  [[nodiscard]] std::uint64_t load() const noexcept {
    return value_.load(std::memory_order_acquire);
  }

  static constexpr bool is_odd(std::uint64_t v) noexcept { return (v & 1U) != 0; }

 private:
  std::atomic<std::uint64_t> value_;
};

/// begin_modify on construction, end_modify on destruction.
class ModifyWindow {
 public:
  explicit ModifyWindow(LeafVersion& version) noexcept : version_{version} {
    version_.begin_modify();
  }
  ModifyWindow(const ModifyWindow&) = delete;
  ModifyWindow& operator=(const ModifyWindow&) = delete;
  ~ModifyWindow() { version_.end_modify(); }

 private:
  LeafVersion& version_;
};

}  // namespace mvtree
