#pragma once

/// \file
/// Epoch-based memory reclamation.
///
/// Operations pin the current epoch for their whole duration. Unlinked
/// objects are retired into the retiring thread's limbo bucket tagged with the
/// global epoch at retirement, and are freed once the global epoch has moved
/// two steps past that tag: by then every thread that was pinned when the
/// object was retired has unpinned.

#include <atomic>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "mvtree/thread_slot.hpp"

namespace mvtree {

class EpochReclaimer {
 public:
  using Deleter = void (*)(void*);

  explicit EpochReclaimer(std::size_t slots)
      : records_(std::make_unique<Record[]>(slots)), slot_count_{slots} {}

  EpochReclaimer(const EpochReclaimer&) = delete;
  EpochReclaimer& operator=(const EpochReclaimer&) = delete;

  ~EpochReclaimer() { drain_all(); }

  class [[nodiscard]] Pin {
   public:
    Pin(const Pin&) = delete;
    Pin& operator=(const Pin&) = delete;
    ~Pin() { owner_->unpin(slot_); }

    [[nodiscard]] std::size_t slot() const noexcept { return slot_; }

   private:
    friend class EpochReclaimer;
    Pin(EpochReclaimer* owner, std::size_t slot) noexcept
        : owner_{owner}, slot_{slot} {}
    EpochReclaimer* owner_;
    std::size_t slot_;
  };

  /// Pins the calling thread, which must own `slot`. Not reentrant.
  Pin pin(std::size_t slot) noexcept {
    auto& rec = records_[slot];
    const auto epoch = global_epoch_.load(std::memory_order_relaxed);
    rec.announced.store(epoch, std::memory_order_seq_cst);
    rec.pinned_epoch = global_epoch_.load(std::memory_order_seq_cst);
    if (rec.pinned_epoch != epoch)
      rec.announced.store(rec.pinned_epoch, std::memory_order_seq_cst);
    collect(rec, rec.pinned_epoch);
    return Pin{this, slot};
  }

  /// Defers `deleter(ptr)` until no pinned thread can still reference ptr.
  /// Caller must be pinned on `slot` and ptr must already be unreachable for
  /// threads that pin from now on.
  void retire(std::size_t slot, void* ptr, Deleter deleter) {
    auto& rec = records_[slot];
    const auto epoch = global_epoch_.load(std::memory_order_seq_cst);
    auto& bucket = rec.buckets[epoch % kBuckets];
    if (bucket.epoch != epoch) {
      free_bucket(bucket);
      bucket.epoch = epoch;
    }
    bucket.items.push_back({ptr, deleter});
    if (++rec.retired_since_advance >= kAdvanceInterval) {
      rec.retired_since_advance = 0;
      try_advance();
    }
  }

  template <typename T>
  void retire(std::size_t slot, T* ptr) {
    retire(slot, ptr, [](void* p) { delete static_cast<T*>(p); });
  }

  /// Frees every deferred object. Only valid when no thread is pinned.
  void drain_all() {
    for (std::size_t i = 0; i < slot_count_; ++i)
      for (auto& bucket : records_[i].buckets) free_bucket(bucket);
  }

  [[nodiscard]] std::uint64_t epoch() const noexcept {
    return global_epoch_.load(std::memory_order_acquire);
  }

  /// Objects retired but not yet freed. Quiescent use only.
  [[nodiscard]] std::size_t pending() const noexcept {
    std::size_t n = 0;
    for (std::size_t i = 0; i < slot_count_; ++i)
      for (const auto& bucket : records_[i].buckets) n += bucket.items.size();
    return n;
  }

 private:
  static constexpr std::uint64_t kQuiescent =
      std::numeric_limits<std::uint64_t>::max();
  static constexpr std::size_t kBuckets = 3;
  static constexpr unsigned kAdvanceInterval = 64;

  struct Retired {
    void* ptr;
    Deleter deleter;
  };

  struct Bucket {
    std::uint64_t epoch = 0;
    std::vector<Retired> items;
  };

  struct alignas(64) Record {
    std::atomic<std::uint64_t> announced{kQuiescent};
    std::uint64_t pinned_epoch = 0;
    unsigned retired_since_advance = 0;
    Bucket buckets[kBuckets];
  };

  void unpin(std::size_t slot) noexcept {
    records_[slot].announced.store(kQuiescent, std::memory_order_release);
  }

  static void free_bucket(Bucket& bucket) noexcept {
    for (const auto& item : bucket.items) item.deleter(item.ptr);
    bucket.items.clear();
  }

  static void collect(Record& rec, std::uint64_t global) noexcept {
    for (auto& bucket : rec.buckets)
      if (!bucket.items.empty() && bucket.epoch + 2 <= global)
        free_bucket(bucket);
  }

  void try_advance() noexcept {
    auto epoch = global_epoch_.load(std::memory_order_seq_cst);
    for (std::size_t i = 0; i < slot_count_; ++i) {
      const auto announced = records_[i].announced.load(std::memory_order_seq_cst);
      if (announced != kQuiescent && announced != epoch) return;
    }
    global_epoch_.compare_exchange_strong(epoch, epoch + 1,
                                          std::memory_order_seq_cst);
  }

  std::atomic<std::uint64_t> global_epoch_{2};
  std::unique_ptr<Record[]> records_;
  std::size_t slot_count_;
};

}  // namespace mvtree
