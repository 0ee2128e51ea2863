#pragma once

/// \file
/// Versioning state shared by updates and scans.
///
/// Updates stamp values with the current global version. A scan takes its
/// version with fetch-and-increment, so every update that reads the counter
/// afterwards stamps a strictly larger version. Two helping protocols close
/// the races between those steps:
///
/// - a reader that meets a value whose version is still pending stamps it
///   with the current global version itself (helping the updater);
/// - a compaction that meets a published scan without a version assigns it
///   one with fetch-and-increment (helping the scan).
///
/// In both cases the slot moves from 0 to a positive version by exactly one
/// compare-exchange, so every party agrees on the outcome.

#include <atomic>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>

#include "mvtree/node_key.hpp"

namespace mvtree {

using Version = std::uint64_t;

/// Written into a version slot that has not been assigned yet.
inline constexpr Version kPendingVersion = 0;
/// Result of min_ongoing_scan_version when no scan is published.
inline constexpr Version kNoScanVersion = std::numeric_limits<Version>::max() - 1;
/// Version slot of a value created by a splitting insert that is not yet
/// linked into the tree. Readers treat it as newer than any scan and never
/// help it; the inserter stamps it right after the new subtree is linked.
inline constexpr Version kDeferredVersion = std::numeric_limits<Version>::max();
/// Reads "the latest value", whatever its version.
inline constexpr Version kLatestVersion = kNoScanVersion;

class GlobalVersion {
 public:
  [[nodiscard]] Version read() const noexcept {
    return value_.load(std::memory_order_seq_cst);
  }
  Version fetch_increment() noexcept {
    return value_.fetch_add(1, std::memory_order_seq_cst);
  }

 private:
  std::atomic<Version> value_{1};
};

/// One (version, value) pair of a key. Immutable apart from its version slot
/// (written once from pending) and its `older` link (cut only by history
/// pruning, under the owning leaf's lock). An empty `value` is a deletion.
template <typename V>
struct VersionedValue {
  VersionedValue(std::optional<V> v, Version ver, VersionedValue* next)
      : value{std::move(v)}, version{ver}, older{next} {}

  const std::optional<V> value;
  std::atomic<Version> version;
  std::atomic<VersionedValue*> older;
};

/// Multi-version record of one key. `head` is the latest pair; the chain
/// behind it is the history, newest first, with non-increasing versions.
template <typename V>
class ValueCell {
 public:
  using Entry = VersionedValue<V>;

  /// Fresh cell holding `value` with a pending (or deferred) version.
  ValueCell(Key key, std::optional<V> value, Version initial = kPendingVersion)
      : key_{key}, head_{new Entry{std::move(value), initial, nullptr}} {}

  ValueCell(const ValueCell&) = delete;
  ValueCell& operator=(const ValueCell&) = delete;

  ~ValueCell() { free_chain(head_.load(std::memory_order_relaxed)); }

  [[nodiscard]] Key key() const noexcept { return key_; }

  [[nodiscard]] Entry* latest() const noexcept {
    return head_.load(std::memory_order_acquire);
  }

  /// Archives the latest pair and installs `value` with a pending version.
  /// Caller holds the owning leaf's lock. A still-pending latest pair is
  /// stamped first so the archived entry carries a real version.
  void put_new_value(std::optional<V> value, const GlobalVersion& gv) {
    auto* current = head_.load(std::memory_order_relaxed);
    if (current->version.load(std::memory_order_seq_cst) == kPendingVersion) {
      Version expected = kPendingVersion;
      current->version.compare_exchange_strong(expected, gv.read(),
                                               std::memory_order_seq_cst);
    }
    head_.store(new Entry{std::move(value), kPendingVersion, current},
                std::memory_order_release);
    history_length_.store(history_length_.load(std::memory_order_relaxed) + 1,
                          std::memory_order_relaxed);
  }

  /// Moves the latest version from `expected` (pending by default) to
  /// `version`. Returns whether this call made the transition.
  bool cas_latest_version(Version version,
                          Version expected = kPendingVersion) noexcept {
    return latest()->version.compare_exchange_strong(expected, version,
                                                     std::memory_order_seq_cst);
  }

  [[nodiscard]] Version latest_version() const noexcept {
    return latest()->version.load(std::memory_order_seq_cst);
  }

  /// Number of archived pairs, lock holder's view.
  [[nodiscard]] std::size_t history_length() const noexcept {
    return history_length_.load(std::memory_order_relaxed);
  }

  /// Cuts the history after the newest archived entry whose version is at or
  /// below `floor`; readers at version >= floor never need anything older.
  /// Caller holds the leaf lock. Returns the detached chain (to be retired) or
  /// nullptr.
  Entry* detach_history_below(Version floor) noexcept {
    auto* entry = head_.load(std::memory_order_relaxed);
    const auto head_version = entry->version.load(std::memory_order_seq_cst);
    if (head_version == kPendingVersion || head_version == kDeferredVersion)
      return nullptr;
    std::size_t kept = 0;
    if (head_version <= floor) {
      auto* rest = entry->older.exchange(nullptr, std::memory_order_acq_rel);
      history_length_.store(0, std::memory_order_relaxed);
      return rest;
    }
    for (auto* older = entry->older.load(std::memory_order_relaxed);
         older != nullptr;
         entry = older, older = older->older.load(std::memory_order_relaxed)) {
      ++kept;
      if (older->version.load(std::memory_order_relaxed) <= floor) {
        auto* rest = older->older.exchange(nullptr, std::memory_order_acq_rel);
        history_length_.store(kept, std::memory_order_relaxed);
        return rest;
      }
    }
    return nullptr;
  }

  static void free_chain(Entry* entry) noexcept {
    while (entry != nullptr) {
      auto* next = entry->older.load(std::memory_order_relaxed);
      delete entry;
      entry = next;
    }
  }

 private:
  const Key key_;
  std::atomic<Entry*> head_;
  std::atomic<std::size_t> history_length_{0};
};

/// Stamps a pending latest pair with the current global version (helping
/// its updater), then returns the pair visible at `version`: the latest one if
/// its version is <= `version`, else the newest archived one that is. Returns
/// nullptr if the key had no pair at `version` yet.
template <typename V>
const VersionedValue<V>* help_and_get_value_by_version(const ValueCell<V>& cell,
                                                       Version version,
                                                       const GlobalVersion& gv,
                                                       bool* helped = nullptr) {
  auto* entry = cell.latest();
  auto latest = entry->version.load(std::memory_order_seq_cst);
  if (latest == kPendingVersion) {
    Version expected = kPendingVersion;
    const bool won = entry->version.compare_exchange_strong(
        expected, gv.read(), std::memory_order_seq_cst);
    if (helped != nullptr) *helped = won;
    latest = entry->version.load(std::memory_order_seq_cst);
  }
  if (latest != kDeferredVersion && latest <= version) return entry;
  for (auto* older = entry->older.load(std::memory_order_acquire);
       older != nullptr; older = older->older.load(std::memory_order_acquire)) {
    if (older->version.load(std::memory_order_relaxed) <= version) return older;
  }
  return nullptr;
}

/// Published record of an in-flight scan.
struct ScanData {
  ScanData(Key lo, Key hi) noexcept : low{lo}, high{hi} {}

  const Key low;
  const Key high;
  std::atomic<Version> version{kPendingVersion};
};

/// Fixed array of per-thread scan publications, indexed by thread slot.
class OngoingScans {
 public:
  explicit OngoingScans(std::size_t slots)
      : slots_(std::make_unique<std::atomic<ScanData*>[]>(slots)),
        size_{slots} {
    for (std::size_t i = 0; i < slots; ++i)
      slots_[i].store(nullptr, std::memory_order_relaxed);
  }

  [[nodiscard]] std::size_t size() const noexcept { return size_; }

  /// Owner only. nullptr clears the slot.
  void publish(std::size_t slot, ScanData* scan) noexcept {
    slots_[slot].store(scan, std::memory_order_seq_cst);
  }

  [[nodiscard]] ScanData* at(std::size_t slot) const noexcept {
    return slots_[slot].load(std::memory_order_seq_cst);
  }

  /// Assigns the version of a scan that is already published in its slot:
  /// fetch-and-increment, then compare-exchange into the record. If a helper
  /// got there first its value wins.
  static Version new_version(ScanData& scan, GlobalVersion& gv) noexcept {
    const auto mine = gv.fetch_increment();
    Version expected = kPendingVersion;
    if (scan.version.compare_exchange_strong(expected, mine,
                                             std::memory_order_seq_cst))
      return mine;
    return expected;
  }

  /// Minimum version over published scans, or kNoScanVersion if none. Pending
  /// scans are assigned a version first.
  Version min_ongoing_scan_version(GlobalVersion& gv) const noexcept {
    auto min_version = kNoScanVersion;
    for (std::size_t i = 0; i < size_; ++i) {
      auto* scan = at(i);
      if (scan == nullptr) continue;
      auto version = scan->version.load(std::memory_order_seq_cst);
      if (version == kPendingVersion) {
        const auto fresh = gv.fetch_increment();
        Version expected = kPendingVersion;
        version = scan->version.compare_exchange_strong(
                      expected, fresh, std::memory_order_seq_cst)
                      ? fresh
                      : expected;
      }
      if (version < min_version) min_version = version;
    }
    return min_version;
  }

 private:
  std::unique_ptr<std::atomic<ScanData*>[]> slots_;
  std::size_t size_;
};

}  // namespace mvtree
