#pragma once

/// \file
/// Instrumentation points inside the tree.
///
/// The tree calls `hooks.at(point, event)` at a few places where the
/// interleaving between updates, scans and compaction matters. The default
/// NoHooks policy compiles to nothing; test and verification code supplies a
/// policy that records events or parks a thread at a point.

#include <cstdint>

#include "mvtree/node_key.hpp"
#include "mvtree/version_store.hpp"

namespace mvtree {

enum class HookPoint : std::uint8_t {
  /// Updater read the global version and is about to compare-exchange it into
  /// its pending value. `version` is the value read.
  kUpdateVersionRead,
  /// Updater's compare-exchange finished. `version` is the value's final
  /// version, `flag` whether the updater's own compare-exchange won.
  kUpdateVersionCas,
  /// A reader helped a pending value. `flag` whether its compare-exchange won.
  kHelpCas,
  /// Scan published its record and has not taken a version yet. `key` is the
  /// scan's low bound.
  kScanPublished,
  /// Scan's version is settled (by itself or a helper).
  kScanVersionAssigned,
  /// Compaction computed the minimum version over ongoing scans.
  kCompactionMinVersion,
  /// Compaction physically removed `key`, deleted at `version`.
  kCompactionRemove,
  /// An insert or delete took effect: `key` now has a value (`flag`) or is
  /// deleted (`!flag`) from `version` on. Fired while the leaf is locked.
  kUpdateInstalled,
};

struct HookEvent {
  Key key = 0;
  Version version = 0;
  bool flag = false;
};

struct NoHooks {
  void at(HookPoint, const HookEvent&) noexcept {}
};

}  // namespace mvtree
