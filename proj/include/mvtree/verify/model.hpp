#pragma once

/// \file
/// Sequential reference set and a log of installed versions.

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "mvtree/node_key.hpp"
#include "mvtree/version_store.hpp"

namespace mvtree::verify {

using Value = std::int64_t;
using Entries = std::vector<std::pair<Key, Value>>;

/// Same contract as the tree's find/insert/remove/scan, on a std::map.
class SequentialModel {
 public:
  [[nodiscard]] std::optional<Value> find(Key key) const;
  std::optional<Value> insert(Key key, Value value);
  std::optional<Value> remove(Key key);
  [[nodiscard]] Entries scan(Key low, Key high) const;

  [[nodiscard]] std::size_t size() const noexcept { return map_.size(); }
  [[nodiscard]] const std::map<Key, Value>& contents() const noexcept { return map_; }

  friend bool operator==(const SequentialModel&, const SequentialModel&) = default;

 private:
  std::map<Key, Value> map_;
};

/// Every (key, version, value-or-tombstone) a run installed. Updates to one
/// key are serialized, so `sequence` (the order they were logged in) breaks
/// ties between equal versions.
class VersionLog {
 public:
  struct Install {
    Key key;
    Version version;
    std::optional<Value> value;
    std::uint64_t sequence;
  };

  void record(Key key, Version version, std::optional<Value> value,
              std::uint64_t sequence);
  /// Seeds `key` as present since before any recorded version.
  void preload(Key key, Value value);

  /// Keys whose last install at or below `version` is a value, ascending.
  [[nodiscard]] Entries snapshot_at(Version version) const;
  /// Same, restricted to [low, high].
  [[nodiscard]] Entries snapshot_at(Version version, Key low, Key high) const;

  [[nodiscard]] const std::vector<Install>& installs() const noexcept {
    return installs_;
  }

 private:
  std::vector<Install> installs_;
};

}  // namespace mvtree::verify
