#include "mvtree/verify/model.hpp"

#include <tuple>

namespace mvtree::verify {

std::optional<Value> SequentialModel::find(Key key) const {
  const auto it = map_.find(key);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

std::optional<Value> SequentialModel::insert(Key key, Value value) {
  const auto [it, fresh] = map_.emplace(key, value);
  if (fresh) return std::nullopt;
  return it->second;
}

std::optional<Value> SequentialModel::remove(Key key) {
  const auto it = map_.find(key);
  if (it == map_.end()) return std::nullopt;
  const Value old = it->second;
  map_.erase(it);
  return old;
}

Entries SequentialModel::scan(Key low, Key high) const {
  Entries out;
  for (auto it = map_.lower_bound(low); it != map_.end() && it->first <= high; ++it)
    out.emplace_back(it->first, it->second);
  return out;
}

void VersionLog::record(Key key, Version version, std::optional<Value> value,
                        std::uint64_t sequence) {
  installs_.push_back({key, version, value, sequence});
}

void VersionLog::preload(Key key, Value value) {
  installs_.push_back({key, 0, value, 0});
}

Entries VersionLog::snapshot_at(Version version) const {
  std::map<Key, const Install*> last;
  for (const auto& in : installs_) {
    if (in.version > version) continue;
    auto& slot = last[in.key];
    if (slot == nullptr || std::tie(in.version, in.sequence) >=
                               std::tie(slot->version, slot->sequence))
      slot = &in;
  }
  Entries out;
  for (const auto& [key, in] : last)
    if (in->value) out.emplace_back(key, *in->value);
  return out;
}

Entries VersionLog::snapshot_at(Version version, Key low, Key high) const {
  Entries all = snapshot_at(version);
  Entries out;
  for (const auto& kv : all)
    if (kv.first >= low && kv.first <= high) out.push_back(kv);
  return out;
}

}  // namespace mvtree::verify
