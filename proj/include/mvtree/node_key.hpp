#pragma once

#include <cstdint>
#include <limits>

namespace mvtree {

using Key = std::int64_t;

/// Marks a vacant leaf slot. Never a valid client key.
inline constexpr Key kEmptyKey = std::numeric_limits<Key>::min();

/// Smallest and largest client keys; a scan over both covers everything.
inline constexpr Key kMinClientKey = kEmptyKey + 1;
inline constexpr Key kMaxClientKey = std::numeric_limits<Key>::max();

}  // namespace mvtree
