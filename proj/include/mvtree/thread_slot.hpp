#pragma once

#include <cstddef>

namespace mvtree {

/// Upper bound on simultaneously registered threads, process wide.
inline constexpr std::size_t kMaxThreadSlots = 1024;

/// Dense id of the calling thread in [0, kMaxThreadSlots). Assigned on first
/// call, lowest free id first, and returned to the pool when the thread exits.
/// Trees index their per-thread arrays (ongoing scans, reclamation records)
/// with it. Throws std::length_error when every slot is taken.
std::size_t this_thread_slot();

/// Number of slots currently held by live threads.
std::size_t registered_thread_count();

}  // namespace mvtree
