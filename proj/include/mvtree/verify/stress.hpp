#pragma once

/// \file
/// Timed multi-threaded stress run followed by a strict invariant check.

#include <cstdint>

#include "mvtree/tree.hpp"
#include "mvtree/verify/invariants.hpp"

namespace mvtree::verify {

struct StressConfig {
  int threads = 8;
  double seconds = 10.0;
  /// Keys are drawn from [1, key_range].
  Key key_range = 10'000;
  /// Inserts and deletes, split evenly.
  int update_percent = 50;
  int find_percent = 25;
  /// The remaining share are scans of this width.
  Key scan_span = 100;
  std::uint64_t seed = 1;
  TreeOptions tree{.a = 2, .b = 16, .max_threads = 128};
};

struct StressOutcome {
  std::uint64_t operations = 0;
  std::uint64_t scans = 0;
  /// Scans whose keys were out of order or outside the range.
  std::uint64_t malformed_scans = 0;
  InvariantReport report;
};

/// Runs the workload, drains maintenance and checks the tree strictly.
StressOutcome run_stress(const StressConfig& config);

}  // namespace mvtree::verify
