#pragma once

/// \file
/// Records small concurrent runs against a real tree.

#include <cstdint>
#include <string>
#include <vector>

#include "mvtree/tree.hpp"
#include "mvtree/verify/history.hpp"
#include "mvtree/verify/model.hpp"

namespace mvtree::verify {

struct RecordConfig {
  int threads = 3;
  int ops_per_thread = 8;
  /// Keys are drawn from [1, key_space].
  Key key_space = 4;
  /// Share of scans; the rest splits evenly between find, insert, remove.
  int scan_percent = 20;
  /// Keys 1..prefill are inserted before the threads start.
  Key prefill = 0;
  std::uint64_t seed = 1;
  /// Random yields between steps to vary interleavings.
  bool yields = true;
  TreeOptions tree{.a = 2, .b = 4, .max_threads = 128};
};

struct ScanObservation {
  int thread;
  Key low;
  Key high;
  Version version;
  Entries result;
};

struct RecordedRun {
  History history;
  SequentialModel initial;
  /// Installed versions, matched to the operations that produced them.
  VersionLog installs;
  std::vector<ScanObservation> scans;
  /// Non-empty when installs could not be matched to operations.
  std::string error;
};

/// Runs `threads` workers doing `ops_per_thread` random operations each.
RecordedRun record_run(const RecordConfig& config);

/// The history of record_run.
History record_history(const RecordConfig& config);

/// Every scan's result must equal the set visible at its version per the
/// install log. Returns a description of the first mismatch, or "".
std::string check_scan_snapshots(const RecordedRun& run);

}  // namespace mvtree::verify
