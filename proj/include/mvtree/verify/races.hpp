#pragma once

/// \file
/// Scripted interleavings of the two helping races.
///
/// Update race: an updater stops between reading the global version and
/// stamping its value; scans run meanwhile and may stamp it for it.
/// Scan race: a scan stops between publishing itself and taking a version;
/// compaction runs meanwhile and assigns the scan its version.

#include <string>
#include <vector>

namespace mvtree::verify {

struct ScenarioOutcome {
  std::string name;
  bool passed = false;
  /// Failure reason followed by the hook trace; empty on success.
  std::string trace;
};

/// 36 schedules: {insert new key, delete, reinsert deleted key} x {0,1,2}
/// unrelated scans beforehand x {covering, disjoint} scan range x {1,2}
/// scans while the updater is stopped.
std::vector<ScenarioOutcome> run_update_race_scenarios();

/// 24 schedules: {0..3} deletes while the scan is stopped and before
/// compaction x {0,1,2} deletes after compaction x {0,1} extra scans.
std::vector<ScenarioOutcome> run_scan_race_scenarios();

/// The update-race schedules with nothing armed, compared against the same
/// operations on an uninstrumented tree.
std::vector<ScenarioOutcome> run_unscripted_baseline();

std::vector<ScenarioOutcome> run_race_scenarios();

}  // namespace mvtree::verify
