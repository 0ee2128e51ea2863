#pragma once

/// \file
/// Throughput harness: seeding, a timed mixed workload, repetitions and CSV
/// reports.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvtree/node_key.hpp"

namespace mvtree::bench {

/// Operation shares of the non-scan threads, in percent.
struct Mix {
  int insert = 0;
  int remove = 0;
  int find = 100;
};

struct WorkloadSpec {
  int threads = 80;
  /// Threads doing only scans; the others draw from `mix`.
  int scan_threads = 0;
  double duration_s = 10.0;
  /// Keys are drawn uniformly from [1, key_range].
  Key key_range = 1'000'000;
  Mix mix;
  /// Width of every scan window.
  Key scan_span = 1000;
  int a = 2;
  int b = 256;
  std::uint64_t seed = 1;
  int repetitions = 10;
  /// "tree" or "global-lock".
  std::string structure = "tree";
};

/// Problems with `spec`, empty if it is runnable.
std::vector<std::string> validation_errors(const WorkloadSpec& spec);
/// Throws std::invalid_argument listing validation_errors.
void validate(const WorkloadSpec& spec);

/// Applies experiment `name` ('a'..'f') to `base`:
///   a  all threads scan
///   b  half the threads scan, the rest insert/delete 50/50
///   c  100% find
///   d  80% insert, 20% delete
///   e  100% insert
///   f  90% find, 9% insert, 1% delete
/// Throws std::invalid_argument for other names.
WorkloadSpec apply_preset(char name, WorkloadSpec base = {});

/// What the harness needs from a set under test.
class ConcurrentSet {
 public:
  virtual ~ConcurrentSet() = default;
  /// True if the key was added.
  virtual bool insert(Key key, std::int64_t value) = 0;
  /// True if the key was removed.
  virtual bool remove(Key key) = 0;
  virtual bool contains(Key key) = 0;
  /// Number of keys in [low, high], read atomically.
  virtual std::size_t scan(Key low, Key high) = 0;
};

/// "tree" builds the versioned (a,b)-tree; "global-lock" a std::map behind
/// one mutex. `max_threads` bounds the threads that may use the set.
std::unique_ptr<ConcurrentSet> make_set(const std::string& structure, int a, int b,
                                        std::size_t max_threads);

/// Inserts uniformly random distinct keys until key_range / 2 are present.
/// Deterministic in spec.seed. Returns the keys inserted, ascending.
std::vector<Key> seed(ConcurrentSet& set, const WorkloadSpec& spec);

struct RepetitionRow {
  /// 1-based; 0 for the mean row.
  int rep = 0;
  int threads = 0;
  int scan_threads = 0;
  double duration_s = 0;
  double inserts = 0;
  double deletes = 0;
  double finds = 0;
  double scans = 0;
  double scan_keys_collected = 0;
  /// Insert, delete and find operations per second.
  double update_ops_per_s = 0;
  double scan_keys_per_s = 0;
};

struct RunReport {
  WorkloadSpec spec;
  std::vector<RepetitionRow> repetitions;

  /// Column-wise mean of the repetitions.
  [[nodiscard]] RepetitionRow mean() const;
};

/// One measured phase on an already seeded set.
RepetitionRow run_phase(ConcurrentSet& set, const WorkloadSpec& spec, int rep);

/// Validates, then for every repetition builds a fresh set, seeds it and runs
/// the measured phase.
RunReport run_experiment(const WorkloadSpec& spec);

inline constexpr const char* kCsvHeader =
    "rep,threads,scan_threads,duration_s,inserts,deletes,finds,scans,"
    "scan_keys_collected,update_ops_per_s,scan_keys_per_s";

/// Header, one row per repetition, then a "mean" row when there are any.
void write_csv(const RunReport& report, std::ostream& out);
/// Human-readable summary.
void write_summary(const RunReport& report, std::ostream& out);
/// Writes the CSV to `path` and the summary to `summary`. Throws
/// std::runtime_error naming the path if the file cannot be written.
void emit_report(const RunReport& report, const std::string& path, std::ostream& summary);

struct ParsedCsv {
  std::vector<RepetitionRow> rows;
  std::optional<RepetitionRow> mean;
};
/// Reads what write_csv wrote. Throws std::runtime_error on malformed input.
ParsedCsv parse_csv(std::istream& in);

}  // namespace mvtree::bench
