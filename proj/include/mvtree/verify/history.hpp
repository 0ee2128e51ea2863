#pragma once

/// \file
/// Concurrent histories and a Wing-Gong style linearizability checker.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvtree/verify/model.hpp"

namespace mvtree::verify {

enum class OpKind : std::uint8_t { kFind, kInsert, kRemove, kScan };

struct Operation {
  OpKind kind = OpKind::kFind;
  Key key = 0;
  /// Upper bound for scans.
  Key high = 0;
  /// Inserted value.
  Value value = 0;

  [[nodiscard]] std::string to_string() const;
  friend bool operator==(const Operation&, const Operation&) = default;
};

struct OpResult {
  /// find / insert / remove.
  std::optional<Value> value;
  /// scan.
  Entries entries;

  [[nodiscard]] std::string to_string(OpKind kind) const;
  friend bool operator==(const OpResult&, const OpResult&) = default;
};

struct Event {
  int thread = 0;
  bool invoke = true;
  Operation op;
  /// Set on return events.
  OpResult result;
  /// Logical clock shared by all threads of the run.
  std::uint64_t timestamp = 0;
};

struct History {
  std::vector<Event> events;
};

struct CompletedOp {
  int thread = 0;
  Operation op;
  OpResult result;
  std::uint64_t invoked = 0;
  std::uint64_t returned = 0;
};

/// Per-thread invoke/return alternation, every invoke answered by a return
/// of the same operation, timestamps increasing. Sets `why` on failure.
bool well_formed(const History& history, std::string* why = nullptr);

/// Pairs invokes with returns in invocation order. Throws
/// std::invalid_argument for a history that is not well formed.
std::vector<CompletedOp> complete_operations(const History& history);

/// Runs `op` against `model` and returns what the set would answer.
OpResult apply(SequentialModel& model, const Operation& op);

struct LinearizabilityResult {
  bool linearizable = false;
  /// Indices into complete_operations(history), in linearization order.
  std::vector<std::size_t> order;
  /// Why no order exists, for a failing history.
  std::string explanation;
};

/// Histories with more operations are rejected (std::length_error).
inline constexpr std::size_t kMaxCheckedOperations = 64;

/// Searches for a total order of the operations that respects real-time
/// precedence and under which the model, starting from `initial`, reproduces
/// every recorded result.
LinearizabilityResult check_linearizable(const History& history,
                                         const SequentialModel& initial = {});

}  // namespace mvtree::verify
