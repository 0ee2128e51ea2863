#include <algorithm>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "mvtree/verify/history.hpp"

namespace mvtree::verify {

namespace {

const char* kind_name(OpKind kind) {
  switch (kind) {
    case OpKind::kFind: return "find";
    case OpKind::kInsert: return "insert";
    case OpKind::kRemove: return "remove";
    case OpKind::kScan: return "scan";
  }
  return "?";
}

std::string value_string(const std::optional<Value>& v) {
  return v ? std::to_string(*v) : std::string{"none"};
}

}  // namespace

std::string Operation::to_string() const {
  std::ostringstream out;
  out << kind_name(kind) << '(' << key;
  if (kind == OpKind::kInsert) out << ", " << value;
  if (kind == OpKind::kScan) out << ", " << high;
  out << ')';
  return out.str();
}

std::string OpResult::to_string(OpKind kind) const {
  if (kind != OpKind::kScan) return value_string(value);
  std::ostringstream out;
  out << '{';
  for (std::size_t i = 0; i < entries.size(); ++i)
    out << (i ? ", " : "") << entries[i].first << ':' << entries[i].second;
  out << '}';
  return out.str();
}

bool well_formed(const History& history, std::string* why) {
  auto fail = [&](std::string msg) {
    if (why != nullptr) *why = std::move(msg);
    return false;
  };
  std::map<int, const Event*> open;
  std::uint64_t last = 0;
  bool first = true;
  for (const auto& e : history.events) {
    if (!first && e.timestamp <= last) return fail("timestamps not increasing");
    first = false;
    last = e.timestamp;
    auto it = open.find(e.thread);
    if (e.invoke) {
      if (it != open.end() && it->second != nullptr)
        return fail("thread " + std::to_string(e.thread) + " invokes twice");
      open[e.thread] = &e;
    } else {
      if (it == open.end() || it->second == nullptr)
        return fail("thread " + std::to_string(e.thread) + " returns without invoke");
      if (!(it->second->op == e.op))
        return fail("thread " + std::to_string(e.thread) + " returns another operation");
      it->second = nullptr;
    }
  }
  for (const auto& [thread, pending] : open)
    if (pending != nullptr)
      return fail("thread " + std::to_string(thread) + " has a pending operation");
  return true;
}

std::vector<CompletedOp> complete_operations(const History& history) {
  std::string why;
  if (!well_formed(history, &why)) throw std::invalid_argument{"malformed history: " + why};
  std::vector<CompletedOp> ops;
  std::map<int, std::size_t> open;
  for (const auto& e : history.events) {
    if (e.invoke) {
      open[e.thread] = ops.size();
      ops.push_back({e.thread, e.op, {}, e.timestamp, 0});
    } else {
      auto& op = ops[open.at(e.thread)];
      op.result = e.result;
      op.returned = e.timestamp;
    }
  }
  return ops;
}

OpResult apply(SequentialModel& model, const Operation& op) {
  OpResult r;
  switch (op.kind) {
    case OpKind::kFind: r.value = model.find(op.key); break;
    case OpKind::kInsert: r.value = model.insert(op.key, op.value); break;
    case OpKind::kRemove: r.value = model.remove(op.key); break;
    case OpKind::kScan: r.entries = model.scan(op.key, op.high); break;
  }
  return r;
}

namespace {

class Search {
 public:
  explicit Search(const std::vector<CompletedOp>& ops) : ops_{ops} {
    full_ = ops.size() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << ops.size()) - 1;
  }

  bool run(const SequentialModel& initial) { return dfs(0, initial); }

  std::vector<std::size_t> order;
  std::vector<std::size_t> longest;

 private:
  static std::string encode(std::uint64_t mask, const SequentialModel& model) {
    std::string key(reinterpret_cast<const char*>(&mask), sizeof mask);
    for (const auto& [k, v] : model.contents()) {
      key.append(reinterpret_cast<const char*>(&k), sizeof k);
      key.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
    return key;
  }

  bool dfs(std::uint64_t mask, const SequentialModel& model) {
    if (mask == full_) return true;
    if (!visited_.insert(encode(mask, model)).second) return false;

    auto earliest_return = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t i = 0; i < ops_.size(); ++i)
      if ((mask & (std::uint64_t{1} << i)) == 0)
        earliest_return = std::min(earliest_return, ops_[i].returned);

    for (std::size_t i = 0; i < ops_.size(); ++i) {
      const auto bit = std::uint64_t{1} << i;
      if ((mask & bit) != 0) continue;
      // Some pending operation finished before this one started.
      if (ops_[i].invoked > earliest_return) continue;
      SequentialModel next = model;
      if (!(apply(next, ops_[i].op) == ops_[i].result)) continue;
      order.push_back(i);
      if (dfs(mask | bit, next)) return true;
      order.pop_back();
    }
    if (order.size() >= longest.size()) longest = order;
    return false;
  }

  const std::vector<CompletedOp>& ops_;
  std::uint64_t full_ = 0;
  std::unordered_set<std::string> visited_;
};

}  // namespace

LinearizabilityResult check_linearizable(const History& history,
                                         const SequentialModel& initial) {
  const auto ops = complete_operations(history);
  if (ops.size() > kMaxCheckedOperations)
    throw std::length_error{"history too long for exhaustive checking"};

  Search search{ops};
  LinearizabilityResult result;
  if (search.run(initial)) {
    result.linearizable = true;
    result.order = std::move(search.order);
    return result;
  }

  // Replay the longest consistent prefix and report what could not follow.
  std::ostringstream out;
  SequentialModel model = initial;
  std::uint64_t done = 0;
  out << "longest consistent prefix:";
  for (auto i : search.longest) {
    out << ' ' << ops[i].op.to_string();
    apply(model, ops[i].op);
    done |= std::uint64_t{1} << i;
  }
  out << "\nno remaining operation can come next:";
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if ((done & (std::uint64_t{1} << i)) != 0) continue;
    SequentialModel probe = model;
    const auto expected = apply(probe, ops[i].op);
    out << "\n  T" << ops[i].thread << ' ' << ops[i].op.to_string() << " returned "
        << ops[i].result.to_string(ops[i].op.kind) << ", model gives "
        << expected.to_string(ops[i].op.kind) << " [" << ops[i].invoked << ", "
        << ops[i].returned << ']';
  }
  result.explanation = out.str();
  return result;
}

}  // namespace mvtree::verify
