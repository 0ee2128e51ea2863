#include "mvtree/bench/workload.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "mvtree/thread_slot.hpp"

namespace mvtree::bench {

std::vector<std::string> validation_errors(const WorkloadSpec& spec) {
  std::vector<std::string> errors;
  if (spec.threads < 1) errors.emplace_back("threads must be at least 1");
  if (spec.scan_threads < 0 || spec.scan_threads > spec.threads)
    errors.emplace_back("scan threads must be between 0 and threads");
  if (!(spec.duration_s > 0)) errors.emplace_back("duration must be positive");
  if (spec.key_range < 2) errors.emplace_back("key range must be at least 2");
  if (spec.mix.insert < 0 || spec.mix.remove < 0 || spec.mix.find < 0 ||
      spec.mix.insert + spec.mix.remove + spec.mix.find != 100)
    errors.emplace_back("insert/delete/find percentages must be non-negative and sum to 100");
  if (spec.scan_span < 1) errors.emplace_back("scan span must be at least 1");
  if (spec.a < 2 || spec.b < 2 * spec.a) errors.emplace_back("need 2 <= a <= b/2");
  if (spec.repetitions < 0) errors.emplace_back("repetitions must be non-negative");
  if (static_cast<std::size_t>(spec.threads) + 16 > kMaxThreadSlots)
    errors.emplace_back("too many threads");
  if (spec.structure != "tree" && spec.structure != "global-lock")
    errors.emplace_back("structure must be tree or global-lock");
  return errors;
}

void validate(const WorkloadSpec& spec) {
  const auto errors = validation_errors(spec);
  if (errors.empty()) return;
  std::string msg = "invalid workload:";
  for (const auto& e : errors) msg += "\n  " + e;
  throw std::invalid_argument{msg};
}

WorkloadSpec apply_preset(char name, WorkloadSpec base) {
  switch (name) {
    case 'a':
      base.scan_threads = base.threads;
      break;
    case 'b':
      base.scan_threads = base.threads / 2;
      base.mix = {50, 50, 0};
      break;
    case 'c':
      base.scan_threads = 0;
      base.mix = {0, 0, 100};
      break;
    case 'd':
      base.scan_threads = 0;
      base.mix = {80, 20, 0};
      break;
    case 'e':
      base.scan_threads = 0;
      base.mix = {100, 0, 0};
      break;
    case 'f':
      base.scan_threads = 0;
      base.mix = {9, 1, 90};
      break;
    default:
      throw std::invalid_argument{std::string{"unknown preset: "} + name};
  }
  return base;
}

std::vector<Key> seed(ConcurrentSet& set, const WorkloadSpec& spec) {
  const auto target = static_cast<std::size_t>(spec.key_range / 2);
  std::mt19937_64 rng{spec.seed};
  std::uniform_int_distribution<Key> key{1, spec.key_range};
  std::unordered_set<Key> inserted;
  inserted.reserve(target);
  while (inserted.size() < target) {
    const Key k = key(rng);
    if (set.insert(k, k)) inserted.insert(k);
  }
  std::vector<Key> out(inserted.begin(), inserted.end());
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct ThreadCounts {
  std::uint64_t inserts = 0;
  std::uint64_t deletes = 0;
  std::uint64_t finds = 0;
  std::uint64_t scans = 0;
  std::uint64_t scan_keys = 0;
};

std::uint64_t thread_seed(std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::uint64_t out;
  seq.generate(reinterpret_cast<std::uint32_t*>(&out),
               reinterpret_cast<std::uint32_t*>(&out) + 2);
  return out;
}

}  // namespace

RepetitionRow run_phase(ConcurrentSet& set, const WorkloadSpec& spec, int rep) {
  std::vector<ThreadCounts> counts(static_cast<std::size_t>(spec.threads));
  std::atomic<bool> stop{false};
  std::barrier start{spec.threads + 1};
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(spec.threads));
  const Key low_max = std::max<Key>(1, spec.key_range - spec.scan_span + 1);

  for (int t = 0; t < spec.threads; ++t) {
    const bool scanner = t < spec.scan_threads;
    workers.emplace_back([&, t, scanner] {
      std::mt19937_64 rng{thread_seed(spec.seed + static_cast<std::uint64_t>(rep), t)};
      std::uniform_int_distribution<Key> key{1, spec.key_range};
      std::uniform_int_distribution<Key> low{1, low_max};
      std::uniform_int_distribution<int> percent{0, 99};
      ThreadCounts c;
      start.arrive_and_wait();
      if (scanner) {
        while (!stop.load(std::memory_order_relaxed)) {
          const Key l = low(rng);
          c.scan_keys += set.scan(l, l + spec.scan_span - 1);
          ++c.scans;
        }
      } else {
        while (!stop.load(std::memory_order_relaxed)) {
          const int p = percent(rng);
          const Key k = key(rng);
          if (p < spec.mix.insert) {
            set.insert(k, k);
            ++c.inserts;
          } else if (p < spec.mix.insert + spec.mix.remove) {
            set.remove(k);
            ++c.deletes;
          } else {
            set.contains(k);
            ++c.finds;
          }
        }
      }
      counts[static_cast<std::size_t>(t)] = c;
    });
  }

  start.arrive_and_wait();
  const auto began = std::chrono::steady_clock::now();
  std::this_thread::sleep_for(std::chrono::duration<double>(spec.duration_s));
  stop.store(true, std::memory_order_relaxed);
  for (auto& w : workers) w.join();
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - began).count();

  RepetitionRow row;
  row.rep = rep;
  row.threads = spec.threads;
  row.scan_threads = spec.scan_threads;
  row.duration_s = elapsed;
  for (const auto& c : counts) {
    row.inserts += static_cast<double>(c.inserts);
    row.deletes += static_cast<double>(c.deletes);
    row.finds += static_cast<double>(c.finds);
    row.scans += static_cast<double>(c.scans);
    row.scan_keys_collected += static_cast<double>(c.scan_keys);
  }
  row.update_ops_per_s = (row.inserts + row.deletes + row.finds) / elapsed;
  row.scan_keys_per_s = row.scan_keys_collected / elapsed;
  return row;
}

RunReport run_experiment(const WorkloadSpec& spec) {
  validate(spec);
  RunReport report;
  report.spec = spec;
  const auto max_threads = static_cast<std::size_t>(spec.threads) + 16;
  for (int rep = 1; rep <= spec.repetitions; ++rep) {
    auto set = make_set(spec.structure, spec.a, spec.b, std::max<std::size_t>(max_threads, 128));
    seed(*set, spec);
    report.repetitions.push_back(run_phase(*set, spec, rep));
  }
  return report;
}

RepetitionRow RunReport::mean() const {
  RepetitionRow m;
  if (repetitions.empty()) return m;
  m.threads = repetitions.front().threads;
  m.scan_threads = repetitions.front().scan_threads;
  for (const auto& r : repetitions) {
    m.duration_s += r.duration_s;
    m.inserts += r.inserts;
    m.deletes += r.deletes;
    m.finds += r.finds;
    m.scans += r.scans;
    m.scan_keys_collected += r.scan_keys_collected;
    m.update_ops_per_s += r.update_ops_per_s;
    m.scan_keys_per_s += r.scan_keys_per_s;
  }
  const auto n = static_cast<double>(repetitions.size());
  m.duration_s /= n;
  m.inserts /= n;
  m.deletes /= n;
  m.finds /= n;
  m.scans /= n;
  m.scan_keys_collected /= n;
  m.update_ops_per_s /= n;
  m.scan_keys_per_s /= n;
  return m;
}

namespace {

void write_row(std::ostream& out, const std::string& rep, const RepetitionRow& r) {
  out << rep << ',' << r.threads << ',' << r.scan_threads << ',' << r.duration_s << ','
      << r.inserts << ',' << r.deletes << ',' << r.finds << ',' << r.scans << ','
      << r.scan_keys_collected << ',' << r.update_ops_per_s << ',' << r.scan_keys_per_s
      << '\n';
}

}  // namespace

void write_csv(const RunReport& report, std::ostream& out) {
  const auto old_precision = out.precision(17);
  out << kCsvHeader << '\n';
  for (const auto& r : report.repetitions) write_row(out, std::to_string(r.rep), r);
  if (!report.repetitions.empty()) write_row(out, "mean", report.mean());
  out.precision(old_precision);
}

void write_summary(const RunReport& report, std::ostream& out) {
  const auto& s = report.spec;
  out << "structure=" << s.structure << " threads=" << s.threads
      << " scan_threads=" << s.scan_threads << " key_range=" << s.key_range
      << " mix(insert/delete/find)=" << s.mix.insert << '/' << s.mix.remove << '/'
      << s.mix.find << " scan_span=" << s.scan_span << " a=" << s.a << " b=" << s.b
      << " duration=" << s.duration_s << "s reps=" << s.repetitions << '\n';
  const auto flags = out.flags();
  out << std::fixed << std::setprecision(0);
  for (const auto& r : report.repetitions)
    out << "  rep " << r.rep << ": " << r.update_ops_per_s << " ops/s, "
        << r.scan_keys_per_s << " scan keys/s\n";
  if (!report.repetitions.empty()) {
    const auto m = report.mean();
    out << "  mean: " << m.update_ops_per_s << " ops/s, " << m.scan_keys_per_s
        << " scan keys/s\n";
  }
  out.flags(flags);
}

void emit_report(const RunReport& report, const std::string& path, std::ostream& summary) {
  std::ofstream file{path};
  if (!file) throw std::runtime_error{"cannot open " + path + " for writing"};
  write_csv(report, file);
  file.flush();
  if (!file) throw std::runtime_error{"failed writing " + path};
  write_summary(report, summary);
}

ParsedCsv parse_csv(std::istream& in) {
  ParsedCsv out;
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw std::runtime_error{"CSV header missing or unexpected"};
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss{line};
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 11)
      throw std::runtime_error{"CSV line " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " columns"};
    try {
      RepetitionRow r;
      const bool is_mean = cells[0] == "mean";
      r.rep = is_mean ? 0 : std::stoi(cells[0]);
      r.threads = std::stoi(cells[1]);
      r.scan_threads = std::stoi(cells[2]);
      r.duration_s = std::stod(cells[3]);
      r.inserts = std::stod(cells[4]);
      r.deletes = std::stod(cells[5]);
      r.finds = std::stod(cells[6]);
      r.scans = std::stod(cells[7]);
      r.scan_keys_collected = std::stod(cells[8]);
      r.update_ops_per_s = std::stod(cells[9]);
      r.scan_keys_per_s = std::stod(cells[10]);
      if (is_mean)
        out.mean = r;
      else
        out.rows.push_back(r);
    } catch (const std::logic_error&) {
      throw std::runtime_error{"CSV line " + std::to_string(line_no) + " is malformed"};
    }
  }
  return out;
}

}  // namespace mvtree::bench
