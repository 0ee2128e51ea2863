#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mvtree/bench/workload.hpp"

namespace {

using namespace mvtree::bench;
using mvtree::Key;

WorkloadSpec small_spec() {
  WorkloadSpec s;
  s.threads = 2;
  s.duration_s = 0.05;
  s.key_range = 1000;
  s.scan_span = 50;
  s.b = 16;
  s.repetitions = 1;
  return s;
}

// Counts every call so totals can be compared with the report.
class CountingSet final : public ConcurrentSet {
 public:
  explicit CountingSet(std::unique_ptr<ConcurrentSet> inner) : inner_{std::move(inner)} {}

  bool insert(Key key, std::int64_t value) override {
    ++inserts;
    return inner_->insert(key, value);
  }
  bool remove(Key key) override {
    ++removes;
    return inner_->remove(key);
  }
  bool contains(Key key) override {
    ++finds;
    return inner_->contains(key);
  }
  std::size_t scan(Key low, Key high) override {
    ++scans;
    const auto n = inner_->scan(low, high);
    scan_keys += n;
    return n;
  }

  std::atomic<std::uint64_t> inserts{0}, removes{0}, finds{0}, scans{0}, scan_keys{0};

 private:
  std::unique_ptr<ConcurrentSet> inner_;
};

TEST(Validation, DefaultsAreRunnable) {
  EXPECT_TRUE(validation_errors(WorkloadSpec{}).empty());
  const WorkloadSpec d;
  EXPECT_EQ(d.threads, 80);
  EXPECT_EQ(d.a, 2);
  EXPECT_EQ(d.b, 256);
  EXPECT_EQ(d.duration_s, 10.0);
  EXPECT_EQ(d.repetitions, 10);
  EXPECT_EQ(d.scan_span, 1000);
}

TEST(Validation, RejectsBadConfigurations) {
  auto bad = [](auto mutate) {
    WorkloadSpec s = small_spec();
    mutate(s);
    return !validation_errors(s).empty();
  };
  EXPECT_TRUE(bad([](WorkloadSpec& s) { s.mix = {50, 40, 0}; }));
  EXPECT_TRUE(bad([](WorkloadSpec& s) { s.mix = {-10, 10, 100}; }));
  EXPECT_TRUE(bad([](WorkloadSpec& s) { s.scan_threads = 3; }));
  EXPECT_TRUE(bad([](WorkloadSpec& s) { s.scan_threads = -1; }));
  EXPECT_TRUE(bad([](WorkloadSpec& s) { s.threads = 0; }));
  EXPECT_TRUE(bad([](WorkloadSpec& s) { s.a = 1; }));
  EXPECT_TRUE(bad([](WorkloadSpec& s) { s.a = 9; }));
  EXPECT_TRUE(bad([](WorkloadSpec& s) { s.duration_s = 0; }));
  EXPECT_TRUE(bad([](WorkloadSpec& s) { s.key_range = 1; }));
  EXPECT_TRUE(bad([](WorkloadSpec& s) { s.scan_span = 0; }));
  EXPECT_TRUE(bad([](WorkloadSpec& s) { s.structure = "skiplist"; }));
  EXPECT_TRUE(bad([](WorkloadSpec& s) { s.threads = 5000; }));
  EXPECT_FALSE(bad([](WorkloadSpec& s) { s.a = 8; }));
}

TEST(Validation, RunExperimentRejectsBeforeStarting) {
  WorkloadSpec s = small_spec();
  s.mix = {60, 60, 0};
  EXPECT_THROW(run_experiment(s), std::invalid_argument);
}

TEST(Presets, MatchExperimentTable) {
  WorkloadSpec base;
  base.threads = 8;
  const auto a = apply_preset('a', base);
  EXPECT_EQ(a.scan_threads, 8);
  const auto b = apply_preset('b', base);
  EXPECT_EQ(b.scan_threads, 4);
  EXPECT_EQ(b.mix.insert, 50);
  EXPECT_EQ(b.mix.remove, 50);
  const auto c = apply_preset('c', base);
  EXPECT_EQ(c.scan_threads, 0);
  EXPECT_EQ(c.mix.find, 100);
  const auto d = apply_preset('d', base);
  EXPECT_EQ(d.scan_threads, 0);
  EXPECT_EQ(d.mix.insert, 80);
  EXPECT_EQ(d.mix.remove, 20);
  EXPECT_EQ(d.mix.find, 0);
  const auto e = apply_preset('e', base);
  EXPECT_EQ(e.mix.insert, 100);
  const auto f = apply_preset('f', base);
  EXPECT_EQ(f.scan_threads, 0);
  EXPECT_EQ(f.mix.find, 90);
  EXPECT_EQ(f.mix.insert, 9);
  EXPECT_EQ(f.mix.remove, 1);
  for (char p : {'a', 'b', 'c', 'd', 'e', 'f'})
    EXPECT_TRUE(validation_errors(apply_preset(p, base)).empty()) << p;
  EXPECT_THROW(apply_preset('g', base), std::invalid_argument);
}

TEST(Seed, FillsHalfTheKeyRange) {
  for (const auto* structure : {"tree", "global-lock"}) {
    WorkloadSpec s = small_spec();
    auto set = make_set(structure, s.a, s.b, 8);
    const auto keys = seed(*set, s);
    EXPECT_EQ(keys.size(), 500U);
    EXPECT_EQ(set->scan(1, 1000), 500U);
    EXPECT_EQ(std::set<Key>(keys.begin(), keys.end()).size(), 500U);
    for (const Key k : keys) {
      EXPECT_GE(k, 1);
      EXPECT_LE(k, 1000);
      EXPECT_TRUE(set->contains(k));
    }
  }
}

TEST(Seed, SmallestRange) {
  WorkloadSpec s = small_spec();
  s.key_range = 2;
  auto set = make_set("tree", 2, 4, 8);
  EXPECT_EQ(seed(*set, s).size(), 1U);
  EXPECT_EQ(set->scan(1, 2), 1U);
}

TEST(Seed, DeterministicInSeed) {
  WorkloadSpec s = small_spec();
  auto x = make_set("tree", 2, 16, 8);
  auto y = make_set("global-lock", 2, 16, 8);
  EXPECT_EQ(seed(*x, s), seed(*y, s));
  s.seed = 2;
  auto z = make_set("tree", 2, 16, 8);
  EXPECT_NE(seed(*z, s), seed(*x, small_spec()));
}

TEST(RunPhase, FindOnlyHasNoUpdates) {
  WorkloadSpec s = small_spec();
  s.threads = 1;
  s.duration_s = 1.0;
  s.mix = {0, 0, 100};
  const auto report = run_experiment(s);
  ASSERT_EQ(report.repetitions.size(), 1U);
  const auto& row = report.repetitions.front();
  EXPECT_EQ(row.inserts, 0);
  EXPECT_EQ(row.deletes, 0);
  EXPECT_EQ(row.scans, 0);
  EXPECT_GT(row.finds, 0);
  EXPECT_GE(row.duration_s, 1.0);
}

TEST(RunPhase, TotalsEqualCallsMade) {
  WorkloadSpec s = apply_preset('b', small_spec());
  s.mix = {30, 30, 40};
  CountingSet set{make_set("tree", s.a, s.b, 8)};
  const auto seeded = seed(set, s);
  const auto seed_inserts = set.inserts.load();
  EXPECT_GE(seed_inserts, seeded.size());
  const auto row = run_phase(set, s, 1);
  EXPECT_EQ(row.inserts, static_cast<double>(set.inserts - seed_inserts));
  EXPECT_EQ(row.deletes, static_cast<double>(set.removes.load()));
  EXPECT_EQ(row.finds, static_cast<double>(set.finds.load()));
  EXPECT_EQ(row.scans, static_cast<double>(set.scans.load()));
  EXPECT_EQ(row.scan_keys_collected, static_cast<double>(set.scan_keys.load()));
  EXPECT_GT(row.scans, 0);
  EXPECT_DOUBLE_EQ(row.update_ops_per_s, (row.inserts + row.deletes + row.finds) / row.duration_s);
  EXPECT_DOUBLE_EQ(row.scan_keys_per_s, row.scan_keys_collected / row.duration_s);
}

TEST(RunPhase, ScansStayInsideWindow) {
  WorkloadSpec s = apply_preset('a', small_spec());
  s.scan_span = 10;
  auto set = make_set("tree", s.a, s.b, 8);
  seed(*set, s);
  const auto row = run_phase(*set, s, 1);
  EXPECT_GT(row.scans, 0);
  EXPECT_LE(row.scan_keys_collected, row.scans * 10);
}

TEST(Report, CsvHasRowPerRepAndMean) {
  WorkloadSpec s = small_spec();
  s.duration_s = 0.01;
  s.repetitions = 10;
  const auto report = run_experiment(s);
  std::ostringstream out;
  write_csv(report, out);
  std::istringstream lines{out.str()};
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, kCsvHeader);
  int data = 0;
  std::string last;
  while (std::getline(lines, line)) {
    ++data;
    last = line;
  }
  EXPECT_EQ(data, 11);
  EXPECT_EQ(last.rfind("mean,", 0), 0U);
}

TEST(Report, EmptyReportIsHeaderOnly) {
  std::ostringstream out;
  write_csv(RunReport{}, out);
  EXPECT_EQ(out.str(), std::string{kCsvHeader} + "\n");
  std::istringstream in{out.str()};
  const auto parsed = parse_csv(in);
  EXPECT_TRUE(parsed.rows.empty());
  EXPECT_FALSE(parsed.mean.has_value());
}

TEST(Report, MeanRecomputesFromParsedRows) {
  WorkloadSpec s = apply_preset('b', small_spec());
  s.duration_s = 0.02;
  s.repetitions = 3;
  const auto report = run_experiment(s);
  std::ostringstream out;
  write_csv(report, out);
  std::istringstream in{out.str()};
  const auto parsed = parse_csv(in);
  ASSERT_EQ(parsed.rows.size(), 3U);
  ASSERT_TRUE(parsed.mean.has_value());
  // Oracle: plain column averages of the parsed rows.
  double ins = 0, del = 0, scans = 0, keys = 0, ups = 0, kps = 0, dur = 0;
  for (std::size_t i = 0; i < parsed.rows.size(); ++i) {
    const auto& r = parsed.rows[i];
    EXPECT_EQ(r.rep, static_cast<int>(i) + 1);
    EXPECT_EQ(r.inserts, report.repetitions[i].inserts);
    ins += r.inserts;
    del += r.deletes;
    scans += r.scans;
    keys += r.scan_keys_collected;
    ups += r.update_ops_per_s;
    kps += r.scan_keys_per_s;
    dur += r.duration_s;
  }
  const auto& m = *parsed.mean;
  EXPECT_DOUBLE_EQ(m.inserts, ins / 3);
  EXPECT_DOUBLE_EQ(m.deletes, del / 3);
  EXPECT_DOUBLE_EQ(m.scans, scans / 3);
  EXPECT_DOUBLE_EQ(m.scan_keys_collected, keys / 3);
  EXPECT_DOUBLE_EQ(m.update_ops_per_s, ups / 3);
  EXPECT_DOUBLE_EQ(m.scan_keys_per_s, kps / 3);
  EXPECT_DOUBLE_EQ(m.duration_s, dur / 3);
  EXPECT_EQ(m.threads, 2);
  EXPECT_EQ(m.scan_threads, 1);
}

TEST(Report, MalformedCsvIsRejected) {
  std::istringstream wrong_header{"a,b,c\n"};
  EXPECT_THROW(parse_csv(wrong_header), std::runtime_error);
  std::istringstream short_row{std::string{kCsvHeader} + "\n1,2,3\n"};
  EXPECT_THROW(parse_csv(short_row), std::runtime_error);
}

TEST(Report, EmitWritesFileAndSummary) {
  const auto path = std::filesystem::temp_directory_path() / "mvtree_bench_test.csv";
  WorkloadSpec s = small_spec();
  s.duration_s = 0.01;
  const auto report = run_experiment(s);
  std::ostringstream summary;
  emit_report(report, path.string(), summary);
  EXPECT_FALSE(summary.str().empty());
  std::ifstream in{path};
  const auto parsed = parse_csv(in);
  EXPECT_EQ(parsed.rows.size(), 1U);
  std::filesystem::remove(path);
}

TEST(Report, EmitNamesUnwritablePath) {
  const std::string path = "/nonexistent-dir/out.csv";
  std::ostringstream summary;
  try {
    emit_report(RunReport{}, path, summary);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string{e.what()}.find(path), std::string::npos);
  }
}

TEST(Sets, AdaptersAgree) {
  for (const auto* structure : {"tree", "global-lock"}) {
    auto set = make_set(structure, 2, 4, 8);
    EXPECT_TRUE(set->insert(5, 5));
    EXPECT_FALSE(set->insert(5, 6));
    EXPECT_TRUE(set->contains(5));
    EXPECT_TRUE(set->insert(7, 7));
    EXPECT_EQ(set->scan(1, 10), 2U);
    EXPECT_EQ(set->scan(6, 10), 1U);
    EXPECT_TRUE(set->remove(5));
    EXPECT_FALSE(set->remove(5));
    EXPECT_FALSE(set->contains(5));
  }
  EXPECT_THROW(make_set("nope", 2, 4, 8), std::invalid_argument);
}

}  // namespace
