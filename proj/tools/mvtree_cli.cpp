#include <CLI11.hpp>

#include <iostream>
#include <stdexcept>

#include "mvtree/bench/workload.hpp"
#include "mvtree/verify/races.hpp"
#include "mvtree/verify/recorder.hpp"
#include "mvtree/verify/stress.hpp"

namespace {

using mvtree::bench::WorkloadSpec;

struct BenchFlags {
  std::string preset;
  std::string out = "bench.csv";
  std::optional<int> threads, scan_threads, insert, remove, find, a, b, reps;
  std::optional<double> duration;
  std::optional<std::int64_t> key_range, scan_span;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> structure;
};

WorkloadSpec resolve(const BenchFlags& f) {
  WorkloadSpec spec;
  // Thread count first, so that presets deriving the scan share see it.
  if (f.threads) spec.threads = *f.threads;
  if (!f.preset.empty()) spec = mvtree::bench::apply_preset(f.preset[0], spec);
  if (f.scan_threads) spec.scan_threads = *f.scan_threads;
  if (f.insert) spec.mix.insert = *f.insert;
  if (f.remove) spec.mix.remove = *f.remove;
  if (f.find) spec.mix.find = *f.find;
  if (f.a) spec.a = *f.a;
  if (f.b) spec.b = *f.b;
  if (f.reps) spec.repetitions = *f.reps;
  if (f.duration) spec.duration_s = *f.duration;
  if (f.key_range) spec.key_range = *f.key_range;
  if (f.scan_span) spec.scan_span = *f.scan_span;
  if (f.seed) spec.seed = *f.seed;
  if (f.structure) spec.structure = *f.structure;
  return spec;
}

int bench(const BenchFlags& flags) {
  const auto spec = resolve(flags);
  const auto errors = mvtree::bench::validation_errors(spec);
  if (!errors.empty()) {
    for (const auto& e : errors) std::cerr << "error: " << e << '\n';
    return 2;
  }
  const auto report = mvtree::bench::run_experiment(spec);
  mvtree::bench::emit_report(report, flags.out, std::cout);
  std::cout << "wrote " << flags.out << '\n';
  return 0;
}

int verify_invariants(const mvtree::verify::StressConfig& config, int reps) {
  bool ok = true;
  for (int r = 0; r < reps; ++r) {
    auto c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(r);
    const auto out = mvtree::verify::run_stress(c);
    const bool pass = out.report.ok() && out.malformed_scans == 0;
    std::cout << "rep " << r + 1 << ": " << out.operations << " ops, " << out.scans
              << " scans, " << out.malformed_scans << " malformed; "
              << out.report.summary() << '\n';
    ok = ok && pass;
  }
  std::cout << (ok ? "OK" : "FAILED") << '\n';
  return ok ? 0 : 1;
}

int verify_lincheck(int histories, mvtree::verify::RecordConfig config) {
  int failures = 0;
  const auto base_seed = config.seed;
  for (int h = 0; h < histories; ++h) {
    config.seed = base_seed + static_cast<std::uint64_t>(h);
    const auto run = mvtree::verify::record_run(config);
    std::string problem = run.error;
    if (problem.empty()) {
      const auto result = mvtree::verify::check_linearizable(run.history, run.initial);
      if (!result.linearizable) problem = result.explanation;
    }
    if (problem.empty()) problem = mvtree::verify::check_scan_snapshots(run);
    if (!problem.empty()) {
      ++failures;
      std::cout << "history " << h << " (seed " << config.seed << "): " << problem << '\n';
    }
  }
  std::cout << histories - failures << '/' << histories << " histories linearizable\n";
  return failures == 0 ? 0 : 1;
}

int verify_races() {
  int failures = 0;
  const auto outcomes = mvtree::verify::run_race_scenarios();
  for (const auto& o : outcomes) {
    if (o.passed) continue;
    ++failures;
    std::cout << "FAIL " << o.name << '\n' << o.trace << '\n';
  }
  std::cout << outcomes.size() - static_cast<std::size_t>(failures) << '/' << outcomes.size()
            << " schedules passed\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Versioned (a,b)-tree: benchmarks and checks"};
  app.require_subcommand(1);

  BenchFlags bf;
  auto* bench_cmd = app.add_subcommand("bench", "Run a timed throughput experiment");
  bench_cmd->add_option("--preset", bf.preset, "Experiment a..f, applied before other flags")
      ->check(CLI::IsMember({"a", "b", "c", "d", "e", "f"}));
  bench_cmd->add_option("--threads", bf.threads, "Worker threads");
  bench_cmd->add_option("--scan-threads", bf.scan_threads, "Threads doing only scans");
  bench_cmd->add_option("--duration", bf.duration, "Seconds per repetition");
  bench_cmd->add_option("--key-range", bf.key_range, "Keys are drawn from [1, K]");
  bench_cmd->add_option("--insert", bf.insert, "Insert percentage");
  bench_cmd->add_option("--delete", bf.remove, "Delete percentage");
  bench_cmd->add_option("--find", bf.find, "Find percentage");
  bench_cmd->add_option("--scan-span", bf.scan_span, "Scan window width");
  bench_cmd->add_option("--a", bf.a, "Minimum node size");
  bench_cmd->add_option("--b", bf.b, "Maximum node size");
  bench_cmd->add_option("--seed", bf.seed, "RNG seed");
  bench_cmd->add_option("--reps", bf.reps, "Repetitions");
  bench_cmd->add_option("--structure", bf.structure, "tree or global-lock");
  bench_cmd->add_option("--out", bf.out, "CSV output path");

  auto* verify_cmd = app.add_subcommand("verify", "Correctness checks");
  verify_cmd->require_subcommand(1);

  mvtree::verify::StressConfig sc;
  int stress_reps = 1;
  auto* inv_cmd = verify_cmd->add_subcommand("invariants", "Stress run, then check invariants");
  inv_cmd->add_option("--threads", sc.threads);
  inv_cmd->add_option("--seconds", sc.seconds);
  inv_cmd->add_option("--key-range", sc.key_range);
  inv_cmd->add_option("--update", sc.update_percent, "Insert+delete percentage");
  inv_cmd->add_option("--find", sc.find_percent, "Find percentage; the rest scan");
  inv_cmd->add_option("--scan-span", sc.scan_span);
  inv_cmd->add_option("--a", sc.tree.a);
  inv_cmd->add_option("--b", sc.tree.b);
  inv_cmd->add_option("--seed", sc.seed);
  inv_cmd->add_option("--reps", stress_reps);

  mvtree::verify::RecordConfig rc;
  int histories = 1000;
  auto* lin_cmd = verify_cmd->add_subcommand("lincheck", "Record histories and check them");
  lin_cmd->add_option("--histories", histories);
  lin_cmd->add_option("--threads", rc.threads);
  lin_cmd->add_option("--ops", rc.ops_per_thread, "Operations per thread");
  lin_cmd->add_option("--key-space", rc.key_space);
  lin_cmd->add_option("--seed", rc.seed);

  auto* races_cmd = verify_cmd->add_subcommand("races", "Run the scripted helping races");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench_cmd->parsed()) return bench(bf);
    if (inv_cmd->parsed()) return verify_invariants(sc, stress_reps);
    if (lin_cmd->parsed()) return verify_lincheck(histories, rc);
    if (races_cmd->parsed()) return verify_races();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
