// pemlab: sweeps, band checks and one-shot runs on the simulated machine.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pemlab/bench.hpp"
#include "pemlab/geometry.hpp"
#include "pemlab/hull.hpp"
#include "pemlab/machine.hpp"

namespace {

using namespace pemlab;

struct MachineArgs {
  std::size_t n = 4096;
  int p = 1;
  std::size_t M = 1024;
  std::size_t B = 16;
  std::uint64_t seed = 1;

  void attach(CLI::App* app) {
    app->add_option("--n", n, "input size")->check(CLI::PositiveNumber);
    app->add_option("--p", p, "cores")->check(CLI::Range(1, MachineConfig::kMaxCores));
    app->add_option("--M", M, "cache words per core")->check(CLI::PositiveNumber);
    app->add_option("--B", B, "block words")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "random seed (PEMLAB_SEED overrides)");
  }

  bench::Scenario scenario(std::string algo) const {
    bench::Scenario s;
    s.algo = std::move(algo);
    s.n = n;
    s.p = p;
    s.M = M;
    s.B = B;
    s.seed = bench::seed_from_env().value_or(seed);
    return s;
  }
};

int emit_row(const bench::ScenarioRow& row) {
  bench::write_csv(std::cout, {row});
  if (row.ok()) return 0;
  std::cerr << "pemlab: " << row.status << '\n';
  return row.status.rfind("skipped", 0) == 0 ? 3 : 1;
}

int hull_from_file(const MachineArgs& args, const std::string& planes_path, const std::string& points_path) {
  MachineConfig mc;
  mc.p = args.p;
  mc.M = args.M;
  mc.B = args.B;
  Machine m(mc);
  HullConfig cfg;
  cfg.seed = bench::seed_from_env().value_or(args.seed);
  HullChain chain;
  if (!planes_path.empty()) {
    std::ifstream in(planes_path);
    if (!in) throw std::runtime_error("cannot open " + planes_path);
    const auto planes = read_planes(in);
    // Plane files carry no interior point; the origin must be strictly inside.
    chain = hull_main(m, m.all_cores(), planes, Point2{0, 0}, cfg);
  } else {
    std::ifstream in(points_path);
    if (!in) throw std::runtime_error("cannot open " + points_path);
    chain = convex_hull_2d(m, m.all_cores(), read_points(in), cfg);
  }
  write_chain(std::cout, chain);
  const auto ledger = m.ledger();
  const auto t = ledger.total();
  std::cerr << "ops=" << t.ops << " crit_path=" << ledger.crit_path << " cache_misses=" << t.cache_misses
            << " block_misses=" << t.block_misses << " rounds=" << ledger.rounds << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pemlab: randomized algorithms on a simulated private-cache multicore"};
  app.require_subcommand(1);

  std::string config_path, out_path, csv_path;
  unsigned jobs = 1;
  double band = 4.0;
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep and write CSV");
  sweep->add_option("--config", config_path, "sweep config (INI)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_path, "CSV output path ('-' for stdout)")->required();
  sweep->add_option("--jobs", jobs, "rows simulated concurrently")->check(CLI::PositiveNumber);

  auto* check = app.add_subcommand("check", "check per-series ratio bands of a sweep CSV");
  check->add_option("--csv", csv_path, "CSV produced by sweep")->required()->check(CLI::ExistingFile);
  check->add_option("--band", band, "allowed max/min ratio")->check(CLI::PositiveNumber);

  MachineArgs sort_args;
  int x = 32, retry_cap = 20;
  auto* sort = app.add_subcommand("sort", "sample sort of random keys, one CSV row");
  sort_args.attach(sort);
  sort->add_option("--x", x, "sampling exponent")->check(CLI::PositiveNumber);
  sort->add_option("--retry-cap", retry_cap, "resamples per level")->check(CLI::NonNegativeNumber);

  MachineArgs hull_args;
  std::string planes_path, points_path;
  auto* hull = app.add_subcommand("hull", "half-plane intersection (random, or from a file) or 2-D hull of points");
  hull_args.attach(hull);
  auto* planes_opt = hull->add_option("--planes", planes_path, "file of 'a b c' lines, a x + b y <= c, origin inside")
                         ->check(CLI::ExistingFile);
  hull->add_option("--points", points_path, "file of 'x y' lines for the convex hull")
      ->check(CLI::ExistingFile)
      ->excludes(planes_opt);

  MachineArgs prefix_args;
  bool oblivious = false;
  auto* prefix = app.add_subcommand("prefix", "prefix sums, optionally without using the core count");
  prefix_args.attach(prefix);
  prefix->add_flag("--oblivious", oblivious, "estimate cores and ids on the fly");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep) {
      const auto cfg = bench::load_sweep(config_path, bench::seed_from_env());
      const auto rows = bench::run_sweep(cfg, jobs);
      if (out_path == "-") {
        bench::write_csv(std::cout, rows);
      } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        bench::write_csv(out, rows);
      }
      return 0;
    }
    if (*check) {
      std::ifstream in(csv_path);
      const auto report = bench::check_bands(bench::read_csv(in), band);
      bench::print_report(std::cout, report);
      return report.passed() ? 0 : 1;
    }
    if (*sort) {
      auto s = sort_args.scenario("sort");
      s.x = x;
      s.retry_cap = retry_cap;
      return emit_row(bench::run_scenario(s));
    }
    if (*hull) {
      if (!planes_path.empty() || !points_path.empty()) return hull_from_file(hull_args, planes_path, points_path);
      return emit_row(bench::run_scenario(hull_args.scenario("hull")));
    }
    if (*prefix) return emit_row(bench::run_scenario(prefix_args.scenario(oblivious ? "oprefix" : "prefix")));
  } catch (const std::exception& e) {
    std::cerr << "pemlab: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
