#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "pemlab/bench.hpp"

using namespace pemlab::bench;

namespace {

std::string to_csv(const std::vector<ScenarioRow>& rows) {
  std::ostringstream out;
  write_csv(out, rows);
  return out.str();
}

ScenarioRow ratio_row(std::size_t n, double ratio) {
  ScenarioRow r;
  r.algo = "sort";
  r.n = n;
  r.p = 4;
  r.M = 4096;
  r.B = 64;
  r.ratio = ratio;
  r.bound = 1;
  return r;
}

}  // namespace

TEST_CASE("empty sweep writes only the header") {
  const auto rows = run_sweep(parse_sweep(""));
  CHECK(rows.empty());
  CHECK(to_csv(rows) == std::string(kCsvHeader) + "\n");
}

TEST_CASE("sweep config expands lists and powers of two") {
  const auto cfg = parse_sweep(
      "[sort]\n"
      "n = 2^12..2^14, 100\n"
      "p = 1, 2\n"
      "seed = 7\n"
      "[sort:wide]\n"
      "n = 2^10\n"
      "M = 64\n"
      "[prefix]\n"
      "n = 4096\n");
  REQUIRE(cfg.scenarios.size() == 4 * 2 + 1 + 1);
  CHECK(cfg.scenarios[0].algo == "sort");
  CHECK(cfg.scenarios[0].n == 4096);
  CHECK(cfg.scenarios[2].n == 8192);
  CHECK(cfg.scenarios[6].n == 100);
  CHECK(cfg.scenarios[0].seed == 7);
  CHECK(cfg.scenarios[8].algo == "sort");
  CHECK(cfg.scenarios[8].M == 64);
  CHECK(cfg.scenarios[9].algo == "prefix");
  CHECK(cfg.scenarios[9].B == 16);

  const auto overridden = parse_sweep("[sort]\nn = 1024\nseed = 1, 2, 3\n", 99);
  REQUIRE(overridden.scenarios.size() == 1);
  CHECK(overridden.scenarios[0].seed == 99);

  CHECK_THROWS_AS(parse_sweep("[sort]\nn = 10\nwidth = 3\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_sweep("[sort]\nn = 3..9\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_sweep("[sort]\nn = 12abc\n"), std::invalid_argument);
}

TEST_CASE("PEMLAB_SEED is read from the environment") {
  ::setenv("PEMLAB_SEED", "1234", 1);
  CHECK(seed_from_env() == 1234u);
  ::setenv("PEMLAB_SEED", "nope", 1);
  CHECK_FALSE(seed_from_env().has_value());
  ::unsetenv("PEMLAB_SEED");
  CHECK_FALSE(seed_from_env().has_value());
}

TEST_CASE("single sort row has its ratio populated") {
  Scenario s;
  s.algo = "sort";
  s.n = 1 << 12;
  s.p = 1;
  s.M = 1024;
  s.B = 16;
  const auto row = run_scenario(s);
  REQUIRE(row.ok());
  CHECK(row.ops > 0);
  CHECK(row.cache_misses > 0);
  CHECK(row.bound == doctest::Approx(256.0 * 12.0 / 10.0));
  CHECK(row.ratio == doctest::Approx(static_cast<double>(row.cache_misses) / row.bound));
}

TEST_CASE("rows that violate preconditions are skipped with a reason") {
  Scenario s;
  s.algo = "sort";
  s.n = 1024;
  s.p = 4;
  s.M = 1024;
  CHECK(run_scenario(s).status == "skipped:n<M*p");

  s.algo = "hull";
  s.M = 1;
  CHECK(run_scenario(s).status == "skipped:degenerate-bound");

  s.algo = "oprefix";
  s.M = 1024;
  s.n = 16;
  s.p = 8;
  CHECK(run_scenario(s).status.rfind("skipped:", 0) == 0);

  s.algo = "bogus";
  s.n = 1024;
  s.p = 1;
  CHECK(run_scenario(s).status.rfind("failed:", 0) == 0);
}

TEST_CASE("sweeps are deterministic and independent of the job count") {
  const auto cfg = parse_sweep(
      "[sort]\nn = 2^12..2^13\np = 1, 2\nM = 1024\nB = 32\nseed = 1, 2\n"
      "[hull]\nn = 256\np = 2\nseed = 3\n"
      "[oprefix]\nn = 4096\np = 4\n");
  const auto one = to_csv(run_sweep(cfg, 1));
  CHECK(one == to_csv(run_sweep(cfg, 1)));
  CHECK(one == to_csv(run_sweep(cfg, 4)));
}

TEST_CASE("csv round trip") {
  const auto rows = run_sweep(parse_sweep("[prefix]\nn = 1024, 2048\np = 2\n"));
  std::istringstream in(to_csv(rows));
  const auto back = read_csv(in);
  REQUIRE(back.size() == rows.size());
  CHECK(to_csv(back) == to_csv(rows));

  std::istringstream bad("algo,n\nsort,1\n");
  CHECK_THROWS_AS(read_csv(bad), std::invalid_argument);
}

TEST_CASE("band checks") {
  SUBCASE("constant ratios pass at a band just above 1") {
    const auto report = check_bands({ratio_row(1 << 12, 2.0), ratio_row(1 << 13, 2.0), ratio_row(1 << 14, 2.0)}, 1.0001);
    CHECK(report.passed());
  }
  SUBCASE("a 10x outlier fails at band 4") {
    const auto report = check_bands({ratio_row(1 << 12, 2.0), ratio_row(1 << 13, 20.0), ratio_row(1 << 14, 2.0)}, 4);
    CHECK_FALSE(report.passed());
    CHECK(report.series.at(0).status == BandStatus::fail);
  }
  SUBCASE("a single row is inconclusive") {
    const auto report = check_bands({ratio_row(1 << 12, 2.0)}, 4);
    REQUIRE(report.series.size() == 1);
    CHECK(report.series[0].status == BandStatus::inconclusive);
    CHECK_FALSE(report.passed());
  }
  SUBCASE("skipped rows are ignored and series are split by p") {
    auto skipped = ratio_row(1 << 15, 100.0);
    skipped.status = "skipped:n<M*p";
    auto other_p = ratio_row(1 << 12, 50.0);
    other_p.p = 8;
    const auto report =
        check_bands({ratio_row(1 << 12, 2.0), ratio_row(1 << 13, 3.0), skipped, other_p, ratio_row(1 << 13, 60.0)}, 4);
    CHECK(report.series.size() == 2);
  }
}
