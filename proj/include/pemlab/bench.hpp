#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pemlab::bench {

inline constexpr std::string_view kCsvHeader =
    "algo,n,p,M,B,seed,status,ops,crit_path,cache_misses,block_misses,rounds,retries,bound,ratio";

// One simulator run. Algorithms: sort, hull, prefix, oprefix.
struct Scenario {
  std::string algo;
  std::size_t n = 0;
  int p = 1;
  std::size_t M = 1024;
  std::size_t B = 16;
  std::uint64_t seed = 1;
  int x = 32;          // sort sampling exponent
  int retry_cap = 20;  // sort resample cap
  bool strict = true;  // false runs rows that break the n >= M*p precondition
};

struct ScenarioRow {
  std::string algo;
  std::size_t n = 0;
  int p = 1;
  std::size_t M = 0;
  std::size_t B = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok, skipped:<reason>, failed:<reason>
  std::uint64_t ops = 0;
  std::uint64_t crit_path = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t block_misses = 0;
  std::uint64_t rounds = 0;
  std::uint64_t retries = 0;
  double bound = 0;
  double ratio = 0;

  bool ok() const { return status == "ok"; }
};

struct BoundFormula {
  std::string name;  // formula label, e.g. "(n/B)*log_M(n)"
  double value = 0;  // 0 when degenerate
};

// Closed-form miss bound used for the ratio column of an algorithm.
BoundFormula miss_bound(std::string_view algo, std::size_t n, std::size_t M, std::size_t B);

ScenarioRow run_scenario(const Scenario& s);

struct SweepConfig {
  std::vector<Scenario> scenarios;
};

// INI text: each section names an algorithm ("[sort]", or "[sort:tag]" for a
// second series) and each key holds a comma list. Values are integers, "2^k",
// or "2^a..2^b" for every power of two in between. The scenario list is the
// product of all lists. A seed override replaces every seed list.
SweepConfig parse_sweep(const std::string& text, std::optional<std::uint64_t> seed_override = {});
SweepConfig load_sweep(const std::string& path, std::optional<std::uint64_t> seed_override = {});

// PEMLAB_SEED, if set and numeric.
std::optional<std::uint64_t> seed_from_env();

// Rows come back sorted by (algo, M, B, p, n, seed), whatever `jobs` is.
std::vector<ScenarioRow> run_sweep(const SweepConfig& cfg, unsigned jobs = 1);

void write_csv(std::ostream& out, const std::vector<ScenarioRow>& rows);
std::vector<ScenarioRow> read_csv(std::istream& in);

enum class BandStatus { pass, fail, inconclusive };

struct SeriesBand {
  std::string key;  // "algo M=.. B=.. p=.."
  std::size_t rows = 0;
  double min_ratio = 0;
  double max_ratio = 0;
  BandStatus status = BandStatus::inconclusive;
};

struct BandReport {
  double band = 0;
  std::vector<SeriesBand> series;
  bool passed() const;
};

// Groups ok rows by (algo, M, B, p); a series passes when max/min ratio is at
// most `band`, and needs at least two rows to be conclusive.
BandReport check_bands(const std::vector<ScenarioRow>& rows, double band);
void print_report(std::ostream& out, const BandReport& report);

}  // namespace pemlab::bench
