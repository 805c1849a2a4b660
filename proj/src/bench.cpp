#include "pemlab/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pemlab/hull.hpp"
#include "pemlab/keys.hpp"
#include "pemlab/machine.hpp"
#include "pemlab/primitives.hpp"
#include "pemlab/procalloc.hpp"
#include "pemlab/sort.hpp"
#include "pemlab/workloads.hpp"

namespace pemlab::bench {

BoundFormula miss_bound(std::string_view algo, std::size_t n, std::size_t M, std::size_t B) {
  if (B == 0 || n == 0) return {"degenerate", 0};
  const double blocks = static_cast<double>(n) / static_cast<double>(B);
  if (algo == "prefix" || algo == "oprefix") return {"n/B", blocks};
  if (M <= 1 || n < 2) return {"degenerate", 0};
  const double log_m = std::log(static_cast<double>(n)) / std::log(static_cast<double>(M));
  return {"(n/B)*log_M(n)", blocks * log_m};
}

namespace {

void fill_costs(ScenarioRow& row, const CostLedger& ledger) {
  const CoreCounters t = ledger.total();
  row.ops = t.ops;
  row.crit_path = ledger.crit_path;
  row.cache_misses = t.cache_misses;
  row.block_misses = t.block_misses;
  row.rounds = ledger.rounds;
}

void run_sort(Machine& m, const Scenario& s, ScenarioRow& row) {
  const auto keys = workloads::random_keys(s.n, s.seed);
  std::vector<Word> packed(s.n);
  for (std::size_t i = 0; i < s.n; ++i) packed[i] = keys::pack(keys[i], i);
  const MemRegion in = m.alloc(s.n), out = m.alloc(s.n);
  m.poke(in, packed);
  m.reset_costs();
  SortPlan plan;
  plan.x = s.x;
  plan.retry_cap = s.retry_cap;
  plan.seed = s.seed;
  plan.check_preconditions = s.strict;
  SortStats stats;
  sample_sort(m, m.all_cores(), in, out, plan, {}, &stats);
  row.retries = stats.retries;
}

void run_hull(Machine& m, const Scenario& s, ScenarioRow& row) {
  const auto planes = workloads::tangent_planes(s.n, s.seed);
  m.reset_costs();
  HullConfig cfg;
  cfg.seed = s.seed;
  HullStats stats;
  hull_main(m, m.all_cores(), planes, Point2{0, 0}, cfg, &stats);
  row.retries = static_cast<std::uint64_t>(
      std::count_if(stats.polls.begin(), stats.polls.end(), [](const PollRecord& r) { return r.rule != "bound"; }));
}

void run_prefix(Machine& m, const Scenario& s, bool oblivious) {
  const auto values = workloads::random_keys(s.n, s.seed, 1000);
  const MemRegion in = m.alloc(s.n), out = m.alloc(s.n);
  m.poke(in, values);
  m.reset_costs();
  if (oblivious) {
    ProcallocConfig cfg;
    cfg.seed = s.seed;
    oblivious_prefix(m, in, out, cfg);
  } else {
    prefix_sum(m, m.all_cores(), in, out);
  }
}

std::string skip_reason(const Scenario& s) {
  if (s.algo == "sort" && s.strict && s.p > 1 && s.n < s.M * static_cast<std::size_t>(s.p)) return "skipped:n<M*p";
  if (s.algo == "oprefix" && static_cast<std::size_t>(s.p) > procalloc_slots(s.n)) return "skipped:p>n/lg(n)";
  if (s.algo == "hull" && s.n < 3) return "skipped:n<3";
  return {};
}

std::string sanitize(std::string text) {
  std::replace(text.begin(), text.end(), ',', ';');
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

}  // namespace

ScenarioRow run_scenario(const Scenario& s) {
  ScenarioRow row;
  row.algo = s.algo;
  row.n = s.n;
  row.p = s.p;
  row.M = s.M;
  row.B = s.B;
  row.seed = s.seed;
  const BoundFormula bound = miss_bound(s.algo, s.n, s.M, s.B);
  row.bound = bound.value;
  if (bound.value <= 0) {
    row.status = "skipped:degenerate-bound";
    return row;
  }
  if (auto reason = skip_reason(s); !reason.empty()) {
    row.status = reason;
    return row;
  }

  MachineConfig mc;
  mc.p = s.p;
  mc.M = s.M;
  mc.B = s.B;
  mc.seed = s.seed;
  try {
    Machine m(mc);
    if (s.algo == "sort")
      run_sort(m, s, row);
    else if (s.algo == "hull")
      run_hull(m, s, row);
    else if (s.algo == "prefix" || s.algo == "oprefix")
      run_prefix(m, s, s.algo == "oprefix");
    else
      throw std::invalid_argument("unknown algorithm '" + s.algo + "'");
    fill_costs(row, m.ledger());
  } catch (const PreconditionError& e) {
    row.status = "skipped:" + sanitize(e.what());
    return row;
  } catch (const std::exception& e) {
    row.status = "failed:" + sanitize(e.what());
    return row;
  }
  row.ratio = static_cast<double>(row.cache_misses) / row.bound;
  return row;
}

// ------------------------------------------------------------------ config

namespace {

std::uint64_t parse_number(const std::string& token) {
  const auto caret = token.find('^');
  std::size_t used = 0;
  if (caret == std::string::npos) {
    const auto v = std::stoull(token, &used);
    if (used != token.size()) throw std::invalid_argument("bad number '" + token + "'");
    return v;
  }
  const auto base = std::stoull(token.substr(0, caret));
  const auto exp = std::stoull(token.substr(caret + 1), &used);
  if (used != token.size() - caret - 1) throw std::invalid_argument("bad number '" + token + "'");
  std::uint64_t v = 1;
  for (std::uint64_t i = 0; i < exp; ++i) v *= base;
  return v;
}

std::vector<std::uint64_t> parse_list(const std::string& text) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<std::uint64_t> out;
  for (auto& part : parts) {
    boost::trim(part);
    if (part.empty()) continue;
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_number(part));
      continue;
    }
    const auto lo = parse_number(part.substr(0, dots));
    const auto hi = parse_number(part.substr(dots + 2));
    if (lo == 0 || (lo & (lo - 1)) != 0) throw std::invalid_argument("range must start at a power of two: " + part);
    for (std::uint64_t v = lo; v <= hi; v *= 2) out.push_back(v);
  }
  return out;
}

}  // namespace

SweepConfig parse_sweep(const std::string& text, std::optional<std::uint64_t> seed_override) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("sweep config: ") + e.what());
  }
  static const std::vector<std::string> kKeys{"n", "p", "M", "B", "seed", "x", "retry_cap"};
  SweepConfig cfg;
  for (const auto& [section, body] : tree) {
    const std::string algo = section.substr(0, section.find(':'));
    std::map<std::string, std::vector<std::uint64_t>> lists{
        {"n", {}}, {"p", {1}}, {"M", {1024}}, {"B", {16}}, {"seed", {1}}, {"x", {32}}, {"retry_cap", {20}}};
    for (const auto& [key, value] : body) {
      if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
        throw std::invalid_argument("sweep config: unknown key '" + key + "' in [" + section + "]");
      lists[key] = parse_list(value.get_value<std::string>());
    }
    if (seed_override) lists["seed"] = {*seed_override};
    for (auto n : lists["n"])
      for (auto p : lists["p"])
        for (auto M : lists["M"])
          for (auto B : lists["B"])
            for (auto seed : lists["seed"])
              for (auto x : lists["x"])
                for (auto cap : lists["retry_cap"])
                  cfg.scenarios.push_back({algo, n, static_cast<int>(p), M, B, seed, static_cast<int>(x),
                                           static_cast<int>(cap)});
  }
  return cfg;
}

SweepConfig load_sweep(const std::string& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open sweep config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_sweep(buf.str(), seed_override);
}

std::optional<std::uint64_t> seed_from_env() {
  const char* raw = std::getenv("PEMLAB_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(raw, &used);
    if (raw[used] != '\0') return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ------------------------------------------------------------------- sweep

std::vector<ScenarioRow> run_sweep(const SweepConfig& cfg, unsigned jobs) {
  std::vector<ScenarioRow> rows(cfg.scenarios.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) rows[i] = run_scenario(cfg.scenarios[i]);
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, rows.size()))));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::stable_sort(rows.begin(), rows.end(), [](const ScenarioRow& a, const ScenarioRow& b) {
    return std::tie(a.algo, a.M, a.B, a.p, a.n, a.seed) < std::tie(b.algo, b.M, b.B, b.p, b.n, b.seed);
  });
  return rows;
}

// --------------------------------------------------------------------- csv

void write_csv(std::ostream& out, const std::vector<ScenarioRow>& rows) {
  out << kCsvHeader << '\n';
  std::ostringstream line;
  line << std::setprecision(10);
  for (const auto& r : rows) {
    line.str({});
    line << r.algo << ',' << r.n << ',' << r.p << ',' << r.M << ',' << r.B << ',' << r.seed << ',' << r.status << ','
         << r.ops << ',' << r.crit_path << ',' << r.cache_misses << ',' << r.block_misses << ',' << r.rounds << ','
         << r.retries << ',' << r.bound << ',' << r.ratio << '\n';
    out << line.str();
  }
}

std::vector<ScenarioRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: empty input");
  boost::trim_right(line);
  if (line != kCsvHeader) throw std::invalid_argument("csv: unexpected header '" + line + "'");
  std::vector<ScenarioRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    boost::trim_right(line);
    if (line.empty()) continue;
    std::vector<std::string> f;
    boost::split(f, line, boost::is_any_of(","));
    if (f.size() != 15) throw std::invalid_argument("csv: line " + std::to_string(lineno) + " has wrong field count");
    ScenarioRow r;
    try {
      r.algo = f[0];
      r.n = std::stoull(f[1]);
      r.p = std::stoi(f[2]);
      r.M = std::stoull(f[3]);
      r.B = std::stoull(f[4]);
      r.seed = std::stoull(f[5]);
      r.status = f[6];
      r.ops = std::stoull(f[7]);
      r.crit_path = std::stoull(f[8]);
      r.cache_misses = std::stoull(f[9]);
      r.block_misses = std::stoull(f[10]);
      r.rounds = std::stoull(f[11]);
      r.retries = std::stoull(f[12]);
      r.bound = std::stod(f[13]);
      r.ratio = std::stod(f[14]);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("csv: malformed field on line " + std::to_string(lineno));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ------------------------------------------------------------------- bands

bool BandReport::passed() const {
  return !series.empty() &&
         std::all_of(series.begin(), series.end(), [](const SeriesBand& s) { return s.status == BandStatus::pass; });
}

BandReport check_bands(const std::vector<ScenarioRow>& rows, double band) {
  using Key = std::tuple<std::string, std::size_t, std::size_t, int>;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : rows)
    if (r.ok()) groups[{r.algo, r.M, r.B, r.p}].push_back(r.ratio);

  BandReport report;
  report.band = band;
  for (const auto& [key, ratios] : groups) {
    SeriesBand s;
    const auto& [algo, M, B, p] = key;
    s.key = algo + " M=" + std::to_string(M) + " B=" + std::to_string(B) + " p=" + std::to_string(p);
    s.rows = ratios.size();
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    s.min_ratio = *lo;
    s.max_ratio = *hi;
    if (s.rows < 2)
      s.status = BandStatus::inconclusive;
    else
      s.status = (s.min_ratio > 0 && s.max_ratio <= band * s.min_ratio) ? BandStatus::pass : BandStatus::fail;
    report.series.push_back(std::move(s));
  }
  return report;
}

void print_report(std::ostream& out, const BandReport& report) {
  for (const auto& s : report.series) {
    const char* label = s.status == BandStatus::pass ? "PASS" : s.status == BandStatus::fail ? "FAIL" : "INCONCLUSIVE";
    out << label << "  " << s.key << "  rows=" << s.rows << "  ratio=[" << s.min_ratio << ", " << s.max_ratio
        << "]  spread=" << (s.min_ratio > 0 ? s.max_ratio / s.min_ratio : 0.0) << "  band=" << report.band << '\n';
  }
  if (report.series.empty()) out << "INCONCLUSIVE  no ok rows\n";
}

}  // namespace pemlab::bench
