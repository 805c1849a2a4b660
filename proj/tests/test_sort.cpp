#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "pemlab/keys.hpp"
#include "pemlab/sort.hpp"

using namespace pemlab;
using testutil::load;
using testutil::machine;
using testutil::random_words;

TEST_CASE("key packing keeps (key, index) order") {
  CHECK(keys::pack(-3, 5) < keys::pack(-3, 6));
  CHECK(keys::pack(-3, keys::kMaxIndex) < keys::pack(-2, 0));
  CHECK(keys::key_of(keys::pack(-7, 99)) == -7);
  CHECK(keys::index_of(keys::pack(-7, 99)) == 99);
  CHECK(keys::pack(4, 1) <= keys::pack_upper(4));
  CHECK(keys::pack(5, 0) > keys::pack_upper(4));
  CHECK_THROWS_AS(keys::pack(keys::kMaxKey + 1, 0), std::out_of_range);
}

TEST_CASE("seq_sort examples and random inputs") {
  auto m = machine(1, 64, 4);
  auto out = m.alloc(3);
  seq_sort(m, 0, load(m, {2, 1, 3}), out);
  CHECK(m.snapshot(out) == std::vector<Word>{1, 2, 3});
  auto sorted_in = load(m, {1, 2, 3, 4});
  auto out2 = m.alloc(4);
  seq_sort(m, 0, sorted_in, out2);
  CHECK(m.snapshot(out2) == std::vector<Word>{1, 2, 3, 4});

  for (std::size_t n : {0, 1, 2, 15, 16, 17, 100, 1000, 5000}) {
    for (bool scratch : {false, true}) {
      auto mm = machine(1, 64, 4);
      auto v = random_words(n, n + 1, 50);
      auto in = load(mm, v);
      auto o = mm.alloc(n);
      seq_sort(mm, 0, in, o, {}, scratch);
      auto expect = v;
      std::sort(expect.begin(), expect.end());
      CHECK(mm.snapshot(o) == expect);
      if (!scratch) CHECK(mm.snapshot(in) == v);
    }
  }
}

TEST_CASE("seq_sort misses at n=2^12, M=2^10, B=32") {
  auto m = machine(1, 1024, 32);
  const std::size_t n = 1 << 12;
  auto in = load(m, random_words(n, 3, 1 << 30));
  auto out = m.alloc(n);
  m.reset_costs();
  seq_sort(m, 0, in, out, {}, true);
  const double bound = (static_cast<double>(n) / 32.0) * std::log(static_cast<double>(n)) / std::log(1024.0);
  INFO("misses " << m.ledger().total().misses());
  CHECK(static_cast<double>(m.ledger().total().misses()) <= 4.0 * bound);
}

TEST_CASE("sample_sort examples") {
  auto m = machine(1, 64, 4);
  SortPlan plan;
  auto empty_in = m.alloc(0);
  sample_sort(m, m.all_cores(), empty_in, m.alloc(0), plan);
  CHECK(sort_keys(m, m.all_cores(), {7, 7, 7, 7}, plan) == std::vector<Word>{7, 7, 7, 7});
  CHECK(sort_keys(m, m.all_cores(), {}, plan).empty());
}

TEST_CASE("sample_sort precondition") {
  auto m = machine(4, 1024, 16);
  SortPlan plan;
  CHECK_THROWS_AS(sort_keys(m, m.all_cores(), random_words(1000, 1, 10), plan), PreconditionError);
  plan.check_preconditions = false;
  CHECK_NOTHROW(sort_keys(m, m.all_cores(), random_words(1000, 1, 10), plan));
}

TEST_CASE("sample_sort matches std::stable_sort with duplicates") {
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    CounterRng rng(seed);
    const int p = 1 << rng.below(4);
    const std::size_t n = std::size_t{1} << (8 + rng.below(7));
    auto m = machine(p, 256, 16);
    SortPlan plan;
    plan.seed = seed;
    plan.check_preconditions = false;
    const Word range = seed % 3 == 0 ? 8 : 1 << 20;
    auto v = random_words(n, seed * 7 + 1, range);
    SortStats stats;
    auto got = sort_keys(m, m.all_cores(), v, plan, &stats);
    std::sort(v.begin(), v.end());
    CHECK(got == v);
    CHECK(m.ledger().race_count == 0);
    for (const auto& lvl : stats.levels) CHECK(static_cast<double>(lvl.max_bucket) <= lvl.threshold);
  }
}

TEST_CASE("sample_sort is deterministic for a fixed seed") {
  auto run = [] {
    auto m = machine(4, 512, 16);
    SortPlan plan;
    plan.seed = 42;
    sort_keys(m, m.all_cores(), random_words(1 << 13, 9, 1 << 20), plan);
    const auto l = m.ledger();
    return std::vector<std::uint64_t>{l.total().ops, l.total().misses(), l.crit_path, l.rounds};
  };
  CHECK(run() == run());
}
