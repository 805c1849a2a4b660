#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "pemlab/partition.hpp"

using namespace pemlab;
using testutil::load;
using testutil::machine;
using testutil::random_words;

namespace {

SplitterSet splitters_of(Machine& m, std::vector<Word> keys) {
  SplitterSet s;
  s.region = load(m, keys);
  s.keys = std::move(keys);
  return s;
}

// Oracle: bucket of every key by binary search over the splitters.
std::vector<std::vector<Word>> oracle_buckets(const std::vector<Word>& a, const std::vector<Word>& s) {
  std::vector<std::vector<Word>> out(s.size() + 1);
  for (Word k : a) out[static_cast<std::size_t>(std::lower_bound(s.begin(), s.end(), k) - s.begin())].push_back(k);
  for (auto& b : out) std::sort(b.begin(), b.end());
  return out;
}

std::vector<std::vector<Word>> buckets_of(Machine& m, const BucketedRun& r) {
  const auto data = m.snapshot(r.data);
  std::vector<std::vector<Word>> out(r.buckets());
  for (std::size_t j = 0; j < r.buckets(); ++j) {
    out[j].assign(data.begin() + static_cast<std::ptrdiff_t>(r.bounds[j]),
                  data.begin() + static_cast<std::ptrdiff_t>(r.bounds[j + 1]));
    std::sort(out[j].begin(), out[j].end());
  }
  return out;
}

std::vector<Word> sorted_sample(std::size_t z, std::uint64_t seed, Word range) {
  auto s = random_words(z, seed, range);
  std::sort(s.begin(), s.end());
  return s;
}

using Partitioner = BucketedRun (*)(Machine&, CoreRange, MemRegion, const SplitterSet&, MemRegion, KeyOrder);

BucketedRun seq_adapter(Machine& m, CoreRange c, MemRegion a, const SplitterSet& s, MemRegion o, KeyOrder l) {
  return partition_seq(m, c.first, a, s, o, l);
}

}  // namespace

TEST_CASE("small partition examples for every variant") {
  for (Partitioner part : {Partitioner{seq_adapter}, Partitioner{partition_quadratic}, Partitioner{partition_sqrt}}) {
    auto m = machine(2, 64, 4);
    auto s = splitters_of(m, {4});
    auto r = part(m, m.all_cores(), load(m, {5, 1, 9, 3}), s, m.alloc(4), {});
    CHECK(buckets_of(m, r) == std::vector<std::vector<Word>>{{1, 3}, {5, 9}});

    auto beyond = splitters_of(m, {100, 200});
    auto r2 = part(m, m.all_cores(), load(m, {5, 1, 9}), beyond, m.alloc(3), {});
    CHECK(r2.bounds == std::vector<std::size_t>{0, 3, 3, 3});
  }
}

TEST_CASE("partition_seq both strategies agree with the oracle") {
  for (std::size_t M : {64, 4096}) {  // M=64 forces sort-and-scan, M=4096 direct bucketing
    auto m = machine(1, M, 4);
    auto a = random_words(512, 3, 1000);
    auto sk = sorted_sample(16, 4, 1000);
    auto s = splitters_of(m, sk);
    auto r = partition_seq(m, 0, load(m, a), s, m.alloc(512));
    CHECK(buckets_of(m, r) == oracle_buckets(a, sk));
  }
}

TEST_CASE("partition with duplicate splitters leaves empty interior buckets") {
  auto m = machine(1, 64, 4);
  auto s = splitters_of(m, {5, 5, 5});
  auto r = partition_seq(m, 0, load(m, {1, 5, 6, 9, 5}), s, m.alloc(5));
  CHECK(r.bounds == std::vector<std::size_t>{0, 3, 3, 3, 5});
}

TEST_CASE("partition_quadratic and partition_sqrt random oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = machine(4, 128, 8);
    auto a = random_words(300 + seed * 17, seed, 500);
    auto sk = sorted_sample(1 + seed % 12, seed + 100, 500);
    auto s = splitters_of(m, sk);
    auto in = load(m, a);
    CHECK(buckets_of(m, partition_quadratic(m, m.all_cores(), in, s, m.alloc(a.size()))) == oracle_buckets(a, sk));
    CHECK(buckets_of(m, partition_sqrt(m, m.all_cores(), in, s, m.alloc(a.size()))) == oracle_buckets(a, sk));
    CHECK(m.ledger().race_count == 0);
  }
}

TEST_CASE("partition_sqrt cost at n=2^12, y=32, p=4") {
  auto m = machine(4, 256, 16);
  const std::size_t n = 1 << 12, y = 32;
  auto a = random_words(n, 9, 1 << 20);
  auto sk = sorted_sample(y, 10, 1 << 20);
  auto s = splitters_of(m, sk);
  auto in = load(m, a);
  auto out = m.alloc(n);
  m.reset_costs();
  auto r = partition_sqrt(m, m.all_cores(), in, s, out);
  CHECK(buckets_of(m, r) == oracle_buckets(a, sk));
  const double bound = std::pow(static_cast<double>(n), 1.5) / 16.0 + static_cast<double>(y) * 64.0;
  CHECK(static_cast<double>(m.ledger().total().misses()) <= 4.0 * bound);
}

TEST_CASE("partition_main examples") {
  auto m = machine(1, 16, 2);
  std::vector<Word> keys(16);
  std::iota(keys.begin(), keys.end(), 1);
  auto s = splitters_of(m, {4, 8, 12, 16});
  auto r = partition_main(m, m.all_cores(), load(m, keys), s, m.alloc(16));
  CHECK(r.bounds == std::vector<std::size_t>{0, 4, 8, 12, 16, 16});

  auto m1 = machine(1, 16, 2);
  auto none = splitters_of(m1, {});
  auto v = random_words(16, 1, 10);
  auto r1 = partition_main(m1, m1.all_cores(), load(m1, v), none, m1.alloc(16));
  auto got = m1.snapshot(r1.data);
  CHECK(r1.bounds == std::vector<std::size_t>{0, 16});
  CHECK(std::is_permutation(got.begin(), got.end(), v.begin()));
}

TEST_CASE("partition_main preconditions are checked before work") {
  auto m = machine(4, 512, 8);
  auto s = splitters_of(m, sorted_sample(40, 1, 100));
  auto a = load(m, random_words(1024, 2, 100));
  m.reset_costs();
  CHECK_THROWS_AS(partition_main(m, m.all_cores(), a, s, m.alloc(1024)), PreconditionError);  // z > sqrt(n)
  auto s2 = splitters_of(m, {50});
  CHECK_THROWS_AS(partition_main(m, m.all_cores(), a, s2, m.alloc(1024)), PreconditionError);  // n < M*p
  CHECK(m.ledger().total().ops == 0);
  auto unsorted = splitters_of(m, {5, 3});
  auto big = machine(1, 16, 2);
  auto s3 = splitters_of(big, {5, 3});
  CHECK_THROWS_AS(partition_main(big, big.all_cores(), load(big, random_words(64, 1, 9)), s3, big.alloc(64)),
                  PreconditionError);
}

TEST_CASE("partition_main n=2^12, z=64, p=4 matches oracle within the miss bound") {
  auto m = machine(4, 1024, 4);
  const std::size_t n = 1 << 12;
  auto a = random_words(n, 21, 1 << 30);
  auto sk = sorted_sample(64, 22, 1 << 30);
  auto s = splitters_of(m, sk);
  auto in = load(m, a);
  auto out = m.alloc(n);
  m.reset_costs();
  auto r = partition_main(m, m.all_cores(), in, s, out);
  CHECK(buckets_of(m, r) == oracle_buckets(a, sk));
  const auto led = m.ledger();
  CHECK(led.race_count == 0);
  const double bound = (static_cast<double>(n) / 4.0) * std::log(static_cast<double>(n)) / std::log(1024.0);
  INFO("misses " << led.total().misses() << " bound " << bound);
  CHECK(static_cast<double>(led.total().misses()) <= 4.0 * bound);
}

TEST_CASE("partition_level property: residency and multiset over random shapes") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    CounterRng rng(seed);
    const int p = 1 + static_cast<int>(rng.below(8));
    auto m = machine(p, 256, 8);
    const std::size_t n = 64 + rng.below(6000);
    const auto z = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(std::sqrt(n)) + 1));
    auto a = random_words(n, seed + 50, 300);  // plenty of duplicates
    auto sk = sorted_sample(z, seed + 60, 300);
    auto s = splitters_of(m, sk);
    auto r = partition_level(m, m.all_cores(), load(m, a), s, m.alloc(n), PartitionTask{n, p, {}});
    CHECK(buckets_of(m, r) == oracle_buckets(a, sk));
    CHECK(m.ledger().race_count == 0);
  }
}

TEST_CASE("core allocation conserves cores and tracks shares") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CounterRng rng(seed);
    const int p = 1 + static_cast<int>(rng.below(64));
    std::vector<std::size_t> sizes(1 + rng.below(30));
    std::size_t total = 0;
    for (auto& s : sizes) total += (s = rng.below(1000));
    if (total == 0) continue;
    const auto shares = core_shares(p, sizes);
    CHECK(std::accumulate(shares.begin(), shares.end(), 0) == p);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const double exact = static_cast<double>(p) * static_cast<double>(sizes[i]) / static_cast<double>(total);
      CHECK(static_cast<double>(shares[i]) >= std::floor(exact) - 1);
      CHECK(static_cast<double>(shares[i]) <= std::ceil(exact) + 1);
    }
    const auto groups = allocate_cores({0, p}, sizes);
    for (const auto& g : groups) {
      CHECK(g.count >= 1);
      CHECK(g.first >= 0);
      CHECK(g.end() <= p);
    }
  }
}

TEST_CASE("multisearch") {
  auto m = machine(2, 64, 4);
  CHECK(multisearch(m, m.all_cores(), load(m, {1, 9, 5}), load(m, {4, 8}), m.alloc(3)) ==
        std::vector<std::size_t>{0, 2, 1});
  CHECK(multisearch(m, m.all_cores(), load(m, {1, 2, 3}), load(m, {4, 8}), m.alloc(3)) ==
        std::vector<std::size_t>{0, 0, 0});

  auto big = machine(4, 512, 16);
  auto q = random_words(4096, 5, 100000);
  auto sk = sorted_sample(64, 6, 100000);
  auto got = multisearch(big, big.all_cores(), load(big, q), load(big, sk), big.alloc(4096));
  std::vector<std::size_t> expect(q.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    expect[i] = static_cast<std::size_t>(std::lower_bound(sk.begin(), sk.end(), q[i]) - sk.begin());
  CHECK(got == expect);
}
