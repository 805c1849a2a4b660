#include <doctest.h>

#include <sstream>

#include "pemlab/machine.hpp"

using namespace pemlab;

namespace {
Machine make(int p, std::size_t M, std::size_t B, std::uint64_t latency = 1) {
  MachineConfig cfg;
  cfg.p = p;
  cfg.M = M;
  cfg.B = B;
  cfg.miss_latency = latency;
  return Machine(cfg);
}
}  // namespace

TEST_CASE("config validation and parsing") {
  MachineConfig bad;
  bad.M = 10;
  bad.B = 4;
  CHECK_THROWS(bad.validate());
  bad.M = 8;
  bad.B = 16;
  CHECK_THROWS(bad.validate());
  bad = {};
  bad.p = 0;
  CHECK_THROWS(bad.validate());
  bad = {};
  bad.M = 64;
  bad.B = 16;
  bad.tall_cache = true;
  CHECK_THROWS(bad.validate());

  auto cfg = MachineConfig::parse("p=4\nM = 256 # cache\nB=16\nseed=9\nmiss_latency=3\n");
  CHECK(cfg.p == 4);
  CHECK(cfg.M == 256);
  CHECK(cfg.B == 16);
  CHECK(cfg.seed == 9);
  CHECK(cfg.miss_latency == 3);
  CHECK_THROWS(MachineConfig::parse("q=1"));
  CHECK_THROWS(MachineConfig::parse("p=x"));
}

TEST_CASE("one block fetch covers B words") {
  auto m = make(1, 64, 8);
  auto r = m.alloc(64);
  m.solo(0, [&](int c) {
    m.read(c, r[0]);
    for (int i = 1; i < 8; ++i) m.read(c, r[i]);
  });
  CHECK(m.ledger().total().cache_misses == 1);
}

TEST_CASE("LRU eviction forces a capacity miss") {
  auto m = make(1, 64, 8);  // 8 lines
  auto r = m.alloc(8 * 9);
  m.solo(0, [&](int c) {
    m.read(c, r[0]);
    for (int b = 1; b <= 8; ++b) m.read(c, r[b * 8]);
    m.read(c, r[0]);
  });
  CHECK(m.ledger().total().cache_misses == 10);
}

TEST_CASE("cold sequential scan costs ceil(n/B)") {
  auto m = make(1, 64, 8);
  auto r = m.alloc(64);
  m.solo(0, [&](int c) {
    for (std::size_t i = 0; i < r.len; ++i) m.read(c, r[i]);
  });
  CHECK(m.ledger().total().cache_misses == 8);

  auto big = make(1, 1024, 64);
  auto rr = big.alloc(10000);
  big.solo(0, [&](int c) {
    for (std::size_t i = 0; i < rr.len; ++i) big.read(c, rr[i]);
  });
  CHECK(big.ledger().total().cache_misses == 157);
}

TEST_CASE("same-round writers pay k(k-1)/2 block misses in core order") {
  auto m = make(4, 64, 8);
  auto r = m.alloc(8);
  m.round(m.all_cores(), [&](int c) { m.write(c, r[c], c + 1); });
  auto l = m.ledger();
  CHECK(l.total().block_misses == 6);
  CHECK(l.per_core[0].block_misses == 0);
  CHECK(l.per_core[1].block_misses == 1);
  CHECK(l.per_core[2].block_misses == 2);
  CHECK(l.per_core[3].block_misses == 3);
  CHECK(l.race_count == 0);
}

TEST_CASE("readers of a written block are each charged one block miss") {
  auto m = make(4, 64, 8);
  auto r = m.alloc(8);
  m.round(m.all_cores(), [&](int c) {
    if (c == 3) m.write(c, r[7], 1);
    else m.read(c, r[c]);
  });
  auto l = m.ledger();
  CHECK(l.total().block_misses == 3);
  CHECK(l.per_core[3].block_misses == 0);
}

TEST_CASE("exclusive rewrite is free and invalidates other copies") {
  auto m = make(2, 64, 8);
  auto r = m.alloc(8);
  m.solo(0, [&](int c) { m.write(c, r[0], 5); });
  m.solo(0, [&](int c) { m.write(c, r[1], 6); });
  CHECK(m.ledger().total().cache_misses == 1);
  CHECK(m.ledger().total().block_misses == 0);

  m.solo(1, [&](int c) { m.read(c, r[0]); });
  m.solo(0, [&](int c) { m.write(c, r[2], 7); });  // still resident for core 0
  m.solo(1, [&](int c) { m.read(c, r[0]); });      // copy invalidated
  CHECK(m.ledger().per_core[1].cache_misses == 2);
  CHECK(m.ledger().per_core[0].cache_misses == 1);
}

TEST_CASE("same-word writes are races unless the round allows them") {
  auto m = make(2, 64, 8);
  auto r = m.alloc(8);
  m.round(m.all_cores(), [&](int c) { m.write(c, r[0], c); });
  CHECK(m.ledger().race_count == 1);
  CHECK(!m.ledger().diagnostics.empty());
  m.reset_costs();
  m.round(m.all_cores(), [&](int c) { m.write(c, r[0], c + 10); }, RoundMode::concurrent_write);
  CHECK(m.ledger().race_count == 0);
  CHECK(m.snapshot(r)[0] == 11);
}

TEST_CASE("faults") {
  auto m = make(2, 64, 8);
  auto r = m.alloc(8);
  CHECK_THROWS_AS(m.read(0, r[0]), Fault);
  CHECK_THROWS_AS(m.solo(0, [&](int c) { m.read(c, r.end() + 100); }), Fault);
  CHECK_THROWS_AS(m.solo(0, [&](int) { m.read(1, r[0]); }), Fault);
  CHECK_THROWS_AS(m.round({0, 3}, [](int) {}), Fault);
  CHECK(!m.in_round());
}

TEST_CASE("run_rounds harness") {
  auto m = make(2, 64, 8);
  auto empty = m.run_rounds([](int, std::uint64_t) { return true; });
  CHECK(empty.total().ops == 0);
  CHECK(empty.total().misses() == 0);

  // p=1 touching n words: critical path = n + ceil(n/B) * latency.
  auto one = make(1, 64, 8, 5);
  auto r1 = one.alloc(20);
  auto l1 = one.run_rounds([&](int c, std::uint64_t i) {
    one.read(c, r1[i]);
    return i + 1 == r1.len;
  });
  CHECK(l1.crit_path_ops == 20);
  CHECK(l1.crit_path == 20 + 3 * 5);

  // Two cores scanning disjoint halves: each pays its own ceil(n/B).
  auto two = make(2, 64, 8);
  auto r2 = two.alloc(2 * 24);
  auto l2 = two.run_rounds([&](int c, std::uint64_t i) {
    two.read(c, r2[static_cast<std::size_t>(c) * 24 + i]);
    return i + 1 == 24;
  });
  CHECK(l2.per_core[0].cache_misses == 3);
  CHECK(l2.per_core[1].cache_misses == 3);
  CHECK(l2.rounds == 24);
}

TEST_CASE("snapshot is uncharged, zero initialised and idempotent") {
  auto m = make(1, 64, 8);
  auto r = m.alloc(16);
  CHECK(m.snapshot(r) == std::vector<Word>(16, 0));
  m.solo(0, [&](int c) { m.write(c, r[3], 7); });
  auto before = m.ledger().total();
  auto a = m.snapshot(r);
  auto b = m.snapshot(r);
  CHECK(a == b);
  CHECK(a[3] == 7);
  CHECK(m.ledger().total().ops == before.ops);
}

TEST_CASE("scratch release and reuse zeroes memory") {
  auto m = make(1, 64, 8);
  {
    Scratch s(m);
    auto r = m.alloc(8);
    m.solo(0, [&](int c) { m.write(c, r[0], 9); });
  }
  auto r = m.alloc(8);
  CHECK(m.snapshot(r)[0] == 0);
}

TEST_CASE("trace export") {
  auto m = make(2, 64, 8);
  std::ostringstream out;
  m.set_trace(&out);
  auto r = m.alloc(8);
  m.round(m.all_cores(), [&](int c) { m.write(c, r[c], 1); });
  const auto text = out.str();
  CHECK(text.rfind("round,core,op,addr,miss_kind\n", 0) == 0);
  CHECK(text.find("0,1,conflict,0,block") != std::string::npos);
}

TEST_CASE("ledger determinism and aggregate consistency") {
  auto run = [] {
    auto m = make(4, 128, 8);
    auto r = m.alloc(256);
    for (int k = 0; k < 5; ++k)
      m.round(m.all_cores(), [&](int c) {
        for (int i = 0; i < 40; ++i) m.write(c, r[(c * 37 + i * 11 + k) % 256], i);
      }, RoundMode::concurrent_write);
    return m.ledger();
  };
  auto a = run();
  auto b = run();
  CHECK(a.total().ops == b.total().ops);
  CHECK(a.total().cache_misses == b.total().cache_misses);
  CHECK(a.total().block_misses == b.total().block_misses);
  CHECK(a.crit_path == b.crit_path);
  std::uint64_t sum = 0;
  for (const auto& c : a.per_core) sum += c.cache_misses;
  CHECK(sum == a.total().cache_misses);
  CHECK(a.crit_path <= a.rounds * (40 + 40 * 2 + 3 * 40));
}
