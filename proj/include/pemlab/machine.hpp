#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pemlab {

using Word = std::int64_t;
using Addr = std::size_t;

// Raised for out-of-range addresses, bad core ids and misuse of the round API.
class Fault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised before any work when an operation's size precondition does not hold.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MachineConfig {
  int p = 1;
  std::size_t M = 1024;
  std::size_t B = 16;
  std::uint64_t miss_latency = 1;
  std::uint64_t seed = 1;
  bool tall_cache = false;

  static constexpr int kMaxCores = 64;

  void validate() const;
  std::size_t lines() const { return M / B; }

  // Flat "key=value" text, one pair per line, '#' starts a comment.
  static MachineConfig parse(std::string_view text);
};

struct MemRegion {
  Addr base = 0;
  std::size_t len = 0;

  Addr operator[](std::size_t i) const { return base + i; }
  Addr end() const { return base + len; }
  bool empty() const { return len == 0; }
  MemRegion slice(std::size_t offset, std::size_t count) const;
};

struct CoreRange {
  int first = 0;
  int count = 1;

  int end() const { return first + count; }
  bool contains(int core) const { return core >= first && core < end(); }
};

struct CoreCounters {
  std::uint64_t ops = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t block_misses = 0;

  std::uint64_t misses() const { return cache_misses + block_misses; }
  CoreCounters& operator+=(const CoreCounters& o);
};

struct CostLedger {
  std::vector<CoreCounters> per_core;
  std::uint64_t rounds = 0;
  // Largest per-core clock counting operations only.
  std::uint64_t crit_path_ops = 0;
  // Largest per-core clock counting operations plus miss_latency per miss.
  std::uint64_t crit_path = 0;
  std::uint64_t race_count = 0;
  std::vector<std::string> diagnostics;

  CoreCounters total() const;
};

enum class RoundMode {
  exclusive,         // same-word writes by two cores are a race
  concurrent_write,  // same-word writes allowed, highest core id wins
};

class Machine {
 public:
  explicit Machine(MachineConfig cfg);

  const MachineConfig& config() const { return cfg_; }
  int cores() const { return cfg_.p; }
  CoreRange all_cores() const { return {0, cfg_.p}; }

  // Block-aligned, zero-filled, uncharged.
  MemRegion alloc(std::size_t len);
  std::size_t mark() const { return top_; }
  void release(std::size_t mark);

  Word read(int core, Addr a);
  void write(int core, Addr a, Word v);
  void work(int core, std::uint64_t ops = 1);

  // Runs body(core) for every core of the group in ascending id order as one
  // lockstep round, then resolves conflicts and synchronizes the group clocks.
  template <class Body>
  void round(CoreRange group, Body&& body, RoundMode mode = RoundMode::exclusive) {
    begin_round(group, mode);
    try {
      for (int c = group.first; c < group.end(); ++c) body(c);
    } catch (...) {
      in_round_ = false;
      throw;
    }
    end_round();
  }

  template <class Body>
  void solo(int core, Body&& body) {
    round(CoreRange{core, 1}, [&](int c) { body(c); });
  }

  // Step-function harness: every core's step is called once per round until
  // all of them report completion. Returns the ledger accumulated so far.
  template <class Step>
  CostLedger run_rounds(Step&& step) {
    std::vector<char> done(static_cast<std::size_t>(cfg_.p), 0);
    std::size_t remaining = done.size();
    std::uint64_t index = 0;
    while (remaining > 0) {
      round(all_cores(), [&](int c) {
        if (!done[c] && step(c, index)) {
          done[c] = 1;
          --remaining;
        }
      });
      ++index;
    }
    return ledger();
  }

  // Uncharged access for loading inputs and inspecting results.
  std::vector<Word> snapshot(MemRegion r) const;
  void poke(MemRegion r, std::span<const Word> values);

  CostLedger ledger() const;
  void reset_costs();
  void add_diagnostic(std::string msg);

  // CSV rows "round,core,op,addr,miss_kind"; pass nullptr to disable.
  void set_trace(std::ostream* out);

  bool in_round() const { return in_round_; }
  std::uint64_t round_id() const { return round_id_; }

 private:
  struct Activity {
    std::size_t block;
    std::uint64_t readers;
    std::uint64_t writers;
  };
  struct LruCache {
    std::vector<std::int32_t> prev, next;
    std::vector<std::size_t> block;
    std::vector<std::int32_t> free;
    std::int32_t head = -1, tail = -1;
    std::int32_t used = 0;
  };

  void begin_round(CoreRange group, RoundMode mode);
  void end_round();
  void check(int core, Addr a) const;
  void touch(int core, std::size_t block, bool is_write, Addr a);
  void cache_access(int core, std::size_t block, Addr a, char op);
  void evict(int core, std::size_t block);
  void grow(std::size_t words);
  void charge_block_miss(int core, std::size_t block);
  void trace_row(int core, char op, Addr a, const char* kind);

  MachineConfig cfg_;
  std::vector<Word> mem_;
  std::size_t top_ = 0;

  std::vector<CoreCounters> counters_;
  std::vector<std::uint64_t> clock_ops_;
  std::vector<std::uint64_t> clock_;
  std::uint64_t rounds_ = 0;
  std::uint64_t race_count_ = 0;
  std::vector<std::string> diagnostics_;

  std::vector<LruCache> caches_;
  std::vector<std::int32_t> node_of_;  // [block * p + core] -> LRU node or -1
  std::vector<std::uint64_t> holders_;

  bool in_round_ = false;
  CoreRange group_{};
  RoundMode mode_ = RoundMode::exclusive;
  std::uint64_t round_id_ = 0;
  std::vector<std::uint64_t> act_round_;
  std::vector<std::uint32_t> act_index_;
  std::vector<Activity> acts_;
  std::vector<std::uint64_t> word_stamp_;

  std::ostream* trace_ = nullptr;
};

// Scoped scratch allocation: memory above the mark is returned on exit.
class Scratch {
 public:
  explicit Scratch(Machine& m) : m_(m), mark_(m.mark()) {}
  ~Scratch() { m_.release(mark_); }
  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;

 private:
  Machine& m_;
  std::size_t mark_;
};

}  // namespace pemlab
