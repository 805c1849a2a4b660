#include "pemlab/machine.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <ostream>
#include <sstream>

namespace pemlab {

namespace {

constexpr std::size_t kMaxDiagnostics = 64;
constexpr unsigned kStampShift = 7;  // low bits hold core + 1, p <= 64

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw std::invalid_argument("bad value for '" + std::string(key) + "': " + std::string(v));
  return out;
}

}  // namespace

void MachineConfig::validate() const {
  if (p < 1 || p > kMaxCores)
    throw std::invalid_argument("p must be in [1, " + std::to_string(kMaxCores) + "]");
  if (B < 1) throw std::invalid_argument("B must be >= 1");
  if (M < B) throw std::invalid_argument("M must be >= B");
  if (M % B != 0) throw std::invalid_argument("M must be a multiple of B");
  if (tall_cache && M < B * B) throw std::invalid_argument("tall cache requires M >= B^2");
}

MachineConfig MachineConfig::parse(std::string_view text) {
  MachineConfig cfg;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument("expected key=value: " + std::string(line));
    auto key = trim(line.substr(0, eq));
    auto val = trim(line.substr(eq + 1));
    if (key == "p") cfg.p = parse_number<int>(key, val);
    else if (key == "M") cfg.M = parse_number<std::size_t>(key, val);
    else if (key == "B") cfg.B = parse_number<std::size_t>(key, val);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, val);
    else if (key == "miss_latency") cfg.miss_latency = parse_number<std::uint64_t>(key, val);
    else if (key == "tall_cache") cfg.tall_cache = parse_number<int>(key, val) != 0;
    else throw std::invalid_argument("unknown key: " + std::string(key));
  }
  cfg.validate();
  return cfg;
}

MemRegion MemRegion::slice(std::size_t offset, std::size_t count) const {
  if (offset > len || count > len - offset) throw Fault("region slice out of range");
  return {base + offset, count};
}

CoreCounters& CoreCounters::operator+=(const CoreCounters& o) {
  ops += o.ops;
  cache_misses += o.cache_misses;
  block_misses += o.block_misses;
  return *this;
}

CoreCounters CostLedger::total() const {
  CoreCounters t;
  for (const auto& c : per_core) t += c;
  return t;
}

Machine::Machine(MachineConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto p = static_cast<std::size_t>(cfg_.p);
  counters_.assign(p, {});
  clock_ops_.assign(p, 0);
  clock_.assign(p, 0);
  caches_.resize(p);
  const auto lines = cfg_.lines();
  for (auto& c : caches_) {
    c.prev.assign(lines, -1);
    c.next.assign(lines, -1);
    c.block.assign(lines, 0);
  }
}

void Machine::grow(std::size_t words) {
  if (words <= mem_.size()) return;
  std::size_t cap = std::max<std::size_t>(words, mem_.size() + mem_.size() / 2);
  cap = (cap + cfg_.B - 1) / cfg_.B * cfg_.B;
  mem_.resize(cap, 0);
  word_stamp_.resize(cap, 0);
  const std::size_t blocks = cap / cfg_.B;
  act_round_.resize(blocks, 0);
  act_index_.resize(blocks, 0);
  holders_.resize(blocks, 0);
  node_of_.resize(blocks * static_cast<std::size_t>(cfg_.p), -1);
}

MemRegion Machine::alloc(std::size_t len) {
  const std::size_t base = (top_ + cfg_.B - 1) / cfg_.B * cfg_.B;
  grow(base + len);
  std::fill(mem_.begin() + static_cast<std::ptrdiff_t>(base),
            mem_.begin() + static_cast<std::ptrdiff_t>(base + len), 0);
  top_ = base + len;
  return {base, len};
}

void Machine::release(std::size_t mark) {
  if (mark > top_) throw Fault("release above allocation top");
  top_ = mark;
}

void Machine::check(int core, Addr a) const {
  if (!in_round_) throw Fault("memory access outside a round");
  if (!group_.contains(core)) throw Fault("core " + std::to_string(core) + " not in the active round");
  if (a >= top_) throw Fault("address " + std::to_string(a) + " out of bounds");
}

Word Machine::read(int core, Addr a) {
  check(core, a);
  const std::uint64_t stamp = word_stamp_[a];
  if ((stamp >> kStampShift) == round_id_ && (stamp & 127u) != static_cast<std::uint64_t>(core + 1)) {
    ++race_count_;
    add_diagnostic("race: core " + std::to_string(core) + " read word " + std::to_string(a) +
                   " written by core " + std::to_string((stamp & 127u) - 1) + " in round " +
                   std::to_string(rounds_));
  }
  touch(core, a / cfg_.B, false, a);
  return mem_[a];
}

void Machine::write(int core, Addr a, Word v) {
  check(core, a);
  const std::uint64_t stamp = word_stamp_[a];
  const std::uint64_t mine = (round_id_ << kStampShift) | static_cast<std::uint64_t>(core + 1);
  if ((stamp >> kStampShift) == round_id_ && stamp != mine && mode_ == RoundMode::exclusive) {
    ++race_count_;
    add_diagnostic("race: cores " + std::to_string((stamp & 127u) - 1) + " and " + std::to_string(core) +
                   " wrote word " + std::to_string(a) + " in round " + std::to_string(rounds_));
  }
  word_stamp_[a] = mine;
  touch(core, a / cfg_.B, true, a);
  mem_[a] = v;
}

void Machine::work(int core, std::uint64_t ops) {
  if (core < 0 || core >= cfg_.p) throw Fault("invalid core id");
  counters_[core].ops += ops;
  clock_ops_[core] += ops;
  clock_[core] += ops;
}

void Machine::touch(int core, std::size_t block, bool is_write, Addr a) {
  if (act_round_[block] != round_id_) {
    act_round_[block] = round_id_;
    act_index_[block] = static_cast<std::uint32_t>(acts_.size());
    acts_.push_back({block, 0, 0});
  }
  auto& act = acts_[act_index_[block]];
  const std::uint64_t bit = std::uint64_t{1} << core;
  if (is_write) act.writers |= bit;
  else act.readers |= bit;

  counters_[core].ops += 1;
  clock_ops_[core] += 1;
  clock_[core] += 1;
  cache_access(core, block, a, is_write ? 'W' : 'R');
}

void Machine::cache_access(int core, std::size_t block, Addr a, char op) {
  auto& cache = caches_[core];
  auto& slot = node_of_[block * static_cast<std::size_t>(cfg_.p) + static_cast<std::size_t>(core)];
  std::int32_t node = slot;
  if (node >= 0) {
    if (cache.head != node) {
      // unlink and move to front
      const auto pr = cache.prev[node], nx = cache.next[node];
      if (pr >= 0) cache.next[pr] = nx;
      if (nx >= 0) cache.prev[nx] = pr;
      if (cache.tail == node) cache.tail = pr;
      cache.prev[node] = -1;
      cache.next[node] = cache.head;
      cache.prev[cache.head] = node;
      cache.head = node;
    }
    if (trace_) trace_row(core, op, a, "none");
    return;
  }

  counters_[core].cache_misses += 1;
  clock_[core] += cfg_.miss_latency;
  if (trace_) trace_row(core, op, a, "cache");

  if (!cache.free.empty()) {
    node = cache.free.back();
    cache.free.pop_back();
  } else if (static_cast<std::size_t>(cache.used) < cache.block.size()) {
    node = cache.used++;
  } else {
    evict(core, cache.block[cache.tail]);
    node = cache.free.back();
    cache.free.pop_back();
  }
  cache.block[node] = block;
  cache.prev[node] = -1;
  cache.next[node] = cache.head;
  if (cache.head >= 0) cache.prev[cache.head] = node;
  cache.head = node;
  if (cache.tail < 0) cache.tail = node;
  slot = node;
  holders_[block] |= std::uint64_t{1} << core;
}

void Machine::evict(int core, std::size_t block) {
  auto& cache = caches_[core];
  auto& slot = node_of_[block * static_cast<std::size_t>(cfg_.p) + static_cast<std::size_t>(core)];
  const std::int32_t node = slot;
  if (node < 0) return;
  const auto pr = cache.prev[node], nx = cache.next[node];
  if (pr >= 0) cache.next[pr] = nx;
  else cache.head = nx;
  if (nx >= 0) cache.prev[nx] = pr;
  else cache.tail = pr;
  cache.free.push_back(node);
  slot = -1;
  holders_[block] &= ~(std::uint64_t{1} << core);
}

void Machine::begin_round(CoreRange group, RoundMode mode) {
  if (in_round_) throw Fault("nested round");
  if (group.first < 0 || group.count < 1 || group.end() > cfg_.p) throw Fault("invalid core group");
  in_round_ = true;
  group_ = group;
  mode_ = mode;
  ++round_id_;
  acts_.clear();
}

void Machine::charge_block_miss(int core, std::size_t block) {
  counters_[core].block_misses += 1;
  clock_[core] += cfg_.miss_latency;
  if (trace_) trace_row(core, 'C', block * cfg_.B, "block");
}

void Machine::end_round() {
  for (const auto& act : acts_) {
    if (act.writers == 0) continue;
    std::uint64_t extra = 0;
    int keeper = 0;
    for (std::uint64_t w = act.writers; w != 0; w &= w - 1) {
      const int c = std::countr_zero(w);
      for (std::uint64_t i = 0; i < extra; ++i) charge_block_miss(c, act.block);
      ++extra;
      keeper = c;
    }
    for (std::uint64_t r = act.readers & ~act.writers; r != 0; r &= r - 1)
      charge_block_miss(std::countr_zero(r), act.block);
    for (std::uint64_t h = holders_[act.block] & ~(std::uint64_t{1} << keeper); h != 0; h &= h - 1)
      evict(std::countr_zero(h), act.block);
  }
  acts_.clear();

  std::uint64_t top_ops = 0, top = 0;
  for (int c = group_.first; c < group_.end(); ++c) {
    top_ops = std::max(top_ops, clock_ops_[c]);
    top = std::max(top, clock_[c]);
  }
  for (int c = group_.first; c < group_.end(); ++c) {
    clock_ops_[c] = top_ops;
    clock_[c] = top;
  }
  ++rounds_;
  in_round_ = false;
}

std::vector<Word> Machine::snapshot(MemRegion r) const {
  if (r.end() > top_) throw Fault("snapshot out of bounds");
  return {mem_.begin() + static_cast<std::ptrdiff_t>(r.base), mem_.begin() + static_cast<std::ptrdiff_t>(r.end())};
}

void Machine::poke(MemRegion r, std::span<const Word> values) {
  if (r.end() > top_ || values.size() > r.len) throw Fault("poke out of bounds");
  std::copy(values.begin(), values.end(), mem_.begin() + static_cast<std::ptrdiff_t>(r.base));
}

CostLedger Machine::ledger() const {
  CostLedger l;
  l.per_core = counters_;
  l.rounds = rounds_;
  l.crit_path_ops = *std::max_element(clock_ops_.begin(), clock_ops_.end());
  l.crit_path = *std::max_element(clock_.begin(), clock_.end());
  l.race_count = race_count_;
  l.diagnostics = diagnostics_;
  return l;
}

void Machine::reset_costs() {
  if (in_round_) throw Fault("reset during a round");
  std::fill(counters_.begin(), counters_.end(), CoreCounters{});
  std::fill(clock_ops_.begin(), clock_ops_.end(), 0);
  std::fill(clock_.begin(), clock_.end(), 0);
  rounds_ = 0;
  race_count_ = 0;
  diagnostics_.clear();
}

void Machine::add_diagnostic(std::string msg) {
  if (diagnostics_.size() < kMaxDiagnostics) diagnostics_.push_back(std::move(msg));
}

void Machine::set_trace(std::ostream* out) {
  trace_ = out;
  if (trace_) *trace_ << "round,core,op,addr,miss_kind\n";
}

void Machine::trace_row(int core, char op, Addr a, const char* kind) {
  const char* name = op == 'R' ? "read" : op == 'W' ? "write" : "conflict";
  *trace_ << rounds_ << ',' << core << ',' << name << ',' << a << ',' << kind << '\n';
}

}  // namespace pemlab
