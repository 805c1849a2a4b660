#include "pemlab/procalloc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "pemlab/rng.hpp"

namespace pemlab {

namespace {

std::size_t floor_log2(std::size_t n) { return n <= 1 ? 0 : static_cast<std::size_t>(std::bit_width(n) - 1); }

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

constexpr std::size_t kNoSlot = static_cast<std::size_t>(-1);

}  // namespace

std::size_t procalloc_slots(std::size_t n) {
  const std::size_t lg = std::max<std::size_t>(1, floor_log2(n));
  return n / lg;
}

IdAssignment estimate_processors(Machine& m, std::size_t n, const ProcallocConfig& cfg) {
  const int p = m.cores();
  const CoreRange all = m.all_cores();
  IdAssignment ids;
  ids.n = n;
  ids.slots = procalloc_slots(n);
  ids.target = std::max<std::size_t>(1, floor_log2(n));
  if (ids.slots == 0 || static_cast<std::size_t>(p) > ids.slots) {
    std::ostringstream msg;
    msg << "procalloc needs at most n / lg n = " << ids.slots << " cores for n = " << n;
    throw PreconditionError(msg.str());
  }
  const auto cores = static_cast<std::size_t>(p);
  ids.slot.assign(cores, 0);
  ids.slot_rank.assign(cores, 0);
  ids.block.assign(cores, 0);
  ids.block_rank.assign(cores, 0);
  ids.id.assign(cores, 0);

  // tag[s]: last writer's tag; count[s]: writers accounted for at s.
  ids.tolerance = cfg.tolerance;
  const MemRegion tag = m.alloc(ids.slots);
  const MemRegion count = m.alloc(ids.slots);
  ids.counts = count;
  const MemRegion estimate = m.alloc(1);

  for (std::size_t c = 0; c < cores; ++c) {
    CounterRng rng(cfg.seed, 0x9a11ull + c);
    ids.slot[c] = static_cast<std::size_t>(rng.below(ids.slots));
  }

  // Writers sharing a slot are counted one per pair of rounds: all pending
  // writers store their tag, then the one whose tag stuck bumps the counter.
  std::vector<char> pending(cores, 1);
  std::size_t left = cores;
  bool first = true;
  while (left > 0) {
    const auto before = m.ledger().total().block_misses;
    m.round(all, [&](int c) {
      if (!pending[c]) return;
      m.work(c);
      m.write(c, tag[ids.slot[c]], static_cast<Word>(c) + 1);
    }, RoundMode::concurrent_write);
    if (first) ids.write_block_misses = m.ledger().total().block_misses - before;
    first = false;
    m.round(all, [&](int c) {
      if (!pending[c]) return;
      const std::size_t s = ids.slot[c];
      m.work(c);
      if (m.read(c, tag[s]) != static_cast<Word>(c) + 1) return;
      const Word seen = m.read(c, count[s]);
      m.write(c, count[s], seen + 1);
      ids.slot_rank[c] = static_cast<std::size_t>(seen);
      pending[c] = 0;
      --left;
    });
    ++ids.collision_rounds;
  }

  // Leftward walk in lockstep: a walker stops at the first occupied slot, so
  // only the leftmost writer reaches slot 0.
  std::vector<std::size_t> pos(cores, kNoSlot);
  for (std::size_t c = 0; c < cores; ++c)
    if (ids.slot_rank[c] == 0) pos[c] = ids.slot[c];
  int leader = -1;
  for (bool moving = true; moving;) {
    moving = false;
    m.round(all, [&](int c) {
      std::size_t& at = pos[c];
      if (at == kNoSlot) return;
      m.work(c);
      if (at == 0) {
        leader = c;
        at = kNoSlot;
        return;
      }
      if (m.read(c, count[at - 1]) != 0) {
        at = kNoSlot;
        return;
      }
      --at;
      moving = true;
    });
  }
  ids.leftmost = ids.slot[static_cast<std::size_t>(leader)];

  // The leftmost writer scans right until it has seen `target` writers.
  m.solo(leader, [&](int c) {
    std::size_t seen = 0, s = ids.leftmost;
    for (; s < ids.slots && seen < ids.target; ++s) {
      m.work(c);
      seen += static_cast<std::size_t>(m.read(c, count[s]));
    }
    ids.beta = s;
    ids.counted = seen;
    ids.exhausted = seen < ids.target || (s == ids.slots && seen == ids.target);
    double guess = static_cast<double>(seen);
    if (!ids.exhausted)
      guess = cfg.estimate_scale * static_cast<double>(seen) * static_cast<double>(ids.slots) /
              static_cast<double>(s);
    m.write(c, estimate[0], std::max<Word>(1, std::llround(guess)));
  });
  m.round(all, [&](int c) {
    m.work(c);
    ids.estimated_p = static_cast<std::size_t>(m.read(c, estimate[0]));
  });
  return ids;
}

void assign_ids(Machine& m, IdAssignment& ids) {
  const CoreRange all = m.all_cores();
  const auto cores = static_cast<std::size_t>(m.cores());
  Scratch scratch(m);
  // Blocks are sized to hold about `target` writers under the estimate.
  ids.block_slots = std::clamp<std::size_t>(ceil_div(ids.slots * ids.target, ids.estimated_p), 1, ids.slots);
  ids.blocks = ceil_div(ids.slots, ids.block_slots);

  const MemRegion count = ids.counts;

  // Leaders: the leftmost occupied slot of every block, found by walking left
  // inside the block.
  std::vector<std::size_t> pos(cores, kNoSlot);
  std::vector<char> leads(cores, 0);
  for (std::size_t c = 0; c < cores; ++c) {
    ids.block[c] = ids.slot[c] / ids.block_slots;
    if (ids.slot_rank[c] == 0) pos[c] = ids.slot[c];
  }
  for (bool moving = true; moving;) {
    moving = false;
    m.round(all, [&](int c) {
      std::size_t& at = pos[c];
      if (at == kNoSlot) return;
      m.work(c);
      if (at % ids.block_slots == 0) {
        leads[c] = 1;
        at = kNoSlot;
        return;
      }
      if (m.read(c, count[at - 1]) != 0) {
        at = kNoSlot;
        return;
      }
      --at;
      moving = true;
    });
  }

  // Each leader records, per slot of its block, how many writers precede it.
  const MemRegion before = m.alloc(ids.slots);
  const MemRegion totals = m.alloc(ids.blocks);
  const MemRegion offsets = m.alloc(ids.blocks);
  m.round(all, [&](int c) {
    if (!leads[c]) return;
    const std::size_t b = ids.block[c];
    const std::size_t end = std::min(ids.slots, (b + 1) * ids.block_slots);
    Word running = 0;
    for (std::size_t s = b * ids.block_slots; s < end; ++s) {
      m.work(c);
      m.write(c, before[s], running);
      running += m.read(c, count[s]);
    }
    m.write(c, totals[b], running);
  });
  prefix_sum(m, all, totals, offsets);

  m.round(all, [&](int c) {
    const std::size_t b = ids.block[c];
    const Word inclusive = m.read(c, offsets[b]);
    const Word own = m.read(c, totals[b]);
    ids.block_rank[c] = static_cast<std::size_t>(m.read(c, before[ids.slot[c]])) + ids.slot_rank[c];
    ids.id[c] = static_cast<std::size_t>(inclusive - own) + ids.block_rank[c];
    ids.total = static_cast<std::size_t>(m.read(c, offsets[ids.blocks - 1]));
    m.work(c, 2);
  });

  const double ratio = static_cast<double>(ids.estimated_p) / static_cast<double>(ids.total);
  if (ratio > ids.tolerance || ratio * ids.tolerance < 1.0) {
    std::ostringstream msg;
    msg << "procalloc: estimate " << ids.estimated_p << " vs " << ids.total << " ids";
    m.add_diagnostic(msg.str());
  }
}

ObliviousPrefixResult oblivious_prefix(Machine& m, MemRegion in, MemRegion out, const ProcallocConfig& cfg) {
  if (in.len != out.len) throw PreconditionError("oblivious_prefix: input and output lengths differ");
  const std::size_t n = in.len;
  ObliviousPrefixResult result;
  const auto start = m.ledger().crit_path;

  if (n == 0) return result;
  const std::size_t slots = procalloc_slots(n);
  if (slots == 0 || static_cast<std::size_t>(m.cores()) > slots) {
    result.fell_back = true;
    m.add_diagnostic("oblivious_prefix: estimation impossible for n = " + std::to_string(n) +
                     ", single-core fallback");
    m.solo(0, [&](int c) {
      Word running = 0;
      for (std::size_t i = 0; i < n; ++i) {
        running += m.read(c, in[i]);
        m.work(c);
        m.write(c, out[i], running);
      }
    });
    result.first_phase_crit_path = m.ledger().crit_path - start;
    return result;
  }

  Scratch scratch(m);
  IdAssignment ids = estimate_processors(m, n, cfg);
  assign_ids(m, ids);

  const CoreRange all = m.all_cores();
  const MemRegion partial = m.alloc(ids.total);
  const MemRegion partial_prefix = m.alloc(ids.total);
  m.round(all, [&](int c) {
    const Range r = ids.owned(ids.id[c]);
    Word sum = 0;
    for (std::size_t i = r.begin; i < r.end; ++i) {
      sum += m.read(c, in[i]);
      m.work(c);
    }
    m.write(c, partial[ids.id[c]], sum);
  });
  result.first_phase_crit_path = m.ledger().crit_path - start;

  prefix_sum(m, all, partial, partial_prefix);
  m.round(all, [&](int c) {
    const std::size_t me = ids.id[c];
    const Range r = ids.owned(me);
    Word running = me == 0 ? 0 : m.read(c, partial_prefix[me - 1]);
    for (std::size_t i = r.begin; i < r.end; ++i) {
      running += m.read(c, in[i]);
      m.work(c);
      m.write(c, out[i], running);
    }
  });
  result.ids = std::move(ids);
  return result;
}

}  // namespace pemlab
