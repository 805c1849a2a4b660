#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pemlab/machine.hpp"
#include "pemlab/primitives.hpp"

namespace pemlab {

// Knobs for processor-oblivious id assignment. The cores never learn their
// count from the machine; everything below is derived from random writes.
struct ProcallocConfig {
  std::uint64_t seed = 1;
  // Multiplies the raw count-per-distance estimate; 1.0 was calibrated
  // against known core counts (see tests) and is kept frozen.
  double estimate_scale = 1.0;
  // An estimate farther than this factor from the final exact count is
  // reported as a diagnostic.
  double tolerance = 4.0;
};

struct IdAssignment {
  std::size_t n = 0;           // data size the ids are meant to cover
  std::size_t slots = 0;       // length of the random-write array, n / lg n
  std::size_t target = 0;      // how many writers the leftmost core counts, lg n
  std::size_t leftmost = 0;    // slot of the leftmost writer
  std::size_t beta = 0;        // slots scanned until the count reached target
  std::size_t counted = 0;     // writers seen in those slots
  bool exhausted = false;      // scan hit the end of the array, count is exact
  std::size_t estimated_p = 0;
  std::size_t block_slots = 0;  // slots per id block
  std::size_t blocks = 0;
  std::size_t total = 0;        // exact number of ids handed out
  double tolerance = 4.0;
  MemRegion counts;             // writers per slot, left in simulated memory

  // Per core, indexed by the simulator's core number only for reporting.
  std::vector<std::size_t> slot;
  std::vector<std::size_t> slot_rank;   // order of arrival within a slot
  std::vector<std::size_t> block;       // high part of the id
  std::vector<std::size_t> block_rank;  // low part of the id
  std::vector<std::size_t> id;

  std::uint64_t write_block_misses = 0;  // charged by the first random write
  std::uint64_t collision_rounds = 0;

  // Data range owned by an id: consecutive, disjoint, covering [0, n).
  Range owned(std::size_t ident) const { return even_chunk(n, total, ident); }
};

// Largest core count the estimator accepts for data size n (n / lg n).
std::size_t procalloc_slots(std::size_t n);

// Every core of the machine takes part anonymously. Throws PreconditionError
// when there are more cores than slots. The per-slot counts stay allocated
// for assign_ids; callers wanting them freed wrap both calls in a Scratch.
IdAssignment estimate_processors(Machine& m, std::size_t n, const ProcallocConfig& cfg = {});

// Turns the estimate into dense unique ids 0..total-1.
void assign_ids(Machine& m, IdAssignment& ids);

struct ObliviousPrefixResult {
  IdAssignment ids;
  bool fell_back = false;
  std::uint64_t first_phase_crit_path = 0;  // estimate, ids and local sums
};

// Inclusive prefix sums of `in` into `out` without using the core count.
// When estimation cannot run, one core computes the sums and a diagnostic is
// logged.
ObliviousPrefixResult oblivious_prefix(Machine& m, MemRegion in, MemRegion out, const ProcallocConfig& cfg = {});

}  // namespace pemlab
