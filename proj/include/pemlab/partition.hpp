#pragma once

#include <span>
#include <vector>

#include "pemlab/machine.hpp"
#include "pemlab/merge.hpp"
#include "pemlab/primitives.hpp"

namespace pemlab {

// Root problem shape, fixed for the whole recursion so every subproblem
// sees the same keys-per-core ratio.
struct PartitionTask {
  std::size_t root_n = 0;
  int root_cores = 1;
  KeyOrder less{};

  std::size_t keys_per_core() const { return root_n / static_cast<std::size_t>(root_cores); }
};

// Bucket i of the result holds the keys k with splitter[i-1] < k <= splitter[i];
// there are splitters.size() + 1 buckets.

BucketedRun partition_seq(Machine& m, int core, MemRegion a, const SplitterSet& splitters, MemRegion out,
                          KeyOrder less = {});

BucketedRun partition_quadratic(Machine& m, CoreRange cores, MemRegion a, const SplitterSet& splitters,
                                MemRegion out, KeyOrder less = {});

BucketedRun partition_sqrt(Machine& m, CoreRange cores, MemRegion a, const SplitterSet& splitters,
                           MemRegion out, KeyOrder less = {});

// Checks the size preconditions and throws PreconditionError before any work.
BucketedRun partition_main(Machine& m, CoreRange cores, MemRegion a, const SplitterSet& splitters,
                           MemRegion out, KeyOrder less = {});

// Recursive entry without the root checks; per-level violations of the
// splitter bound are recorded as ledger diagnostics.
BucketedRun partition_level(Machine& m, CoreRange cores, MemRegion a, const SplitterSet& splitters,
                            MemRegion out, const PartitionTask& task);

// For every query, the index of its bucket among the sorted keys, in query
// order. Results are written to `out` and returned.
std::vector<std::size_t> multisearch(Machine& m, CoreRange cores, MemRegion queries, MemRegion sorted,
                                     MemRegion out);

// Splits `cores` among parts proportionally to sizes by rounding scaled
// prefix positions, so counts stay within one of p * size / total and sum to
// p. Parts whose share rounds to zero share the least loaded core.
std::vector<CoreRange> allocate_cores(CoreRange cores, std::span<const std::size_t> sizes);

// Core count per part under allocate_cores (zero for parts sharing a core).
std::vector<int> core_shares(int p, std::span<const std::size_t> sizes);

// Contiguous splitter subset, both in memory and on the host.
SplitterSet splitter_slice(const SplitterSet& s, std::size_t begin, std::size_t count);

}  // namespace pemlab
