#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pemlab/machine.hpp"
#include "pemlab/primitives.hpp"

namespace pemlab {

struct SortPlan {
  int x = 32;           // sampling exponent: about n^(1/x) splitters per level
  int retry_cap = 20;   // resamples allowed per level before giving up
  std::uint64_t seed = 1;
  int buckets_per_core = 4;  // lower bound on buckets per level is this times the cores; 0 disables
  bool check_preconditions = true;
};

struct SortLevel {
  std::size_t n = 0;
  int cores = 0;
  std::size_t buckets = 0;
  std::size_t max_bucket = 0;
  double threshold = 0;
  int attempts = 0;
};

struct SortStats {
  std::uint64_t partition_rounds = 0;  // sampling + partition attempts
  std::uint64_t retries = 0;           // attempts rejected by the bucket-size gate
  std::vector<SortLevel> levels;       // accepted partitions
};

class SortFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Randomized distribution sort of `in` into `out` over the given cores.
void sample_sort(Machine& m, CoreRange cores, MemRegion in, MemRegion out, const SortPlan& plan,
                 KeyOrder less = {}, SortStats* stats = nullptr);

// Single-core sort of src into dst. When src_is_scratch is set the input may
// be overwritten, which saves one pass of misses.
void seq_sort(Machine& m, int core, MemRegion src, MemRegion dst, KeyOrder less = {},
              bool src_is_scratch = false);

// Sorts plain integer keys, ties broken by input position, returning the
// sorted keys. Keys are packed with their positions before sorting.
std::vector<Word> sort_keys(Machine& m, CoreRange cores, const std::vector<Word>& keys, const SortPlan& plan,
                            SortStats* stats = nullptr);

}  // namespace pemlab
