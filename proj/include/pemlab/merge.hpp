#pragma once

#include <span>
#include <vector>

#include "pemlab/machine.hpp"

namespace pemlab {

// A contiguous key sequence split into buckets; bucket j occupies
// data[bounds[j], bounds[j + 1]).
struct BucketedRun {
  MemRegion data;
  std::vector<std::size_t> bounds;

  std::size_t buckets() const { return bounds.empty() ? 0 : bounds.size() - 1; }
  std::size_t bucket_size(std::size_t j) const { return bounds[j + 1] - bounds[j]; }
  MemRegion bucket(std::size_t j) const { return data.slice(bounds[j], bucket_size(j)); }
  void validate(std::size_t t) const;
};

// Output bucket j is bucket j of runs[0], then of runs[1], and so on. Requires
// the total size to be at least runs.size() * t.
BucketedRun merge_bucketed(Machine& m, CoreRange cores, std::span<const BucketedRun> runs, std::size_t t,
                           MemRegion out);

// Same merge without the size precondition; used internally where the
// bucket matrix may be sparse.
BucketedRun merge_bucketed_unchecked(Machine& m, CoreRange cores, std::span<const BucketedRun> runs,
                                     std::size_t t, MemRegion out);

// List concatenation: the single-bucket case of merge_bucketed.
MemRegion concat_runs(Machine& m, CoreRange cores, std::span<const MemRegion> lists, MemRegion out);

}  // namespace pemlab
