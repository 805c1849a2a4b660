#pragma once

// Shared plumbing for the hull sources: handle regions and handle sorting.

#include <bit>
#include <numeric>
#include <vector>

#include "pemlab/machine.hpp"
#include "pemlab/primitives.hpp"
#include "pemlab/sort.hpp"

namespace pemlab::hull_detail {

inline std::uint64_t ceil_log2(std::size_t v) { return v <= 1 ? 0 : std::bit_width(v - 1); }

// Cost of an in-register comparison sort of k records.
inline std::uint64_t sort_work(std::size_t k) { return k * std::max<std::uint64_t>(1, ceil_log2(k)); }

// Region holding the handles 0 .. n-1 (uncharged, like any input load).
inline MemRegion load_handles(Machine& m, std::size_t n) {
  auto r = m.alloc(n);
  std::vector<Word> ids(n);
  std::iota(ids.begin(), ids.end(), Word{0});
  m.poke(r, ids);
  return r;
}

inline MemRegion load_words(Machine& m, std::span<const std::size_t> values) {
  auto r = m.alloc(values.size());
  std::vector<Word> w(values.begin(), values.end());
  m.poke(r, w);
  return r;
}

inline std::vector<std::size_t> read_back(const Machine& m, MemRegion r) {
  std::vector<std::size_t> out;
  out.reserve(r.len);
  for (Word w : m.snapshot(r)) out.push_back(static_cast<std::size_t>(w));
  return out;
}

// Sorts handles under a strict weak order that never ties distinct handles.
inline void sort_handles(Machine& m, CoreRange cores, MemRegion in, MemRegion out, KeyOrder less,
                         const SortPlan& plan) {
  if (cores.count == 1 || in.len <= 1) {
    seq_sort(m, cores.first, in, out, less, true);
    return;
  }
  SortPlan local = plan;
  local.check_preconditions = false;
  sample_sort(m, cores, in, out, local, less);
}

}  // namespace pemlab::hull_detail
