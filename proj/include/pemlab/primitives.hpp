#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pemlab/machine.hpp"
#include "pemlab/rng.hpp"

namespace pemlab {

// Half-open index interval.
struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
};

// Equal split of [0, n) into parts, remainder to the last part.
Range even_chunk(std::size_t n, std::size_t parts, std::size_t k);

// Like even_chunk but every interior boundary is moved up to the next
// absolute block boundary of the region, so writers never share a block.
Range block_chunk(MemRegion r, std::size_t parts, std::size_t k, std::size_t B);

// Strict weak order on words. The default is numeric '<'; callers sorting
// derived quantities plug in a comparator through a context pointer.
struct KeyOrder {
  using Fn = bool (*)(const void*, Word, Word);
  Fn fn = nullptr;
  const void* ctx = nullptr;

  bool operator()(Word a, Word b) const { return fn ? fn(ctx, a, b) : a < b; }

  template <class F>
  static KeyOrder of(const F& f) {
    return {[](const void* c, Word a, Word b) { return (*static_cast<const F*>(c))(a, b); }, &f};
  }
};

struct SplitterSet {
  MemRegion region;        // sorted splitter keys in simulated memory
  std::vector<Word> keys;  // host copy of the same keys
  int x = 32;
  double t = 0;            // oversampling ratio sqrt(n) / n^(1/x)
  std::size_t size() const { return keys.size(); }
};

Word par_max(Machine& m, CoreRange cores, MemRegion a);
Word par_sum(Machine& m, CoreRange cores, MemRegion a);

// Inclusive prefix sums of `in` written to `out` (same length).
void prefix_sum(Machine& m, CoreRange cores, MemRegion in, MemRegion out);

// Row-major rows x cols matrix `in` to its cols x rows transpose in `out`.
void transpose(Machine& m, CoreRange cores, MemRegion in, std::size_t rows, std::size_t cols,
               MemRegion out);

// Number of keys strictly smaller than q.
std::size_t rank(Machine& m, CoreRange cores, Word q, MemRegion a, KeyOrder less = {});

// Concatenation of parts into dest; each core writes one contiguous slice.
void compact(Machine& m, CoreRange cores, std::span<const MemRegion> parts, MemRegion dest);

// All-pairs ranking sort; equal keys keep input order.
void brute_sort(Machine& m, CoreRange cores, MemRegion in, MemRegion out, KeyOrder less = {});

// ceil(n^(1/x)) sorted splitters drawn through a sqrt(n) random pre-sample.
// A nonzero `count` overrides the number of splitters (capped by the
// pre-sample size).
SplitterSet sample_splitters(Machine& m, CoreRange cores, MemRegion a, int x, std::uint64_t seed,
                             KeyOrder less = {}, std::size_t count = 0);

std::size_t splitter_count(std::size_t n, int x);
std::size_t presample_count(std::size_t n);
double quality_threshold(std::size_t n, int x);

// k uniform draws with replacement from a, in the order of their positions.
void sample_k_of_n_seq(Machine& m, int core, MemRegion a, std::size_t k, CounterRng& rng,
                       MemRegion out);

// Combines `count` partial values stored one per block (stride B) with a
// binary tree over the given cores; returns the combined value.
template <class Op>
Word tree_reduce(Machine& m, CoreRange cores, MemRegion partials, std::size_t count, Op op) {
  const std::size_t stride = m.config().B;
  for (std::size_t s = 1; s < count; s *= 2) {
    const auto active = static_cast<int>((count + 2 * s - 1) / (2 * s));
    const CoreRange group{cores.first, std::min(active, cores.count)};
    m.round(group, [&](int c) {
      for (std::size_t k = static_cast<std::size_t>(c - cores.first) * 2 * s; k < count;
           k += static_cast<std::size_t>(group.count) * 2 * s) {
        if (k + s >= count) continue;
        const Word lhs = m.read(c, partials[k * stride]);
        const Word rhs = m.read(c, partials[(k + s) * stride]);
        m.work(c);
        m.write(c, partials[k * stride], op(lhs, rhs));
      }
    });
  }
  Word out = 0;
  m.solo(cores.first, [&](int c) { out = m.read(c, partials[0]); });
  return out;
}

}  // namespace pemlab
