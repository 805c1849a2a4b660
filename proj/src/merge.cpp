#include "pemlab/merge.hpp"

#include <algorithm>

#include "pemlab/primitives.hpp"

namespace pemlab {

void BucketedRun::validate(std::size_t t) const {
  if (bounds.size() != t + 1) throw Fault("bucket bounds count does not match t");
  if (bounds.front() != 0 || bounds.back() != data.len) throw Fault("bucket bounds do not span the data");
  if (!std::is_sorted(bounds.begin(), bounds.end())) throw Fault("bucket bounds not monotone");
}

BucketedRun merge_bucketed_unchecked(Machine& m, CoreRange cores, std::span<const BucketedRun> runs,
                                     std::size_t t, MemRegion out) {
  const std::size_t x = runs.size();
  if (t == 0) throw Fault("merge needs at least one bucket");
  std::size_t y = 0;
  for (const auto& r : runs) {
    r.validate(t);
    y += r.data.len;
  }
  if (out.len < y) throw Fault("merge output too small");

  BucketedRun result{out.slice(0, y), std::vector<std::size_t>(t + 1, 0)};
  for (std::size_t j = 0; j < t; ++j) {
    std::size_t total = 0;
    for (const auto& r : runs) total += r.bucket_size(j);
    result.bounds[j + 1] = result.bounds[j] + total;
  }
  if (y == 0 || x == 0) return result;

  Scratch scratch(m);
  const std::size_t B = m.config().B;
  const std::size_t cells = x * t;
  auto sizes = m.alloc(cells);
  auto by_bucket = m.alloc(cells);
  auto ends = m.alloc(cells);

  const auto wcells = std::min<std::size_t>(static_cast<std::size_t>(cores.count), cells);
  const CoreRange cell_group{cores.first, static_cast<int>(wcells)};
  m.round(cell_group, [&](int c) {
    const Range r = block_chunk(sizes, wcells, static_cast<std::size_t>(c - cores.first), B);
    for (std::size_t e = r.begin; e < r.end; ++e)
      m.write(c, sizes[e], static_cast<Word>(runs[e / t].bucket_size(e % t)));
  });
  transpose(m, cores, sizes, x, t, by_bucket);
  prefix_sum(m, cores, by_bucket, ends);

  // Output slice k starts at cut[k]; find the (bucket, run) cell holding it.
  const auto w = std::min<std::size_t>(static_cast<std::size_t>(cores.count), y);
  std::vector<std::size_t> cut(w);
  for (std::size_t k = 0; k < w; ++k) cut[k] = block_chunk(result.data, w, k, B).begin;
  auto located = m.alloc(w * B);
  m.round(cell_group, [&](int c) {
    const Range r = even_chunk(cells, wcells, static_cast<std::size_t>(c - cores.first));
    for (std::size_t e = r.begin; e < r.end; ++e) {
      const auto end = static_cast<std::size_t>(m.read(c, ends[e]));
      const auto size = static_cast<std::size_t>(m.read(c, by_bucket[e]));
      if (size == 0) continue;
      auto lo = std::lower_bound(cut.begin(), cut.end(), end - size);
      for (; lo != cut.end() && *lo < end; ++lo) {
        const auto k = static_cast<std::size_t>(lo - cut.begin());
        if (block_chunk(result.data, w, k, B).empty()) continue;
        m.write(c, located[k * B], static_cast<Word>(e));
      }
      m.work(c);
    }
  });

  const CoreRange copy_group{cores.first, static_cast<int>(w)};
  m.round(copy_group, [&](int c) {
    const auto k = static_cast<std::size_t>(c - cores.first);
    const Range slice = block_chunk(result.data, w, k, B);
    if (slice.empty()) return;
    auto e = static_cast<std::size_t>(m.read(c, located[k * B]));
    auto size = static_cast<std::size_t>(m.read(c, by_bucket[e]));
    std::size_t offset = slice.begin - (static_cast<std::size_t>(m.read(c, ends[e])) - size);
    for (std::size_t pos = slice.begin; pos < slice.end; ++pos, ++offset) {
      while (offset == size) {
        ++e;
        size = static_cast<std::size_t>(m.read(c, by_bucket[e]));
        offset = 0;
      }
      const BucketedRun& src = runs[e % x];
      m.write(c, result.data[pos], m.read(c, src.data[src.bounds[e / x] + offset]));
    }
  });
  return result;
}

BucketedRun merge_bucketed(Machine& m, CoreRange cores, std::span<const BucketedRun> runs, std::size_t t,
                           MemRegion out) {
  std::size_t y = 0;
  for (const auto& r : runs) y += r.data.len;
  if (y < runs.size() * t)
    throw PreconditionError("merge requires total size >= runs * buckets (" + std::to_string(y) + " < " +
                            std::to_string(runs.size() * t) + ")");
  return merge_bucketed_unchecked(m, cores, runs, t, out);
}

MemRegion concat_runs(Machine& m, CoreRange cores, std::span<const MemRegion> lists, MemRegion out) {
  std::vector<BucketedRun> runs;
  runs.reserve(lists.size());
  for (const auto& l : lists) runs.push_back({l, {0, l.len}});
  return merge_bucketed_unchecked(m, cores, runs, 1, out).data;
}

}  // namespace pemlab
