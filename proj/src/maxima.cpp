#include <algorithm>

#include "hull_support.hpp"
#include "pemlab/hull.hpp"
#include "pemlab/merge.hpp"

namespace pemlab {

using namespace hull_detail;

namespace {

constexpr Word kNone = -1;

// Running state of the right-to-left sweep: the earliest point (largest x)
// attaining the largest y seen so far.
struct Sweep {
  std::span<const Point2> pts;
  Word best = kNone;

  bool keeps(std::size_t h) const {
    if (best == kNone) return true;
    const Point2& b = pts[static_cast<std::size_t>(best)];
    const Point2& p = pts[h];
    return b.y < p.y || (b.y == p.y && b.x == p.x);
  }
  void absorb(std::size_t h) {
    if (best == kNone || pts[h].y > pts[static_cast<std::size_t>(best)].y) best = static_cast<Word>(h);
  }
};

// Earlier (left) state wins ties so the carried point keeps the largest x.
Word later_best(std::span<const Point2> pts, Word left, Word right) {
  if (left == kNone) return right;
  if (right == kNone) return left;
  return pts[static_cast<std::size_t>(right)].y > pts[static_cast<std::size_t>(left)].y ? right : left;
}

auto sweep_order(std::span<const Point2> pts) {
  return [pts](Word a, Word b) {
    const Point2& p = pts[static_cast<std::size_t>(a)];
    const Point2& q = pts[static_cast<std::size_t>(b)];
    if (p.x != q.x) return p.x > q.x;
    if (p.y != q.y) return p.y > q.y;
    return a < b;
  };
}

}  // namespace

std::vector<std::size_t> maxima_seq(Machine& m, int core, std::span<const Point2> pts) {
  const std::size_t n = pts.size();
  if (n == 0) return {};
  Scratch scratch(m);
  auto handles = load_handles(m, n);
  auto sorted = m.alloc(n);
  auto out = m.alloc(n);
  const auto order = sweep_order(pts);
  seq_sort(m, core, handles, sorted, KeyOrder::of(order), true);

  std::size_t kept = 0;
  m.solo(core, [&](int c) {
    Sweep sweep{pts};
    for (std::size_t i = 0; i < n; ++i) {
      const auto h = static_cast<std::size_t>(m.read(c, sorted[i]));
      m.work(c, 2);
      if (sweep.keeps(h)) m.write(c, out[kept++], static_cast<Word>(h));
      sweep.absorb(h);
    }
  });
  return read_back(m, out.slice(0, kept));
}

std::vector<std::size_t> maxima_par(Machine& m, CoreRange cores, std::span<const Point2> pts,
                                    const SortPlan& plan) {
  const std::size_t n = pts.size();
  if (n == 0) return {};
  if (cores.count == 1) return maxima_seq(m, cores.first, pts);

  Scratch scratch(m);
  const std::size_t B = m.config().B;
  const auto p = static_cast<std::size_t>(cores.count);
  auto handles = load_handles(m, n);
  auto sorted = m.alloc(n);
  const auto order = sweep_order(pts);
  sort_handles(m, cores, handles, sorted, KeyOrder::of(order), plan);

  // Per-chunk carried state, then an inclusive scan over chunks.
  MemRegion cur = m.alloc(p * B), nxt = m.alloc(p * B);
  m.round(cores, [&](int c) {
    const auto k = static_cast<std::size_t>(c - cores.first);
    const Range r = block_chunk(sorted, p, k, B);
    Sweep sweep{pts};
    for (std::size_t i = r.begin; i < r.end; ++i) {
      sweep.absorb(static_cast<std::size_t>(m.read(c, sorted[i])));
      m.work(c);
    }
    m.write(c, cur[k * B], sweep.best);
  });
  for (std::size_t s = 1; s < p; s *= 2) {
    m.round(cores, [&](int c) {
      const auto k = static_cast<std::size_t>(c - cores.first);
      Word v = m.read(c, cur[k * B]);
      if (k >= s) {
        v = later_best(pts, m.read(c, cur[(k - s) * B]), v);
        m.work(c);
      }
      m.write(c, nxt[k * B], v);
    });
    std::swap(cur, nxt);
  }

  auto kept = m.alloc(n);
  std::vector<BucketedRun> runs(p);
  m.round(cores, [&](int c) {
    const auto k = static_cast<std::size_t>(c - cores.first);
    const Range r = block_chunk(sorted, p, k, B);
    Sweep sweep{pts};
    if (k > 0) sweep.best = m.read(c, cur[(k - 1) * B]);
    std::size_t count = 0;
    for (std::size_t i = r.begin; i < r.end; ++i) {
      const auto h = static_cast<std::size_t>(m.read(c, sorted[i]));
      m.work(c, 2);
      if (sweep.keeps(h)) m.write(c, kept[r.begin + count++], static_cast<Word>(h));
      sweep.absorb(h);
    }
    runs[k] = {kept.slice(r.begin, count), {0, count}};
  });
  std::size_t total = 0;
  std::vector<MemRegion> lists;
  for (const auto& r : runs) {
    lists.push_back(r.data);
    total += r.data.len;
  }
  auto out = m.alloc(total);
  concat_runs(m, cores, lists, out);
  return read_back(m, out);
}

UpperLower split_upper_lower(Machine& m, CoreRange cores, std::span<const Point2> pts) {
  const std::size_t n = pts.size();
  if (n == 0) throw GeometryError("split needs at least one point");
  Scratch scratch(m);
  const std::size_t B = m.config().B;
  const auto p = static_cast<std::size_t>(cores.count);
  auto handles = load_handles(m, n);

  auto lex_min = [&](Word a, Word b) {
    if (a == kNone || b == kNone) return a == kNone ? b : a;
    const Point2& u = pts[static_cast<std::size_t>(a)];
    const Point2& v = pts[static_cast<std::size_t>(b)];
    return (v < u || (v == u && b < a)) ? b : a;
  };
  auto lex_max = [&](Word a, Word b) {
    if (a == kNone || b == kNone) return a == kNone ? b : a;
    const Point2& u = pts[static_cast<std::size_t>(a)];
    const Point2& v = pts[static_cast<std::size_t>(b)];
    return (u < v || (v == u && b < a)) ? b : a;
  };

  const std::size_t workers = std::min(p, n);
  const CoreRange group{cores.first, static_cast<int>(workers)};
  auto mins = m.alloc(workers * B), maxs = m.alloc(workers * B);
  m.round(group, [&](int c) {
    const auto k = static_cast<std::size_t>(c - cores.first);
    const Range r = block_chunk(handles, workers, k, B);
    Word lo = kNone, hi = kNone;
    for (std::size_t i = r.begin; i < r.end; ++i) {
      const Word h = m.read(c, handles[i]);
      m.work(c, 2);
      lo = lex_min(lo, h);
      hi = lex_max(hi, h);
    }
    m.write(c, mins[k * B], lo);
    m.write(c, maxs[k * B], hi);
  });
  UpperLower result;
  result.left = static_cast<std::size_t>(tree_reduce(m, group, mins, workers, lex_min));
  result.right = static_cast<std::size_t>(tree_reduce(m, group, maxs, workers, lex_max));
  const Point2& L = pts[result.left];
  const Point2& R = pts[result.right];

  auto staged = m.alloc(n);
  std::vector<BucketedRun> runs(workers);
  m.round(group, [&](int c) {
    const auto k = static_cast<std::size_t>(c - cores.first);
    const Range r = block_chunk(handles, workers, k, B);
    std::vector<Word> up, down;
    for (std::size_t i = r.begin; i < r.end; ++i) {
      const Word h = m.read(c, handles[i]);
      m.work(c);
      (sgn(orient(L, R, pts[static_cast<std::size_t>(h)])) >= 0 ? up : down).push_back(h);
    }
    std::size_t at = r.begin;
    for (Word h : up) m.write(c, staged[at++], h);
    for (Word h : down) m.write(c, staged[at++], h);
    runs[k] = {staged.slice(r.begin, r.size()), {0, up.size(), r.size()}};
  });
  auto out = m.alloc(n);
  const BucketedRun merged = merge_bucketed_unchecked(m, cores, runs, 2, out);
  const auto all = read_back(m, merged.data);
  result.upper.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(merged.bounds[1]));
  result.lower.assign(all.begin() + static_cast<std::ptrdiff_t>(merged.bounds[1]), all.end());
  return result;
}

}  // namespace pemlab
