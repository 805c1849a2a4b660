// Single-core sort used as the base case of the distribution sort and by
// the sequential partitioner. Runs of a quarter cache are sorted by an
// in-cache binary merge sort, then merged k at a time with k chosen so one
// block per input run plus the output block stays resident.

#include <algorithm>
#include <bit>
#include <queue>

#include "pemlab/sort.hpp"

namespace pemlab {
namespace {

std::uint64_t ceil_log2(std::size_t v) { return v <= 1 ? 0 : std::bit_width(v - 1); }

class SeqSorter {
 public:
  SeqSorter(Machine& m, int core, KeyOrder less) : m_(m), core_(core), less_(less) {}

  // Merges adjacent sorted runs of `width` from `from` into `to`.
  void binary_pass(MemRegion from, MemRegion to, std::size_t width) {
    const std::size_t n = from.len;
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(n, lo + width), hi = std::min(n, lo + 2 * width);
      std::size_t i = lo, j = mid, out = lo;
      Word a = i < mid ? m_.read(core_, from[i]) : 0;
      Word b = j < hi ? m_.read(core_, from[j]) : 0;
      while (i < mid && j < hi) {
        m_.work(core_);
        if (less_(b, a)) {
          m_.write(core_, to[out++], b);
          if (++j < hi) b = m_.read(core_, from[j]);
        } else {
          m_.write(core_, to[out++], a);
          if (++i < mid) a = m_.read(core_, from[i]);
        }
      }
      for (; i < mid; ++i) {
        m_.write(core_, to[out++], a);
        if (i + 1 < mid) a = m_.read(core_, from[i + 1]);
      }
      for (; j < hi; ++j) {
        m_.write(core_, to[out++], b);
        if (j + 1 < hi) b = m_.read(core_, from[j + 1]);
      }
    }
  }

  // Sorts a run that fits in cache into `to`, ping-ponging with `aux`. When
  // from == to the run is sorted in place.
  void sort_run(MemRegion from, MemRegion to, MemRegion aux) {
    const std::size_t n = from.len;
    if (n == 0) return;
    std::uint64_t levels = ceil_log2(n);
    std::size_t width = 1;
    MemRegion src = from, a = to, b = aux.slice(0, n);
    if (from.base == to.base) {
      if (levels % 2 == 1) {
        for (std::size_t i = 0; i + 1 < n; i += 2) {
          const Word x = m_.read(core_, to[i]), y = m_.read(core_, to[i + 1]);
          m_.work(core_);
          if (less_(y, x)) {
            m_.write(core_, to[i], y);
            m_.write(core_, to[i + 1], x);
          }
        }
        width = 2;
        --levels;
      }
      std::swap(a, b);  // first level writes into aux
    } else if (levels == 0) {
      m_.write(core_, to[0], m_.read(core_, from[0]));
      return;
    } else if (levels % 2 == 0) {
      std::swap(a, b);
    }
    // `a` receives the next level; after `levels` levels the data is in `to`.
    for (; levels > 0; --levels, width *= 2) {
      binary_pass(src, a, width);
      src = a;
      std::swap(a, b);
    }
  }

  // Merges groups of `fan_in` adjacent runs of `width` from `from` into `to`.
  void multiway_pass(MemRegion from, MemRegion to, std::size_t width, std::size_t fan_in) {
    const std::size_t n = from.len;
    using Head = std::pair<Word, std::size_t>;  // key, run
    auto worse = [&](const Head& l, const Head& r) {
      if (less_(l.first, r.first)) return false;
      if (less_(r.first, l.first)) return true;
      return l.second > r.second;
    };
    for (std::size_t lo = 0; lo < n; lo += width * fan_in) {
      const std::size_t runs = std::min(fan_in, (n - lo + width - 1) / width);
      const std::uint64_t heap_cost = 2 * std::max<std::uint64_t>(1, ceil_log2(runs));
      std::vector<std::size_t> pos(runs), end(runs);
      std::priority_queue<Head, std::vector<Head>, decltype(worse)> heap(worse);
      for (std::size_t r = 0; r < runs; ++r) {
        pos[r] = lo + r * width;
        end[r] = std::min(n, pos[r] + width);
        heap.emplace(m_.read(core_, from[pos[r]]), r);
      }
      for (std::size_t out = lo; !heap.empty(); ++out) {
        const auto [key, r] = heap.top();
        heap.pop();
        m_.work(core_, heap_cost);
        m_.write(core_, to[out], key);
        if (++pos[r] < end[r]) heap.emplace(m_.read(core_, from[pos[r]]), r);
      }
    }
  }

 private:
  Machine& m_;
  int core_;
  KeyOrder less_;
};

}  // namespace

void seq_sort(Machine& m, int core, MemRegion src, MemRegion dst, KeyOrder less, bool src_is_scratch) {
  const std::size_t n = src.len;
  if (dst.len < n) throw Fault("sort output too small");
  if (n == 0) return;
  dst = dst.slice(0, n);
  const auto& cfg = m.config();
  const std::size_t run = std::max<std::size_t>(2, cfg.M / 4);
  const std::size_t fan_in = std::max<std::size_t>(2, cfg.M / (2 * cfg.B));

  std::size_t passes = 0;
  for (std::size_t w = run; w < n; w *= fan_in) ++passes;

  Scratch scratch(m);
  auto aux = m.alloc(std::min(run, n));
  // The two buffers the merge passes alternate between; runs start in the one
  // that makes the final pass land in dst.
  MemRegion other = src_is_scratch ? src : m.alloc(n);
  MemRegion runs_at = passes % 2 == 0 ? dst : other;

  SeqSorter sorter(m, core, less);
  m.solo(core, [&](int) {
    for (std::size_t lo = 0; lo < n; lo += run) {
      const std::size_t len = std::min(run, n - lo);
      sorter.sort_run(src.slice(lo, len), runs_at.slice(lo, len), aux);
    }
    MemRegion from = runs_at, to = runs_at.base == dst.base ? other : dst;
    for (std::size_t w = run; w < n; w *= fan_in) {
      sorter.multiway_pass(from, to, w, fan_in);
      std::swap(from, to);
    }
  });
}

}  // namespace pemlab
