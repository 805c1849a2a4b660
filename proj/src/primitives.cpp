#include "pemlab/primitives.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace pemlab {

Range even_chunk(std::size_t n, std::size_t parts, std::size_t k) {
  const std::size_t base = n / parts;
  const std::size_t begin = base * k;
  return {begin, k + 1 == parts ? n : begin + base};
}

Range block_chunk(MemRegion r, std::size_t parts, std::size_t k, std::size_t B) {
  auto boundary = [&](std::size_t j) -> std::size_t {
    if (j == 0) return 0;
    if (j >= parts) return r.len;
    const std::size_t nominal = r.base + (r.len / parts) * j;
    const std::size_t aligned = (nominal + B - 1) / B * B;
    return std::min(aligned - r.base, r.len);
  };
  return {boundary(k), boundary(k + 1)};
}

namespace {

int worker(CoreRange cores, int c) { return c - cores.first; }

template <class Op>
Word par_reduce(Machine& m, CoreRange cores, MemRegion a, Op op) {
  if (a.empty()) throw std::invalid_argument("reduction of an empty sequence");
  Scratch scratch(m);
  const std::size_t B = m.config().B;
  const auto w = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cores.count), a.len));
  const CoreRange group{cores.first, w};
  auto partials = m.alloc(static_cast<std::size_t>(w) * B);
  m.round(group, [&](int c) {
    const auto k = static_cast<std::size_t>(worker(group, c));
    const Range r = even_chunk(a.len, static_cast<std::size_t>(w), k);
    Word acc = m.read(c, a[r.begin]);
    for (std::size_t i = r.begin + 1; i < r.end; ++i) {
      acc = op(acc, m.read(c, a[i]));
      m.work(c);
    }
    m.write(c, partials[k * B], acc);
  });
  return tree_reduce(m, group, partials, static_cast<std::size_t>(w), op);
}

}  // namespace

Word par_max(Machine& m, CoreRange cores, MemRegion a) {
  return par_reduce(m, cores, a, [](Word x, Word y) { return std::max(x, y); });
}

Word par_sum(Machine& m, CoreRange cores, MemRegion a) {
  return par_reduce(m, cores, a, [](Word x, Word y) { return x + y; });
}

namespace {

// Prefix computation over an implicit complete binary tree whose internal
// nodes are stored in infix order: the node spanning [i, i + size) keeps the
// sum of its left half at tree[i + size / 2].
class PrefixTree {
 public:
  PrefixTree(Machine& m, MemRegion in, MemRegion out, MemRegion tree)
      : m_(m), in_(in), out_(out), tree_(tree) {}

  Word up(int c, std::size_t i, std::size_t size) {
    if (i >= in_.len) return 0;
    if (size == 1) return m_.read(c, in_[i]);
    const Word left = up(c, i, size / 2);
    m_.write(c, tree_[i + size / 2], left);
    const Word right = up(c, i + size / 2, size / 2);
    m_.work(c);
    return left + right;
  }

  void down(int c, std::size_t i, std::size_t size, Word offset) {
    if (i >= in_.len) return;
    if (size == 1) {
      m_.work(c);
      m_.write(c, out_[i], offset + m_.read(c, in_[i]));
      return;
    }
    down(c, i, size / 2, offset);
    if (i + size / 2 < in_.len) {
      const Word left = m_.read(c, tree_[i + size / 2]);
      down(c, i + size / 2, size / 2, offset + left);
    }
  }

 private:
  Machine& m_;
  MemRegion in_, out_, tree_;
};

}  // namespace

void prefix_sum(Machine& m, CoreRange cores, MemRegion in, MemRegion out) {
  if (out.len < in.len) throw Fault("prefix output too small");
  const std::size_t n = in.len;
  if (n == 0) return;
  Scratch scratch(m);
  const std::size_t B = m.config().B;
  const std::size_t padded = std::bit_ceil(n);
  const std::size_t w = std::bit_floor(std::min<std::size_t>(static_cast<std::size_t>(cores.count), padded));
  const std::size_t leaf = padded / w;
  const CoreRange group{cores.first, static_cast<int>(w)};

  auto tree = m.alloc(padded);
  auto totals = m.alloc(w * B);
  auto offsets = m.alloc(w * B);
  PrefixTree pt(m, in, out, tree);

  m.round(group, [&](int c) {
    const auto k = static_cast<std::size_t>(worker(group, c));
    m.write(c, totals[k * B], pt.up(c, k * leaf, leaf));
  });
  for (std::size_t s = 1; s < w; s *= 2) {
    m.round(group, [&](int c) {
      const auto k = static_cast<std::size_t>(worker(group, c));
      if (k % (2 * s) != 0) return;
      const Word left = m.read(c, totals[k * B]);
      const Word right = m.read(c, totals[(k + s) * B]);
      m.write(c, tree[(k + s) * leaf], left);
      m.write(c, totals[k * B], left + right);
    });
  }
  for (std::size_t s = w / 2; s >= 1; s /= 2) {
    m.round(group, [&](int c) {
      const auto k = static_cast<std::size_t>(worker(group, c));
      if (k % (2 * s) != 0) return;
      const Word offset = m.read(c, offsets[k * B]);
      const Word left = m.read(c, tree[(k + s) * leaf]);
      m.write(c, offsets[(k + s) * B], offset + left);
    });
  }
  m.round(group, [&](int c) {
    const auto k = static_cast<std::size_t>(worker(group, c));
    pt.down(c, k * leaf, leaf, m.read(c, offsets[k * B]));
  });
}

namespace {

struct Block {
  std::size_t r0, r1, c0, c1;
};

void transpose_seq(Machine& m, int c, MemRegion in, MemRegion out, std::size_t rows, std::size_t cols,
                   Block b) {
  const std::size_t h = b.r1 - b.r0, w = b.c1 - b.c0;
  if (h == 0 || w == 0) return;
  if (h <= 4 && w <= 4) {
    for (std::size_t i = b.r0; i < b.r1; ++i)
      for (std::size_t j = b.c0; j < b.c1; ++j) m.write(c, out[j * rows + i], m.read(c, in[i * cols + j]));
    return;
  }
  if (w >= h) {
    const std::size_t mid = b.c0 + w / 2;
    transpose_seq(m, c, in, out, rows, cols, {b.r0, b.r1, b.c0, mid});
    transpose_seq(m, c, in, out, rows, cols, {b.r0, b.r1, mid, b.c1});
  } else {
    const std::size_t mid = b.r0 + h / 2;
    transpose_seq(m, c, in, out, rows, cols, {b.r0, mid, b.c0, b.c1});
    transpose_seq(m, c, in, out, rows, cols, {mid, b.r1, b.c0, b.c1});
  }
}

// Splits the matrix among cores. Columns are halved while cols > rows / 4, and
// always when the whole matrix has fewer than B rows, so each core's share of
// the output is contiguous.
void assign_blocks(std::vector<Block>& out, std::size_t first, std::size_t count, Block b, bool columns_only) {
  if (count == 1) {
    out[first] = b;
    return;
  }
  const std::size_t h = b.r1 - b.r0, w = b.c1 - b.c0;
  const std::size_t left = count / 2;
  bool split_cols = columns_only || 4 * w > h;
  if (split_cols && w < 2 && h >= 2 && !columns_only) split_cols = false;
  if (split_cols) {
    const std::size_t mid = b.c0 + w * left / count;
    assign_blocks(out, first, left, {b.r0, b.r1, b.c0, mid}, columns_only);
    assign_blocks(out, first + left, count - left, {b.r0, b.r1, mid, b.c1}, columns_only);
  } else {
    const std::size_t mid = b.r0 + h * left / count;
    assign_blocks(out, first, left, {b.r0, mid, b.c0, b.c1}, columns_only);
    assign_blocks(out, first + left, count - left, {mid, b.r1, b.c0, b.c1}, columns_only);
  }
}

}  // namespace

void transpose(Machine& m, CoreRange cores, MemRegion in, std::size_t rows, std::size_t cols, MemRegion out) {
  if (in.len < rows * cols || out.len < rows * cols) throw Fault("transpose region too small");
  if (rows == 0 || cols == 0) return;
  const auto w = std::min<std::size_t>(static_cast<std::size_t>(cores.count), rows * cols);
  std::vector<Block> blocks(w);
  assign_blocks(blocks, 0, w, {0, rows, 0, cols}, rows < m.config().B);
  const CoreRange group{cores.first, static_cast<int>(w)};
  m.round(group, [&](int c) {
    transpose_seq(m, c, in, out, rows, cols, blocks[static_cast<std::size_t>(worker(group, c))]);
  });
}

std::size_t rank(Machine& m, CoreRange cores, Word q, MemRegion a, KeyOrder less) {
  if (a.empty()) return 0;
  Scratch scratch(m);
  const std::size_t B = m.config().B;
  const auto p = std::min<std::size_t>(static_cast<std::size_t>(cores.count), a.len);
  const CoreRange group{cores.first, static_cast<int>(p)};
  auto partials = m.alloc(p * B);
  m.round(group, [&](int c) {
    const auto k = static_cast<std::size_t>(worker(group, c));
    const Range r = even_chunk(a.len, p, k);
    Word count = 0;
    for (std::size_t i = r.begin; i < r.end; ++i) {
      m.work(c);
      if (less(m.read(c, a[i]), q)) ++count;
    }
    m.write(c, partials[k * B], count);
  });
  // Only about p^2/n cores add the partial ranks.
  const std::size_t adders = std::clamp<std::size_t>((p * p + a.len - 1) / a.len, 1, p);
  if (adders < p) {
    auto sums = m.alloc(adders * B);
    const CoreRange sum_group{cores.first, static_cast<int>(adders)};
    m.round(sum_group, [&](int c) {
      const auto k = static_cast<std::size_t>(worker(sum_group, c));
      const Range r = even_chunk(p, adders, k);
      Word s = 0;
      for (std::size_t i = r.begin; i < r.end; ++i) s += m.read(c, partials[i * B]);
      m.write(c, sums[k * B], s);
    });
    return static_cast<std::size_t>(
        tree_reduce(m, sum_group, sums, adders, [](Word x, Word y) { return x + y; }));
  }
  return static_cast<std::size_t>(tree_reduce(m, group, partials, p, [](Word x, Word y) { return x + y; }));
}

void compact(Machine& m, CoreRange cores, std::span<const MemRegion> parts, MemRegion dest) {
  std::vector<std::size_t> starts;
  starts.reserve(parts.size() + 1);
  std::size_t n = 0;
  for (const auto& part : parts) {
    starts.push_back(n);
    n += part.len;
  }
  starts.push_back(n);
  if (dest.len < n) throw Fault("compaction destination too small");
  if (n == 0) return;
  const MemRegion target = dest.slice(0, n);
  const auto w = std::min<std::size_t>(static_cast<std::size_t>(cores.count), n);
  const CoreRange group{cores.first, static_cast<int>(w)};
  m.round(group, [&](int c) {
    const Range r = block_chunk(target, w, static_cast<std::size_t>(worker(group, c)), m.config().B);
    if (r.empty()) return;
    auto part = static_cast<std::size_t>(std::upper_bound(starts.begin(), starts.end(), r.begin) - starts.begin()) - 1;
    for (std::size_t pos = r.begin; pos < r.end; ++pos) {
      while (pos >= starts[part + 1]) ++part;
      m.write(c, target[pos], m.read(c, parts[part][pos - starts[part]]));
    }
  });
}

void brute_sort(Machine& m, CoreRange cores, MemRegion in, MemRegion out, KeyOrder less) {
  const std::size_t n = in.len;
  if (out.len < n) throw Fault("sort output too small");
  if (n == 0) return;
  Scratch scratch(m);
  const std::size_t B = m.config().B;
  const auto w = std::min<std::size_t>(static_cast<std::size_t>(cores.count), n);
  const CoreRange group{cores.first, static_cast<int>(w)};
  auto ranks = m.alloc(n);
  auto spread = m.alloc(n * n);

  m.round(group, [&](int c) {
    const Range r = block_chunk(ranks, w, static_cast<std::size_t>(worker(group, c)), B);
    // A tile of own keys stays in registers while the input streams past.
    constexpr std::size_t kTile = 8;
    for (std::size_t lo = r.begin; lo < r.end; lo += kTile) {
      const std::size_t hi = std::min(r.end, lo + kTile);
      Word key[kTile], below[kTile] = {};
      for (std::size_t i = lo; i < hi; ++i) key[i - lo] = m.read(c, in[i]);
      for (std::size_t j = 0; j < n; ++j) {
        const Word other = m.read(c, in[j]);
        m.work(c, hi - lo);
        for (std::size_t i = lo; i < hi; ++i)
          if (less(other, key[i - lo]) || (j < i && !less(key[i - lo], other))) ++below[i - lo];
      }
      for (std::size_t i = lo; i < hi; ++i) m.write(c, ranks[i], below[i - lo]);
    }
  });

  std::size_t phases = 0;
  for (std::size_t k = 0; k < w; ++k) phases = std::max(phases, block_chunk(ranks, w, k, B).size());
  for (std::size_t phase = 0; phase < phases; ++phase) {
    m.round(group, [&](int c) {
      const Range r = block_chunk(ranks, w, static_cast<std::size_t>(worker(group, c)), B);
      const std::size_t i = r.begin + phase;
      if (i >= r.end) return;
      const auto at = static_cast<std::size_t>(m.read(c, ranks[i]));
      m.write(c, spread[n * at], m.read(c, in[i]));
    });
  }

  m.round(group, [&](int c) {
    const Range r = block_chunk(out.slice(0, n), w, static_cast<std::size_t>(worker(group, c)), B);
    for (std::size_t i = r.begin; i < r.end; ++i) m.write(c, out[i], m.read(c, spread[n * i]));
  });
}

std::size_t presample_count(std::size_t n) {
  if (n == 0) return 0;
  auto s = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n)) - 1e-9));
  return std::clamp<std::size_t>(s, 1, n);
}

std::size_t splitter_count(std::size_t n, int x) {
  if (n == 0) return 0;
  const double root = std::pow(static_cast<double>(n), 1.0 / x);
  const auto s = static_cast<std::size_t>(std::ceil(root - 1e-9));
  return std::clamp<std::size_t>(s, 1, presample_count(n));
}

double quality_threshold(std::size_t n, int x) {
  const double dn = static_cast<double>(n);
  const double t = std::sqrt(dn) / std::pow(dn, 1.0 / x);
  return (1.0 + std::pow(t, -1.0 / 6.0)) * std::pow(dn, 1.0 - 1.0 / x);
}

SplitterSet sample_splitters(Machine& m, CoreRange cores, MemRegion a, int x, std::uint64_t seed, KeyOrder less,
                             std::size_t count) {
  if (x < 4) throw std::invalid_argument("sampling exponent must be >= 4");
  if (a.empty()) throw std::invalid_argument("cannot sample an empty sequence");
  const std::size_t n = a.len;
  const std::size_t B = m.config().B;
  const std::size_t pre = presample_count(n);
  // The default takes every (pre/s)-th sample key; an explicit count spaces
  // the picks so that the pre-sample splits into count + 1 equal parts, and
  // is capped so that every part holds at least one sample key.
  const std::size_t s = count == 0 ? splitter_count(n, x) : std::min(count, std::max<std::size_t>(1, pre - 1));
  const std::size_t parts = count == 0 ? s : std::min(s + 1, pre);

  SplitterSet out;
  out.x = x;
  out.t = std::sqrt(static_cast<double>(n)) / std::pow(static_cast<double>(n), 1.0 / x);
  out.region = m.alloc(s);

  Scratch scratch(m);
  auto presample = m.alloc(pre);
  auto sorted = m.alloc(pre);
  const auto w = std::min<std::size_t>(static_cast<std::size_t>(cores.count), pre);
  const CoreRange group{cores.first, static_cast<int>(w)};
  m.round(group, [&](int c) {
    const Range r = block_chunk(presample, w, static_cast<std::size_t>(worker(group, c)), B);
    for (std::size_t j = r.begin; j < r.end; ++j) {
      const Range chunk = even_chunk(n, pre, j);
      CounterRng rng(seed, j);
      const std::size_t pick = chunk.begin + rng.below(chunk.size());
      m.work(c);
      m.write(c, presample[j], m.read(c, a[pick]));
    }
  });
  brute_sort(m, cores, presample, sorted, less);

  const auto w2 = std::min<std::size_t>(static_cast<std::size_t>(cores.count), s);
  const CoreRange pick_group{cores.first, static_cast<int>(w2)};
  m.round(pick_group, [&](int c) {
    const Range r = block_chunk(out.region, w2, static_cast<std::size_t>(worker(pick_group, c)), B);
    for (std::size_t i = r.begin; i < r.end; ++i) {
      const std::size_t idx = (i + 1) * pre / parts - 1;
      m.write(c, out.region[i], m.read(c, sorted[idx]));
    }
  });
  out.keys = m.snapshot(out.region);
  return out;
}

void sample_k_of_n_seq(Machine& m, int core, MemRegion a, std::size_t k, CounterRng& rng, MemRegion out) {
  if (out.len < k) throw Fault("sample output too small");
  if (k == 0) return;
  if (a.empty()) throw std::invalid_argument("cannot sample an empty sequence");
  std::vector<Word> picks(k);
  for (auto& r : picks) r = static_cast<Word>(rng.below(a.len));
  std::sort(picks.begin(), picks.end());
  Scratch scratch(m);
  auto ranks = m.alloc(k);
  m.solo(core, [&](int c) {
    m.work(c, static_cast<std::uint64_t>(k * std::max(1.0, std::log2(static_cast<double>(k)))));
    for (std::size_t i = 0; i < k; ++i) m.write(c, ranks[i], picks[i]);
    for (std::size_t i = 0; i < k; ++i) {
      const auto at = static_cast<std::size_t>(m.read(c, ranks[i]));
      m.write(c, out[i], m.read(c, a[at]));
    }
  });
}

}  // namespace pemlab
