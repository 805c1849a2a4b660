#include "pemlab/partition.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "pemlab/keys.hpp"
#include "pemlab/sort.hpp"

namespace pemlab {

// Sequential partition of the concatenation of pieces.
BucketedRun partition_pieces(Machine& m, int core, std::span<const MemRegion> pieces, const SplitterSet& splitters,
                             MemRegion out, KeyOrder less);

namespace {

// Below this many splitters a single level (chunk, partition, merge) is used
// instead of the coarse/fine split.
constexpr std::size_t kSingleLevelSplitters = 8;
constexpr std::size_t kRecursionFloor = 64;

std::size_t ceil_sqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (r * r < n) ++r;
  while (r > 0 && (r - 1) * (r - 1) >= n) --r;
  return r;
}

std::uint64_t search_cost(std::size_t z) { return std::max<std::uint64_t>(1, std::bit_width(z)); }

BucketedRun copy_as_one_bucket(Machine& m, CoreRange cores, MemRegion a, MemRegion out) {
  const MemRegion lists[] = {a};
  return {concat_runs(m, cores, lists, out), {0, a.len}};
}

// Runs `part(group, chunk_index, input, output)` over the chunks, outputs laid
// out in `tmp` at the chunk's offset. When chunks outnumber the cores, each
// core takes a contiguous range of chunks and, if `group_limit` is nonzero,
// feeds neighbouring chunks together as one input of at most that many keys
// (a quarter cache keeps the count and place passes of one input resident).
// Otherwise cores follow chunk sizes.
template <class Part>
std::vector<BucketedRun> per_chunk(CoreRange cores, MemRegion a, MemRegion tmp, const std::vector<Range>& chunks,
                                   std::size_t group_limit, Part part) {
  std::vector<BucketedRun> runs;
  auto run_one = [&](CoreRange g, std::size_t last, Range r) {
    runs.push_back(part(g, last, a.slice(r.begin, r.size()), tmp.slice(r.begin, r.size())));
  };
  const auto count = static_cast<std::size_t>(cores.count);
  if (chunks.size() >= count) {
    for (std::size_t k = 0; k < count; ++k) {
      const CoreRange solo{cores.first + static_cast<int>(k), 1};
      const Range mine = even_chunk(chunks.size(), count, k);
      for (std::size_t j = mine.begin; j < mine.end;) {
        std::size_t last = j;
        while (last + 1 < mine.end && chunks[last + 1].end - chunks[j].begin <= group_limit) ++last;
        run_one(solo, last, {chunks[j].begin, chunks[last].end});
        j = last + 1;
      }
    }
  } else {
    std::vector<std::size_t> sizes;
    for (const auto& c : chunks) sizes.push_back(c.size());
    const auto groups = allocate_cores(cores, sizes);
    for (std::size_t j = 0; j < chunks.size(); ++j) run_one(groups[j], j, chunks[j]);
  }
  return runs;
}

std::size_t group_limit(const Machine& m) { return m.config().M / 4; }

std::vector<Range> even_chunks(std::size_t n, std::size_t parts) {
  std::vector<Range> out(parts);
  for (std::size_t j = 0; j < parts; ++j) out[j] = even_chunk(n, parts, j);
  return out;
}

BucketedRun partition_fine(Machine& m, CoreRange cores, MemRegion a, const SplitterSet& s, MemRegion out,
                           std::size_t chunk_len, const PartitionTask& task) {
  const std::size_t n = a.len;
  if (n <= std::max(task.keys_per_core(), kRecursionFloor) || cores.count == 1)
    return partition_seq(m, cores.first, a, s, out, task.less);

  std::vector<Range> chunks;
  for (std::size_t lo = 0; lo < n; lo += chunk_len) chunks.push_back({lo, std::min(n, lo + chunk_len)});
  const bool has_short = chunks.back().size() < chunk_len;

  Scratch scratch(m);
  auto tmp = m.alloc(n);
  auto runs = per_chunk(cores, a, tmp, chunks, group_limit(m), [&](CoreRange g, std::size_t j, MemRegion in, MemRegion o) {
    if (has_short && j + 1 == chunks.size() && g.count > 1) return partition_sqrt(m, g, in, s, o, task.less);
    return partition_level(m, g, in, s, o, task);
  });
  return merge_bucketed_unchecked(m, cores, runs, s.size() + 1, out);
}

}  // namespace

SplitterSet splitter_slice(const SplitterSet& s, std::size_t begin, std::size_t count) {
  SplitterSet out;
  out.region = s.region.slice(begin, count);
  out.keys.assign(s.keys.begin() + static_cast<std::ptrdiff_t>(begin),
                  s.keys.begin() + static_cast<std::ptrdiff_t>(begin + count));
  out.x = s.x;
  out.t = s.t;
  return out;
}

namespace {

// round(p * prefix / total) without floating point.
int scaled_position(std::size_t prefix, int p, std::size_t total) {
  const auto wide = static_cast<unsigned __int128>(prefix) * static_cast<unsigned>(p) * 2 + total;
  return static_cast<int>(wide / (2 * static_cast<unsigned __int128>(total)));
}

}  // namespace

std::vector<int> core_shares(int p, std::span<const std::size_t> sizes) {
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  std::vector<int> shares(sizes.size(), 0);
  if (sizes.empty()) return shares;
  if (total == 0) {
    shares[0] = p;
    return shares;
  }
  std::size_t prefix = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const int lo = scaled_position(prefix, p, total);
    prefix += sizes[i];
    shares[i] = scaled_position(prefix, p, total) - lo;
  }
  return shares;
}

std::vector<CoreRange> allocate_cores(CoreRange cores, std::span<const std::size_t> sizes) {
  const auto shares = core_shares(cores.count, sizes);
  std::vector<CoreRange> out(sizes.size());
  std::vector<double> load(static_cast<std::size_t>(cores.count), 0.0);
  std::vector<std::size_t> leftover;
  int cursor = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (shares[i] > 0) {
      out[i] = {cores.first + cursor, shares[i]};
      for (int k = cursor; k < cursor + shares[i]; ++k)
        load[static_cast<std::size_t>(k)] += static_cast<double>(sizes[i]) / shares[i];
      cursor += shares[i];
    } else {
      leftover.push_back(i);
    }
  }
  // Parts too small for a core of their own go, largest first, to the core
  // with the least work so far.
  std::stable_sort(leftover.begin(), leftover.end(), [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
  for (std::size_t i : leftover) {
    const auto k = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    out[i] = {cores.first + static_cast<int>(k), 1};
    load[k] += static_cast<double>(sizes[i]);
  }
  return out;
}

BucketedRun partition_pieces(Machine& m, int core, std::span<const MemRegion> pieces, const SplitterSet& splitters,
                             MemRegion out, KeyOrder less) {
  std::size_t n = 0;
  for (const auto& piece : pieces) n += piece.len;
  const std::size_t z = splitters.size();
  if (out.len < n) throw Fault("partition output too small");
  BucketedRun result{out.slice(0, n), std::vector<std::size_t>(z + 2, 0)};
  result.bounds.back() = n;
  if (n == 0) {
    std::fill(result.bounds.begin(), result.bounds.end(), 0);
    return result;
  }
  const auto& cfg = m.config();

  if (z + 1 <= cfg.M / (2 * cfg.B)) {
    // Few buckets: one output block per bucket fits in cache, so count and
    // place directly, searching the splitters kept in registers. Inputs of a
    // quarter cache or less remember each key's bucket between the passes.
    Scratch scratch(m);
    const bool remember = n <= cfg.M / 4;
    const MemRegion ids = remember ? m.alloc(n) : MemRegion{};
    m.solo(core, [&](int c) {
      std::vector<Word> keys(z);
      for (std::size_t j = 0; j < z; ++j) keys[j] = m.read(c, splitters.region[j]);
      auto bucket_of = [&](Word k) {
        m.work(c, search_cost(z));
        return static_cast<std::size_t>(std::lower_bound(keys.begin(), keys.end(), k, less) - keys.begin());
      };
      std::vector<std::size_t> next(z + 1, 0);
      std::size_t at = 0;
      for (const auto& piece : pieces)
        for (std::size_t i = 0; i < piece.len; ++i, ++at) {
          const std::size_t b = bucket_of(m.read(c, piece[i]));
          ++next[b];
          if (remember) m.write(c, ids[at], static_cast<Word>(b));
        }
      std::size_t acc = 0;
      for (std::size_t b = 0; b <= z; ++b) {
        result.bounds[b] = acc;
        acc += std::exchange(next[b], acc);
      }
      m.work(c, z + 1);
      at = 0;
      for (const auto& piece : pieces)
        for (std::size_t i = 0; i < piece.len; ++i, ++at) {
          const Word k = m.read(c, piece[i]);
          const auto b = remember ? static_cast<std::size_t>(m.read(c, ids[at])) : bucket_of(k);
          m.write(c, result.data[next[b]++], k);
        }
    });
    return result;
  }

  if (pieces.size() == 1) {
    seq_sort(m, core, pieces[0], result.data, less);
  } else {
    Scratch scratch(m);
    auto joined = m.alloc(n);
    m.solo(core, [&](int c) {
      std::size_t at = 0;
      for (const auto& piece : pieces)
        for (std::size_t i = 0; i < piece.len; ++i) m.write(c, joined[at++], m.read(c, piece[i]));
    });
    seq_sort(m, core, joined, result.data, less, true);
  }
  m.solo(core, [&](int c) {
    std::size_t j = 0;
    Word s = m.read(c, splitters.region[0]);
    for (std::size_t i = 0; i < n && j < z; ++i) {
      const Word k = m.read(c, result.data[i]);
      for (; j < z; ) {
        m.work(c);
        if (!less(s, k)) break;
        result.bounds[++j] = i;
        if (j < z) s = m.read(c, splitters.region[j]);
      }
    }
    for (; j < z; ++j) result.bounds[j + 1] = n;
  });
  return result;
}

BucketedRun partition_seq(Machine& m, int core, MemRegion a, const SplitterSet& splitters, MemRegion out,
                          KeyOrder less) {
  const MemRegion pieces[] = {a};
  return partition_pieces(m, core, pieces, splitters, out, less);
}

BucketedRun partition_quadratic(Machine& m, CoreRange cores, MemRegion a, const SplitterSet& splitters,
                                MemRegion out, KeyOrder less) {
  const std::size_t n = a.len, z = splitters.size();
  if (out.len < n) throw Fault("partition output too small");
  BucketedRun result{out.slice(0, n), std::vector<std::size_t>(z + 2, 0)};
  result.bounds.back() = n;
  if (n == 0) return result;
  brute_sort(m, cores, a, result.data, less);
  if (z == 0) return result;

  Scratch scratch(m);
  auto ends = m.alloc(z);
  const auto w = std::min<std::size_t>(static_cast<std::size_t>(cores.count), z);
  const CoreRange group{cores.first, static_cast<int>(w)};
  const std::size_t B = m.config().B;
  m.round(group, [&](int c) {
    const Range mine = block_chunk(ends, w, static_cast<std::size_t>(c - group.first), B);
    for (std::size_t j = mine.begin; j < mine.end; ++j) {
      const Word s = m.read(c, splitters.region[j]);
      std::size_t lo = 0, hi = n;  // first position holding a key above s
      while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        m.work(c);
        if (less(s, m.read(c, result.data[mid])))
          hi = mid;
        else
          lo = mid + 1;
      }
      m.write(c, ends[j], static_cast<Word>(lo));
    }
  });
  const auto found = m.snapshot(ends);
  for (std::size_t j = 0; j < z; ++j) result.bounds[j + 1] = static_cast<std::size_t>(found[j]);
  return result;
}

BucketedRun partition_sqrt(Machine& m, CoreRange cores, MemRegion a, const SplitterSet& splitters,
                           MemRegion out, KeyOrder less) {
  const std::size_t n = a.len, z = splitters.size();
  if (out.len < n) throw Fault("partition output too small");
  if (n == 0) return {out.slice(0, 0), std::vector<std::size_t>(z + 2, 0)};
  // Enough keys per chunk that the merge sees at least chunks * buckets keys.
  const std::size_t chunks = std::clamp<std::size_t>(std::min(ceil_sqrt(n), n / (z + 1)), 1, n);
  Scratch scratch(m);
  auto tmp = m.alloc(n);
  auto runs = per_chunk(cores, a, tmp, even_chunks(n, chunks), 0, [&](CoreRange g, std::size_t, MemRegion in, MemRegion o) {
    return partition_quadratic(m, g, in, splitters, o, less);
  });
  return merge_bucketed_unchecked(m, cores, runs, z + 1, out);
}

BucketedRun partition_level(Machine& m, CoreRange cores, MemRegion a, const SplitterSet& splitters, MemRegion out,
                            const PartitionTask& task) {
  const std::size_t n = a.len, z = splitters.size();
  if (out.len < n) throw Fault("partition output too small");
  if (z == 0) return copy_as_one_bucket(m, cores, a, out);
  if (z * z > n)
    m.add_diagnostic("partition level with n=" + std::to_string(n) + " has z=" + std::to_string(z) +
                     " splitters, above sqrt(n)");
  if (n <= std::max(task.keys_per_core(), kRecursionFloor) || cores.count == 1)
    return partition_seq(m, cores.first, a, splitters, out, task.less);

  const std::size_t chunk_count = ceil_sqrt(n);
  const auto chunks = even_chunks(n, chunk_count);
  Scratch scratch(m);
  auto tmp = m.alloc(n);

  if (z <= kSingleLevelSplitters) {
    auto runs = per_chunk(cores, a, tmp, chunks, group_limit(m), [&](CoreRange g, std::size_t, MemRegion in, MemRegion o) {
      return partition_level(m, g, in, splitters, o, task);
    });
    return merge_bucketed_unchecked(m, cores, runs, z + 1, out);
  }

  // Coarse pass on every stride-th splitter, then each coarse bucket is split
  // by the splitters that fall inside it.
  const std::size_t stride = ceil_sqrt(z);
  const std::size_t coarse_count = z / stride;
  SplitterSet coarse;
  coarse.region = m.alloc(coarse_count);
  coarse.x = splitters.x;
  coarse.t = splitters.t;
  m.solo(cores.first, [&](int c) {
    for (std::size_t j = 0; j < coarse_count; ++j)
      m.write(c, coarse.region[j], m.read(c, splitters.region[(j + 1) * stride - 1]));
  });
  coarse.keys = m.snapshot(coarse.region);

  auto runs = per_chunk(cores, a, tmp, chunks, group_limit(m), [&](CoreRange g, std::size_t, MemRegion in, MemRegion o) {
    return partition_level(m, g, in, coarse, o, task);
  });
  std::vector<std::size_t> sizes(coarse_count + 1, 0);
  for (std::size_t i = 0; i <= coarse_count; ++i)
    for (const auto& r : runs) sizes[i] += r.bucket_size(i);
  const auto groups = allocate_cores(cores, sizes);

  // A coarse bucket handled by one core is bucketed straight from its pieces
  // in the runs; larger ones are gathered first and partitioned in parallel.
  BucketedRun result{out.slice(0, n), {0}};
  std::size_t offset = 0;
  for (std::size_t i = 0; i <= coarse_count; ++i) {
    const std::size_t first = i * stride;
    const std::size_t count = i < coarse_count ? stride - 1 : z - first;
    const auto fine_splitters = splitter_slice(splitters, first, count);
    if (sizes[i] == 0) {
      result.bounds.insert(result.bounds.end(), count + 1, offset);
      continue;
    }
    std::vector<MemRegion> pieces;
    for (const auto& r : runs) pieces.push_back(r.bucket(i));
    const MemRegion dest = out.slice(offset, sizes[i]);
    BucketedRun fine;
    if (groups[i].count == 1 || sizes[i] <= std::max(task.keys_per_core(), kRecursionFloor)) {
      fine = partition_pieces(m, groups[i].first, pieces, fine_splitters, dest, task.less);
    } else {
      Scratch gather(m);
      const MemRegion bucket = concat_runs(m, groups[i], pieces, m.alloc(sizes[i]));
      fine = partition_fine(m, groups[i], bucket, fine_splitters, dest, chunk_count, task);
    }
    for (std::size_t j = 1; j < fine.bounds.size(); ++j) result.bounds.push_back(offset + fine.bounds[j]);
    offset += sizes[i];
  }
  return result;
}

BucketedRun partition_main(Machine& m, CoreRange cores, MemRegion a, const SplitterSet& splitters, MemRegion out,
                           KeyOrder less) {
  const std::size_t n = a.len, z = splitters.size();
  const auto& cfg = m.config();
  const auto p = static_cast<std::size_t>(cores.count);
  if (z * z > n)
    throw PreconditionError("partition needs z <= sqrt(n) (z=" + std::to_string(z) + ", n=" + std::to_string(n) + ")");
  if (n < cfg.M * p)
    throw PreconditionError("partition needs n >= M*p (n=" + std::to_string(n) + ", M*p=" +
                            std::to_string(cfg.M * p) + ")");
  const double log_ratio = z >= 2 ? std::log(static_cast<double>(z)) / std::log(static_cast<double>(n)) : 0.0;
  const double q = 2.0 / (1.0 - log_ratio);
  const double floor_n = std::pow(static_cast<double>(cfg.B), q) * static_cast<double>(p);
  if (static_cast<double>(n) + 1e-6 < floor_n)
    throw PreconditionError("partition needs n >= B^q * p (n=" + std::to_string(n) +
                            ", bound=" + std::to_string(floor_n) + ")");
  for (std::size_t j = 1; j < z; ++j)
    if (less(splitters.keys[j], splitters.keys[j - 1])) throw PreconditionError("splitters must be sorted");
  return partition_level(m, cores, a, splitters, out, PartitionTask{n, cores.count, less});
}

std::vector<std::size_t> multisearch(Machine& m, CoreRange cores, MemRegion queries, MemRegion sorted,
                                     MemRegion out) {
  const std::size_t n = queries.len, z = sorted.len;
  if (out.len < n) throw Fault("multisearch output too small");
  if (n == 0) return {};
  const std::size_t B = m.config().B;
  Scratch scratch(m);

  // Tag every query with its position; splitters take the largest tag so a
  // query equal to a sorted key lands in that key's bucket.
  auto tagged = m.alloc(n);
  const auto w = std::min<std::size_t>(static_cast<std::size_t>(cores.count), n);
  const CoreRange group{cores.first, static_cast<int>(w)};
  m.round(group, [&](int c) {
    const Range mine = block_chunk(tagged, w, static_cast<std::size_t>(c - group.first), B);
    for (std::size_t i = mine.begin; i < mine.end; ++i) {
      m.work(c);
      m.write(c, tagged[i], keys::pack(m.read(c, queries[i]), i));
    }
  });
  SplitterSet s;
  s.region = m.alloc(z);
  if (z > 0) {
    const auto ws = std::min<std::size_t>(static_cast<std::size_t>(cores.count), z);
    const CoreRange sgroup{cores.first, static_cast<int>(ws)};
    m.round(sgroup, [&](int c) {
      const Range mine = block_chunk(s.region, ws, static_cast<std::size_t>(c - sgroup.first), B);
      for (std::size_t j = mine.begin; j < mine.end; ++j) {
        m.work(c);
        m.write(c, s.region[j], keys::pack_upper(m.read(c, sorted[j])));
      }
    });
  }
  s.keys = m.snapshot(s.region);

  auto parted = m.alloc(n);
  const auto run = partition_level(m, cores, tagged, s, parted, PartitionTask{n, cores.count, {}});

  // Scatter each bucket index back to the query's position.
  m.round(group, [&](int c) {
    const Range mine = even_chunk(n, w, static_cast<std::size_t>(c - group.first));
    if (mine.empty()) return;
    auto bucket = static_cast<std::size_t>(std::upper_bound(run.bounds.begin(), run.bounds.end(), mine.begin) -
                                           run.bounds.begin()) - 1;
    m.work(c, search_cost(z));
    for (std::size_t pos = mine.begin; pos < mine.end; ++pos) {
      while (run.bounds[bucket + 1] <= pos) ++bucket;
      const auto idx = keys::index_of(m.read(c, run.data[pos]));
      m.write(c, out[idx], static_cast<Word>(bucket));
    }
  });
  std::vector<std::size_t> result(n);
  const auto found = m.snapshot(out.slice(0, n));
  for (std::size_t i = 0; i < n; ++i) result[i] = static_cast<std::size_t>(found[i]);
  return result;
}

}  // namespace pemlab
