#include <algorithm>
#include <optional>

#include "hull_support.hpp"
#include "pemlab/hull.hpp"
#include "pemlab/partition.hpp"

namespace pemlab {

using namespace hull_detail;

Point2 DualFrame::to_local(const Point2& p) const {
  const Point2 d = p - center;
  return {cos * d.x - sin * d.y, sin * d.x + cos * d.y};
}

Point2 DualFrame::to_global(const Point2& q) const {
  return Point2{cos * q.x + sin * q.y, cos * q.y - sin * q.x} + center;
}

DualFrame choose_frame(const Point2& center, std::span<const Point2> vertices) {
  // Rotations with rational sine and cosine from the triples (k^2-1, 2k, k^2+1).
  for (long k = 1;; ++k) {
    DualFrame f{center};
    if (k > 1) {
      const Rational h(k * k + 1);
      f.cos = Rational(k * k - 1) / h;
      f.sin = Rational(2 * k) / h;
      f.rotated = true;
    }
    const bool vertical = std::any_of(vertices.begin(), vertices.end(),
                                      [&](const Point2& v) { return sgn(f.to_local(v).y) == 0; });
    if (!vertical) return f;
  }
}

Point2 dual_point(const HalfPlane& h, const DualFrame& f) {
  const Rational offset = h.slack(f.center);
  if (sgn(offset) <= 0) throw GeometryError("dual frame center is not strictly inside the plane");
  const Point2 normal{f.cos * h.a - f.sin * h.b, f.sin * h.a + f.cos * h.b};
  return {normal.x / offset, normal.y / offset};
}

HalfPlane plane_from_dual(const Point2& q, const DualFrame& f) {
  const Point2 normal{f.cos * q.x + f.sin * q.y, f.cos * q.y - f.sin * q.x};
  return {normal.x, normal.y, 1 + dot(normal, f.center)};
}

Line2 dual_line(const Point2& vertex, const DualFrame& f) {
  const Point2 l = f.to_local(vertex);
  if (sgn(l.y) == 0) throw GeometryError("vertex dualizes to a vertical line in this frame");
  return {-l.x / l.y, 1 / l.y, sgn(l.y) > 0};
}

Point2 vertex_from_dual(const Line2& line, const DualFrame& f) {
  const Rational y = 1 / line.intercept;
  return f.to_global({-line.slope * y, y});
}

std::vector<Point2> dualize(std::span<const HalfPlane> planes, const DualFrame& f) {
  std::vector<Point2> out;
  out.reserve(planes.size());
  for (const auto& h : planes) out.push_back(dual_point(h, f));
  return out;
}

std::vector<Line2> dualize_vertices(const HullChain& chain, const DualFrame& f) {
  std::vector<Line2> out;
  out.reserve(chain.size());
  for (const auto& v : chain.vertices) out.push_back(dual_line(v, f));
  return out;
}

std::size_t SlabArrangement::locate(const Point2& q) const {
  const auto slab = static_cast<std::size_t>(std::lower_bound(slab_xs.begin(), slab_xs.end(), q.x) - slab_xs.begin());
  const auto& lines_up = order[slab];
  std::size_t lo = 0, hi = lines_up.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (lines[lines_up[mid]].at(q.x) < q.y)
      lo = mid + 1;
    else
      hi = mid;
  }
  return region_id(slab, lo);
}

SlabArrangement preprocess_arrangement(Machine& m, CoreRange cores, std::span<const Line2> lines,
                                       std::size_t sectors) {
  SlabArrangement arr;
  arr.lines.assign(lines.begin(), lines.end());
  arr.sectors = sectors;
  const std::size_t L = lines.size();
  const std::size_t B = m.config().B;

  // Crossing x of every pair of non-parallel lines.
  const std::size_t pairs = L * (L - (L > 0 ? 1 : 0)) / 2;
  std::vector<Rational> xs(pairs);
  if (pairs > 0) {
    auto crossing = m.alloc(pairs);
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cores.count), pairs);
    m.round(CoreRange{cores.first, static_cast<int>(workers)}, [&](int c) {
      const Range r = block_chunk(crossing, workers, static_cast<std::size_t>(c - cores.first), B);
      std::size_t at = 0;
      for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = i + 1; j < L; ++j, ++at) {
          if (at < r.begin || at >= r.end) continue;
          m.work(c);
          const Rational ds = lines[i].slope - lines[j].slope;
          const bool parallel = sgn(ds) == 0;
          if (!parallel) xs[at] = (lines[j].intercept - lines[i].intercept) / ds;
          m.write(c, crossing[at], parallel ? -1 : static_cast<Word>(at));
        }
      }
    });
    // Parallel pairs (-1) sort last.
    auto by_x = [&](Word a, Word b) {
      if (a < 0 || b < 0) return a >= 0 && b < 0;
      const auto& xa = xs[static_cast<std::size_t>(a)];
      const auto& xb = xs[static_cast<std::size_t>(b)];
      return xa < xb || (xa == xb && a < b);
    };
    auto sorted = m.alloc(pairs);
    brute_sort(m, cores, crossing, sorted, KeyOrder::of(by_x));
    m.solo(cores.first, [&](int c) {
      for (std::size_t i = 0; i < pairs; ++i) {
        const Word h = m.read(c, sorted[i]);
        m.work(c);
        if (h < 0) break;
        const auto& x = xs[static_cast<std::size_t>(h)];
        if (arr.slab_xs.empty() || arr.slab_xs.back() != x) arr.slab_xs.push_back(x);
      }
    });
  }

  const std::size_t slabs = arr.slab_count();
  const std::size_t per_slab = arr.regions_per_slab();
  arr.order.assign(slabs, {});
  arr.regions.assign(slabs * per_slab, {});
  arr.order_table = m.alloc(std::max<std::size_t>(1, slabs * L));
  arr.region_table = m.alloc(2 * slabs * per_slab);

  auto sample_x = [&](std::size_t s) -> Rational {
    const auto& v = arr.slab_xs;
    if (v.empty()) return 0;
    if (s == 0) return v.front() - 1;
    if (s == v.size()) return v.back() + 1;
    return (v[s - 1] + v[s]) / 2;
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cores.count), slabs);
  m.round(CoreRange{cores.first, static_cast<int>(workers)}, [&](int c) {
    const Range r = even_chunk(slabs, workers, static_cast<std::size_t>(c - cores.first));
    for (std::size_t s = r.begin; s < r.end; ++s) {
      const Rational x = sample_x(s);
      std::vector<Rational> ys(L);
      for (std::size_t k = 0; k < L; ++k) ys[k] = lines[k].at(x);
      auto& ord = arr.order[s];
      ord.resize(L);
      for (std::size_t k = 0; k < L; ++k) ord[k] = static_cast<std::uint32_t>(k);
      std::sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
        return ys[a] < ys[b] || (ys[a] == ys[b] && a < b);
      });
      m.work(c, L + sort_work(L));
      for (std::size_t k = 0; k < L; ++k) m.write(c, arr.order_table[s * L + k], ord[k]);

      for (std::size_t rank = 0; rank <= L; ++rank) {
        Rational y;
        if (L == 0)
          y = 0;
        else if (rank == 0)
          y = ys[ord.front()] - 1;
        else if (rank == L)
          y = ys[ord.back()] + 1;
        else
          y = (ys[ord[rank - 1]] + ys[ord[rank]]) / 2;
        std::vector<char> marked(sectors, 0);
        for (std::size_t k = 0; k < L; ++k) {
          if ((y > ys[k]) == lines[k].outside_above && sectors > 0) {
            marked[k % sectors] = 1;
            marked[(k + sectors - 1) % sectors] = 1;
          }
        }
        m.work(c, L);
        const SectorInterval iv = covering_interval(marked);
        const std::size_t id = arr.region_id(s, rank);
        arr.regions[id] = iv;
        m.write(c, arr.region_table[2 * id], static_cast<Word>(iv.start));
        m.write(c, arr.region_table[2 * id + 1], static_cast<Word>(iv.count));
      }
    }
  });
  return arr;
}

std::vector<std::size_t> locate_points(Machine& m, CoreRange cores, std::span<const Point2> pts,
                                       const SlabArrangement& arr) {
  const std::size_t n = pts.size();
  if (n == 0) return {};
  const std::size_t z = arr.slab_xs.size();
  const std::size_t L = arr.lines.size();

  Scratch scratch(m);
  auto handles = load_handles(m, n);
  auto result = m.alloc(n);

  // Handles below n are points, the rest slab boundaries; at equal x a point
  // orders before the boundary, so it lands in the slab on its left.
  auto by_x = [&](Word a, Word b) {
    const auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
    const Rational& xa = ia < n ? pts[ia].x : arr.slab_xs[ia - n];
    const Rational& xb = ib < n ? pts[ib].x : arr.slab_xs[ib - n];
    if (xa != xb) return xa < xb;
    return a < b;
  };
  SplitterSet bounds;
  bounds.region = m.alloc(z);
  for (std::size_t k = 0; k < z; ++k) bounds.keys.push_back(static_cast<Word>(n + k));
  m.poke(bounds.region, bounds.keys);
  const KeyOrder less = KeyOrder::of(by_x);
  auto grouped = m.alloc(n);
  const BucketedRun slabs =
      partition_level(m, cores, handles, bounds, grouped, PartitionTask{n, cores.count, less});

  // Per-slab binary search among the slab's ordered lines; every slab's
  // points go to its share of the cores, all in one round.
  std::vector<std::size_t> sizes(slabs.buckets());
  for (std::size_t s = 0; s < sizes.size(); ++s) sizes[s] = slabs.bucket_size(s);
  const auto groups = allocate_cores(cores, sizes);
  struct Task {
    std::size_t slab;
    Range span;
  };
  std::vector<std::vector<Task>> tasks(static_cast<std::size_t>(cores.count));
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    if (sizes[s] == 0) continue;
    const auto g = static_cast<std::size_t>(groups[s].count);
    for (std::size_t k = 0; k < g; ++k) {
      const Range piece = even_chunk(sizes[s], g, k);
      if (!piece.empty())
        tasks[static_cast<std::size_t>(groups[s].first - cores.first) + k].push_back({s, piece});
    }
  }
  m.round(cores, [&](int c) {
    for (const Task& t : tasks[static_cast<std::size_t>(c - cores.first)]) {
      const MemRegion slab = slabs.bucket(t.slab);
      for (std::size_t i = t.span.begin; i < t.span.end; ++i) {
        const auto h = static_cast<std::size_t>(m.read(c, slab[i]));
        const Point2& q = pts[h];
        std::size_t lo = 0, hi = L;
        while (lo < hi) {
          const std::size_t mid = (lo + hi) / 2;
          const auto line = static_cast<std::size_t>(m.read(c, arr.order_table[t.slab * L + mid]));
          m.work(c);
          if (arr.lines[line].at(q.x) < q.y)
            lo = mid + 1;
          else
            hi = mid;
        }
        m.write(c, result[h], static_cast<Word>(arr.region_id(t.slab, lo)));
      }
    }
  });
  return read_back(m, result);
}

std::vector<SectorInterval> find_sectors(Machine& m, CoreRange cores, std::span<const HalfPlane> planes,
                                         const HullChain& chain, const Point2& center) {
  const std::size_t n = planes.size();
  std::vector<SectorInterval> out(n);
  if (n == 0 || chain.size() == 0) return out;
  Scratch scratch(m);
  const DualFrame frame = choose_frame(center, chain.vertices);
  if (frame.rotated) m.add_diagnostic("dual frame rotated to avoid a vertical dual line");

  std::vector<Point2> duals(n);
  const auto p = static_cast<std::size_t>(cores.count);
  m.round(cores, [&](int c) {
    const Range r = even_chunk(n, p, static_cast<std::size_t>(c - cores.first));
    for (std::size_t i = r.begin; i < r.end; ++i) duals[i] = dual_point(planes[i], frame);
    m.work(c, r.size());
  });
  const auto lines = dualize_vertices(chain, frame);
  const SlabArrangement arr = preprocess_arrangement(m, cores, lines, chain.size());
  const auto ids = locate_points(m, cores, duals, arr);

  m.round(cores, [&](int c) {
    const Range r = even_chunk(n, p, static_cast<std::size_t>(c - cores.first));
    for (std::size_t i = r.begin; i < r.end; ++i) {
      const std::size_t id = ids[i];
      out[i].start = static_cast<std::size_t>(m.read(c, arr.region_table[2 * id]));
      out[i].count = static_cast<std::size_t>(m.read(c, arr.region_table[2 * id + 1]));
    }
  });
  return out;
}

}  // namespace pemlab
