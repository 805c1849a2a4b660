#include <algorithm>
#include <optional>

#include "hull_support.hpp"
#include "pemlab/hull.hpp"

namespace pemlab {

using namespace hull_detail;

namespace {

// Constraint "cross(dir, x - origin) >= 0": x lies left of the directed line.
HalfPlane left_of(const Point2& origin, const Point2& dir) {
  return {dir.y, -dir.x, dir.y * origin.x - dir.x * origin.y};
}

}  // namespace

HalfPlane Sector::lo_side() const { return left_of(apex, ray_lo); }

HalfPlane Sector::hi_side() const {
  const Point2 back{-ray_hi.x, -ray_hi.y};
  return left_of(apex, back);
}

HalfPlane Sector::chord_side() const { return left_of(apex + ray_lo, ray_hi - ray_lo); }

std::vector<Sector> sectors_around(const Point2& apex, const HullChain& chain) {
  const std::size_t m = chain.size();
  std::vector<Sector> out;
  out.reserve(m);
  for (std::size_t k = 0; k < m; ++k)
    out.push_back({apex, chain.vertices[k] - apex, chain.vertices[(k + 1) % m] - apex, k});
  return out;
}

SectorInterval covering_interval(const std::vector<char>& marked) {
  const std::size_t m = marked.size();
  const auto hits = static_cast<std::size_t>(std::count(marked.begin(), marked.end(), char{1}));
  if (hits == 0) return {};
  if (hits == m) return {0, m};
  // The interval is the complement of the longest cyclic run of unmarked
  // sectors (the first such run on ties).
  std::size_t best_len = 0, best_end = 0;
  const std::size_t first_hit =
      static_cast<std::size_t>(std::find(marked.begin(), marked.end(), char{1}) - marked.begin());
  std::size_t run = 0;
  for (std::size_t step = 1; step <= m; ++step) {
    const std::size_t k = (first_hit + step) % m;
    if (!marked[k]) {
      ++run;
      continue;
    }
    if (run > best_len) {
      best_len = run;
      best_end = k;
    }
    run = 0;
  }
  return {best_end, m - best_len};
}

SectorInterval sectors_cut(const HalfPlane& h, const HullChain& chain) {
  const std::size_t m = chain.size();
  std::vector<char> marked(m, 0);
  for (std::size_t k = 0; k < m; ++k) {
    if (sgn(h.slack(chain.vertices[k])) < 0) {
      marked[k] = 1;
      marked[(k + m - 1) % m] = 1;
    }
  }
  return covering_interval(marked);
}

HullChain halfplane_brute(Machine& m, CoreRange cores, std::span<const HalfPlane> planes,
                          const Point2& interior) {
  require_interior(planes, interior);
  if (!normals_span_plane(planes)) throw GeometryError("half-plane intersection is unbounded");
  const std::size_t n = planes.size();
  const std::size_t pairs = n * (n - 1) / 2;

  Scratch scratch(m);
  const std::size_t B = m.config().B;
  auto handles = load_handles(m, n);
  auto feasible = m.alloc(pairs);
  std::vector<std::optional<Point2>> corners(pairs);

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cores.count), pairs);
  m.round(CoreRange{cores.first, static_cast<int>(workers)}, [&](int c) {
    const Range r = block_chunk(feasible, workers, static_cast<std::size_t>(c - cores.first), B);
    if (r.empty()) return;
    // Row-major position of the chunk's first pair.
    std::size_t i = 0, j = 1, e = 0;
    while (e + (n - 1 - i) <= r.begin) e += n - 1 - i++;
    j = i + 1 + (r.begin - e);
    for (std::size_t at = r.begin; at < r.end; ++at) {
      m.work(c);
      auto pt = boundary_intersection(planes[i], planes[j]);
      bool ok = pt.has_value();
      for (std::size_t t = 0; ok && t < n; ++t) {
        const auto h = static_cast<std::size_t>(m.read(c, handles[t]));
        m.work(c);
        ok = planes[h].contains(*pt);
      }
      m.write(c, feasible[at], ok ? 1 : 0);
      if (ok) corners[at] = std::move(pt);
      if (++j == n) {
        ++i;
        j = i + 1;
      }
    }
  });

  std::vector<Point2> vertices;
  m.solo(cores.first, [&](int c) {
    for (std::size_t at = 0; at < pairs; ++at)
      if (m.read(c, feasible[at]) != 0) vertices.push_back(*corners[at]);
    m.work(c, sort_work(vertices.size()));
  });
  return canonical_hull(std::move(vertices));
}

}  // namespace pemlab
