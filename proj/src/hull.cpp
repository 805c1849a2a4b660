#include <algorithm>
#include <cmath>
#include <optional>

#include "hull_support.hpp"
#include "pemlab/hull.hpp"
#include "pemlab/keys.hpp"
#include "pemlab/partition.hpp"

namespace pemlab {

using namespace hull_detail;

SectorGroups expand_by_sector(Machine& m, CoreRange cores, std::span<const SectorInterval> intervals,
                              std::size_t sectors, double expansion_factor, const SortPlan& plan) {
  const std::size_t n = intervals.size();
  const std::size_t B = m.config().B;
  const auto p = static_cast<std::size_t>(cores.count);
  SectorGroups result;
  result.groups.assign(sectors, {});
  if (n == 0 || sectors == 0) {
    result.run.bounds.assign(sectors + 1, 0);
    return result;
  }

  auto counts = m.alloc(n), offsets = m.alloc(n);
  m.round(cores, [&](int c) {
    const Range r = block_chunk(counts, p, static_cast<std::size_t>(c - cores.first), B);
    for (std::size_t i = r.begin; i < r.end; ++i) m.write(c, counts[i], static_cast<Word>(intervals[i].count));
  });
  prefix_sum(m, cores, counts, offsets);
  m.solo(cores.first, [&](int c) { result.total = static_cast<std::size_t>(m.read(c, offsets[n - 1])); });
  if (static_cast<double>(result.total) > expansion_factor * static_cast<double>(n))
    m.add_diagnostic("sector expansion produced " + std::to_string(result.total) + " copies of " +
                     std::to_string(n) + " planes");
  result.run.bounds.assign(sectors + 1, 0);
  if (result.total == 0) return result;

  auto copies = m.alloc(result.total);
  m.round(cores, [&](int c) {
    const Range r = block_chunk(counts, p, static_cast<std::size_t>(c - cores.first), B);
    for (std::size_t i = r.begin; i < r.end; ++i) {
      const SectorInterval iv = intervals[i];
      if (iv.empty()) continue;
      auto at = static_cast<std::size_t>(m.read(c, offsets[i])) - iv.count;
      for (std::size_t k = 0; k < iv.count; ++k)
        m.write(c, copies[at++], keys::pack(static_cast<Word>((iv.start + k) % sectors), i));
    }
  });

  auto sorted = m.alloc(result.total);
  sort_handles(m, cores, copies, sorted, KeyOrder{}, plan);
  std::vector<Word> values(result.total);
  m.round(cores, [&](int c) {
    const Range r = block_chunk(sorted, p, static_cast<std::size_t>(c - cores.first), B);
    for (std::size_t i = r.begin; i < r.end; ++i) values[i] = m.read(c, sorted[i]);
  });
  for (Word v : values) result.groups[static_cast<std::size_t>(keys::key_of(v))].push_back(keys::index_of(v));
  for (std::size_t j = 0; j < sectors; ++j) result.run.bounds[j + 1] = result.run.bounds[j] + result.groups[j].size();
  result.run.data = sorted;
  return result;
}

double group_bound(std::size_t n, double epsilon) {
  const double nn = static_cast<double>(n);
  return 2.0 * std::pow(nn, 1.0 - epsilon) * std::max(1.0, std::log2(nn));
}

namespace {

std::vector<HalfPlane> pick(std::span<const HalfPlane> planes, std::span<const std::size_t> ids) {
  std::vector<HalfPlane> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(planes[i]);
  return out;
}

std::vector<std::size_t> draw(Machine& m, int core, MemRegion handles, std::size_t k, CounterRng& rng) {
  Scratch scratch(m);
  auto out = m.alloc(k);
  sample_k_of_n_seq(m, core, handles, k, rng, out);
  return read_back(m, out);
}

struct Candidate {
  std::vector<std::size_t> ids;
  HullChain chain;
};

struct Estimate {
  std::vector<double> total, max_group;
};

}  // namespace

PollResult polling_sample(Machine& m, CoreRange cores, std::span<const HalfPlane> planes, const Point2& interior,
                          const HullConfig& cfg, std::uint64_t seed, PollRecord* record) {
  const std::size_t n = planes.size();
  const auto p = static_cast<std::size_t>(cores.count);
  PollRecord rec;
  rec.n = n;
  rec.bound = group_bound(n, cfg.epsilon);
  const auto by_exponent = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), cfg.epsilon)));
  const std::size_t s = std::max(by_exponent, cfg.min_sample);

  auto finish = [&](Candidate c) {
    PollResult out{std::move(c.ids), std::move(c.chain), {}};
    out.sectors = sectors_around(interior, out.chain);
    if (record) *record = rec;
    return out;
  };

  if (s >= n) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    rec.candidates = 1;
    rec.sample_size = n;
    rec.rule = "whole";
    return finish({all, halfplane_brute(m, cores, planes, interior)});
  }

  Scratch scratch(m);
  auto handles = load_handles(m, n);
  const std::size_t count = std::max<std::size_t>(1, static_cast<std::size_t>(std::log2(static_cast<double>(n))));
  rec.candidates = count;
  rec.sample_size = s;

  std::vector<Candidate> cands(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int core = cores.first + static_cast<int>(i % p);
    CounterRng rng(seed, 2 * i + 1);
    auto& ids = cands[i].ids;
    for (int grow = 0;; ++grow) {
      const auto more = draw(m, core, handles, s, rng);
      ids.insert(ids.end(), more.begin(), more.end());
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      if (normals_span_plane(pick(planes, ids))) break;
      if (grow == 8) {
        ids.resize(n);
        for (std::size_t k = 0; k < n; ++k) ids[k] = k;
        break;
      }
    }
    cands[i].chain = halfplane_brute(m, cores, pick(planes, ids), interior);
  }
  if (count == 1) {
    rec.chosen = 0;
    rec.rule = "single";
    return finish(std::move(cands[0]));
  }

  const double lg = std::log2(static_cast<double>(n));
  const auto by_size = static_cast<std::size_t>(std::ceil(static_cast<double>(n) / (lg * lg * lg * lg)));
  const std::size_t poll = std::clamp(by_size, std::min(n, 64 * count), n);
  rec.poll_size = poll;

  auto estimate = [&](std::uint64_t poll_seed) {
    // Poll set, drawn in per-core shares and split at random among candidates.
    std::vector<std::size_t> polled, owner;
    std::vector<Range> share(p);
    for (std::size_t k = 0; k < p; ++k) {
      const Range r = even_chunk(poll, p, k);
      CounterRng rng(poll_seed, 2 * k);
      const auto got = draw(m, cores.first + static_cast<int>(k), handles, r.size(), rng);
      share[k] = {polled.size(), polled.size() + got.size()};
      polled.insert(polled.end(), got.begin(), got.end());
    }
    CounterRng splitter(poll_seed, 1);
    for (std::size_t i = 0; i < polled.size(); ++i) owner.push_back(splitter.below(count));

    std::vector<std::vector<std::size_t>> per_sector(count);
    std::vector<std::size_t> polled_by(count, 0), copies(count, 0);
    for (std::size_t i = 0; i < count; ++i) per_sector[i].assign(cands[i].chain.size(), 0);
    m.round(cores, [&](int c) {
      const Range r = share[static_cast<std::size_t>(c - cores.first)];
      for (std::size_t i = r.begin; i < r.end; ++i) {
        const std::size_t o = owner[i];
        const auto& chain = cands[o].chain;
        const SectorInterval iv = sectors_cut(planes[polled[i]], chain);
        m.work(c, 1 + chain.size());
        ++polled_by[o];
        copies[o] += iv.count;
        for (std::size_t k = 0; k < iv.count; ++k) ++per_sector[o][(iv.start + k) % chain.size()];
      }
    });
    m.solo(cores.first, [&](int c) { m.work(c, count * p); });
    Estimate e;
    for (std::size_t i = 0; i < count; ++i) {
      if (polled_by[i] == 0) {
        e.total.push_back(INFINITY);
        e.max_group.push_back(INFINITY);
        continue;
      }
      const double scale = static_cast<double>(n) / static_cast<double>(polled_by[i]);
      const auto top = *std::max_element(per_sector[i].begin(), per_sector[i].end());
      e.total.push_back(static_cast<double>(copies[i]) * scale);
      e.max_group.push_back(static_cast<double>(top) * scale);
    }
    return e;
  };
  auto best_within = [&](const Estimate& e) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < count; ++i)
      if (e.max_group[i] <= rec.bound && (!best || e.total[i] < e.total[*best])) best = i;
    return best;
  };

  Estimate est = estimate(CounterRng::mix(seed ^ 0x706f6c6cULL));
  auto chosen = best_within(est);
  rec.rule = "bound";
  if (!chosen) {
    est = estimate(CounterRng::mix(seed ^ 0x7265706fULL));
    chosen = best_within(est);
    rec.rule = "repoll";
  }
  if (!chosen) {
    rec.rule = "fallback";
    m.add_diagnostic("polling found no candidate within the group bound; using the smallest total");
    chosen = static_cast<std::size_t>(std::min_element(est.total.begin(), est.total.end()) - est.total.begin());
  }
  rec.chosen = *chosen;
  rec.estimated_total = est.total[*chosen];
  rec.estimated_max = est.max_group[*chosen];
  rec.candidate_totals = est.total;
  return finish(std::move(cands[*chosen]));
}

namespace {

// Distance parameter along apex + t * ray at which the ray leaves the plane;
// rays that never leave it have no finite reach.
struct Reach {
  bool finite = false;
  Rational t;

  friend bool operator==(const Reach& a, const Reach& b) { return a.finite == b.finite && (!a.finite || a.t == b.t); }
  // Farther from the apex.
  bool beyond(const Reach& o) const {
    if (!finite) return o.finite;
    return o.finite && t > o.t;
  }
};

Reach reach(const HalfPlane& h, const Point2& apex, const Point2& ray) {
  const Rational rate = h.a * ray.x + h.b * ray.y;
  if (sgn(rate) <= 0) return {};
  return {true, h.slack(apex) / rate};
}

// Dense rank of every plane's reach on one ray, 0 for the farthest. Planes
// that never leave through this ray are ordered among themselves by their
// reach on the other ray, nearest first, so none of them can dominate
// another: where two such lines cross inside the cone is unknown.
std::vector<std::size_t> reach_ranks(Machine& m, CoreRange cores, const std::vector<Reach>& r,
                                     const std::vector<Reach>& other, const SortPlan& plan) {
  const std::size_t g = r.size();
  const std::size_t B = m.config().B;
  Scratch scratch(m);
  auto handles = load_handles(m, g);
  auto sorted = m.alloc(g);
  auto farther = [&](std::size_t a, std::size_t b) {
    if (r[a].beyond(r[b])) return true;
    if (r[b].beyond(r[a]) || r[a].finite) return false;
    return other[b].beyond(other[a]);
  };
  auto far_first = [&](Word a, Word b) {
    const auto u = static_cast<std::size_t>(a), v = static_cast<std::size_t>(b);
    if (farther(u, v)) return true;
    if (farther(v, u)) return false;
    return a < b;
  };
  sort_handles(m, cores, handles, sorted, KeyOrder::of(far_first), plan);

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cores.count), g);
  const CoreRange group{cores.first, static_cast<int>(workers)};
  auto partials = m.alloc(workers * B);
  auto is_step = [&](int c, std::size_t i) {
    if (i == 0) return false;
    const auto a = static_cast<std::size_t>(m.read(c, sorted[i - 1]));
    const auto b = static_cast<std::size_t>(m.read(c, sorted[i]));
    m.work(c);
    return farther(a, b);
  };
  m.round(group, [&](int c) {
    const auto k = static_cast<std::size_t>(c - cores.first);
    const Range span = block_chunk(sorted, workers, k, B);
    Word steps = 0;
    for (std::size_t i = span.begin; i < span.end; ++i) steps += is_step(c, i) ? 1 : 0;
    m.write(c, partials[k * B], steps);
  });
  std::vector<std::size_t> base(workers, 0);
  m.solo(cores.first, [&](int c) {
    for (std::size_t k = 1; k < workers; ++k)
      base[k] = base[k - 1] + static_cast<std::size_t>(m.read(c, partials[(k - 1) * B]));
    m.work(c, workers);
  });
  std::vector<std::size_t> ranks(g);
  auto out = m.alloc(g);
  m.round(group, [&](int c) {
    const auto k = static_cast<std::size_t>(c - cores.first);
    const Range span = block_chunk(sorted, workers, k, B);
    std::size_t rank = base[k];
    for (std::size_t i = span.begin; i < span.end; ++i) {
      if (is_step(c, i)) ++rank;
      const auto h = static_cast<std::size_t>(m.read(c, sorted[i]));
      ranks[h] = rank;
      m.write(c, out[h], static_cast<Word>(rank));
    }
  });
  return ranks;
}

}  // namespace

std::vector<std::size_t> filter_sector(Machine& m, CoreRange cores, std::span<const HalfPlane> planes,
                                       std::span<const std::size_t> group, const Sector& sector,
                                       const SortPlan& plan, FilterStats* stats) {
  const std::size_t g = group.size();
  if (g == 0) return {};
  std::vector<Reach> lo(g), hi(g);
  const auto p = static_cast<std::size_t>(cores.count);
  std::size_t missed = 0;
  m.round(cores, [&](int c) {
    const Range r = even_chunk(g, p, static_cast<std::size_t>(c - cores.first));
    for (std::size_t i = r.begin; i < r.end; ++i) {
      const HalfPlane& h = planes[group[i]];
      lo[i] = reach(h, sector.apex, sector.ray_lo);
      hi[i] = reach(h, sector.apex, sector.ray_hi);
      if (!lo[i].finite || !hi[i].finite) ++missed;
    }
    m.work(c, 2 * r.size());
  });

  const auto rank_lo = reach_ranks(m, cores, lo, hi, plan);
  const auto rank_hi = reach_ranks(m, cores, hi, lo, plan);
  std::vector<Point2> tuples(g);
  for (std::size_t i = 0; i < g; ++i) tuples[i] = {Rational(static_cast<long>(rank_lo[i])), Rational(static_cast<long>(rank_hi[i]))};
  const auto kept = maxima_par(m, cores, tuples, plan);

  std::vector<std::size_t> out;
  out.reserve(kept.size());
  for (auto i : kept) out.push_back(group[i]);
  std::sort(out.begin(), out.end());
  if (stats) {
    stats->input += g;
    stats->survivors += out.size();
    stats->missed_rays += missed;
  }
  return out;
}

std::vector<std::vector<std::size_t>> filter_all(Machine& m, CoreRange cores, std::span<const HalfPlane> planes,
                                                 const std::vector<std::vector<std::size_t>>& groups,
                                                 std::span<const Sector> sectors, const SortPlan& plan,
                                                 FilterStats* stats) {
  std::vector<std::size_t> sizes;
  for (const auto& g : groups) sizes.push_back(g.size());
  const auto shares = allocate_cores(cores, sizes);
  std::vector<std::vector<std::size_t>> out(groups.size());
  for (std::size_t j = 0; j < groups.size(); ++j)
    if (!groups[j].empty()) out[j] = filter_sector(m, shares[j], planes, groups[j], sectors[j], plan, stats);
  return out;
}

namespace {

// A point strictly inside the sector cone and every given plane, on the
// bisecting direction, halfway to the nearest boundary along it.
Point2 sector_interior(const Sector& s, std::span<const HalfPlane> planes) {
  const Point2 w = s.ray_lo + s.ray_hi;
  Rational step = 1;
  for (const auto& h : planes) {
    const Rational rate = h.a * w.x + h.b * w.y;
    if (sgn(rate) > 0) step = std::min<Rational>(step, h.slack(s.apex) / rate);
  }
  step /= 2;
  return {s.apex.x + step * w.x, s.apex.y + step * w.y};
}

class HullSolver {
 public:
  HullSolver(Machine& m, const HullConfig& cfg, HullStats* stats, std::size_t root_n, int root_cores)
      : m_(m), cfg_(cfg), stats_(stats), root_n_(root_n), root_cores_(root_cores) {}

  std::vector<Point2> solve(CoreRange cores, const std::vector<HalfPlane>& planes, const Point2& interior,
                            int depth) {
    const std::size_t n = planes.size();
    if (stats_) stats_->max_depth = std::max(stats_->max_depth, depth);
    const std::size_t floor = std::max(root_n_ / static_cast<std::size_t>(root_cores_), cfg_.base_floor);
    if (n <= floor || cores.count == 1) return base(cores.first, planes, interior);

    Scratch scratch(m_);
    PollRecord poll_rec;
    const PollResult poll =
        polling_sample(m_, cores, planes, interior, cfg_, CounterRng::mix(cfg_.seed ^ CounterRng::mix(++draws_)),
                       &poll_rec);
    if (stats_) stats_->polls.push_back(poll_rec);
    const std::size_t sectors = poll.chain.size();

    const auto intervals = find_sectors(m_, cores, planes, poll.chain, interior);
    SectorGroups grouped = expand_by_sector(m_, cores, intervals, sectors, cfg_.expansion_factor, cfg_.sort);

    HullRound round{n, depth, sectors, grouped.total, 0, group_bound(n, cfg_.epsilon), 0};
    for (const auto& g : grouped.groups) round.max_group = std::max(round.max_group, g.size());

    // Each sector also gets its chord, which keeps the subproblem bounded.
    std::vector<HalfPlane> extended = planes;
    for (std::size_t j = 0; j < sectors; ++j) {
      extended.push_back(poll.sectors[j].chord_side());
      grouped.groups[j].push_back(n + j);
    }
    const auto survivors = filter_all(m_, cores, extended, grouped.groups, poll.sectors, cfg_.sort,
                                      stats_ ? &stats_->filter : nullptr);
    for (const auto& s : survivors) round.survivors += s.size();
    if (stats_) stats_->rounds.push_back(round);

    std::vector<std::vector<HalfPlane>> subs(sectors);
    std::vector<std::size_t> sizes(sectors);
    for (std::size_t j = 0; j < sectors; ++j) {
      subs[j] = pick(extended, survivors[j]);
      subs[j].push_back(poll.sectors[j].lo_side());
      subs[j].push_back(poll.sectors[j].hi_side());
      sizes[j] = subs[j].size();
    }
    const auto shares = allocate_cores(cores, sizes);
    std::vector<Point2> vertices;
    for (std::size_t j = 0; j < sectors; ++j) {
      const auto& sub = subs[j];
      const Point2 inside = sector_interior(poll.sectors[j], std::span(sub).first(sub.size() - 2));
      auto part = sub.size() >= n ? base(shares[j].first, sub, inside) : solve(shares[j], sub, inside, depth + 1);
      vertices.insert(vertices.end(), part.begin(), part.end());
    }

    HullChain stitched;
    m_.solo(cores.first, [&](int c) {
      m_.work(c, sort_work(vertices.size()));
      stitched = canonical_hull(std::move(vertices));
    });
    return std::move(stitched.vertices);
  }

 private:
  std::vector<Point2> base(int core, const std::vector<HalfPlane>& planes, const Point2& interior) {
    if (stats_) ++stats_->base_cases;
    Scratch scratch(m_);
    auto handles = load_handles(m_, planes.size());
    HullChain chain;
    m_.solo(core, [&](int c) {
      for (std::size_t i = 0; i < planes.size(); ++i) m_.read(c, handles[i]);
      m_.work(c, planes.size() + 2 * sort_work(planes.size()));
      chain = clip_intersection(planes, interior);
    });
    return std::move(chain.vertices);
  }

  Machine& m_;
  const HullConfig& cfg_;
  HullStats* stats_;
  std::size_t root_n_;
  int root_cores_;
  std::uint64_t draws_ = 0;
};

}  // namespace

HullChain hull_main(Machine& m, CoreRange cores, std::span<const HalfPlane> planes, const Point2& interior,
                    const HullConfig& cfg, HullStats* stats) {
  require_interior(planes, interior);
  if (!normals_span_plane(planes)) throw GeometryError("half-plane intersection is unbounded");
  const std::size_t n = planes.size();
  if (cfg.check_preconditions && n < m.config().M * static_cast<std::size_t>(cores.count))
    throw PreconditionError("hull_main needs n >= M*p");
  HullSolver solver(m, cfg, stats, n, cores.count);
  return canonical_hull(solver.solve(cores, std::vector<HalfPlane>(planes.begin(), planes.end()), interior, 0));
}

namespace {

// Hull vertices of one side (a point set containing both extremes) through
// polar duality about a point strictly inside the side's hull.
std::vector<Point2> side_vertices(Machine& m, CoreRange cores, std::span<const Point2> pts,
                                  const std::vector<std::size_t>& side, const Point2& L, const Point2& R,
                                  const HullConfig& cfg, HullStats* stats) {
  const std::size_t n = side.size();
  const std::size_t B = m.config().B;
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(cores.count), n));
  const CoreRange group{cores.first, static_cast<int>(workers)};

  Scratch scratch(m);
  auto handles = load_words(m, side);
  auto partials = m.alloc(workers * B);
  auto height = [&](Word h) -> Rational {
    Rational v = orient(L, R, pts[static_cast<std::size_t>(h)]);
    return abs(v);
  };
  auto taller = [&](Word a, Word b) {
    if (a < 0 || b < 0) return a < 0 ? b : a;
    const Rational ha = height(a), hb = height(b);
    return (hb > ha || (hb == ha && b < a)) ? b : a;
  };
  m.round(group, [&](int c) {
    const auto k = static_cast<std::size_t>(c - cores.first);
    const Range r = block_chunk(handles, workers, k, B);
    Word best = -1;
    for (std::size_t i = r.begin; i < r.end; ++i) {
      best = taller(best, m.read(c, handles[i]));
      m.work(c);
    }
    m.write(c, partials[k * B], best);
  });
  const Word apex = tree_reduce(m, group, partials, workers, taller);
  if (apex < 0 || sgn(height(apex)) == 0) return {L, R};

  const Point2& F = pts[static_cast<std::size_t>(apex)];
  const Point2 center{(L.x + R.x + F.x) / 3, (L.y + R.y + F.y) / 3};
  std::vector<HalfPlane> duals;
  duals.reserve(n);
  m.round(group, [&](int c) {
    const Range r = even_chunk(n, workers, static_cast<std::size_t>(c - cores.first));
    for (std::size_t i = r.begin; i < r.end; ++i) {
      const Point2 a = pts[side[i]] - center;
      if (sgn(a.x) != 0 || sgn(a.y) != 0) duals.push_back({a.x, a.y, 1 + dot(a, center)});
    }
    m.work(c, r.size());
  });
  const HullChain dual = hull_main(m, cores, duals, center, cfg, stats);

  std::vector<Point2> out;
  const std::size_t k = dual.size();
  m.solo(cores.first, [&](int c) {
    auto edge_line = [&](const Point2& w) {
      const Point2 a = w - center;
      return HalfPlane{a.x, a.y, 1 + dot(a, center)};
    };
    for (std::size_t i = 0; i < k; ++i) {
      auto v = boundary_intersection(edge_line(dual.vertices[i]), edge_line(dual.vertices[(i + 1) % k]));
      if (v) out.push_back(*v);
    }
    m.work(c, k);
  });
  return out;
}

}  // namespace

HullChain convex_hull_2d(Machine& m, CoreRange cores, std::span<const Point2> pts, const HullConfig& cfg,
                         HullStats* stats) {
  if (pts.empty()) return {};
  const UpperLower split = split_upper_lower(m, cores, pts);
  const Point2& L = pts[split.left];
  const Point2& R = pts[split.right];
  if (L == R) return {{L}};

  auto upper = side_vertices(m, cores, pts, split.upper, L, R, cfg, stats);
  std::vector<std::size_t> lower_side = split.lower;
  lower_side.push_back(split.left);
  lower_side.push_back(split.right);
  auto lower = side_vertices(m, cores, pts, lower_side, L, R, cfg, stats);

  upper.insert(upper.end(), lower.begin(), lower.end());
  HullChain out;
  m.solo(cores.first, [&](int c) {
    m.work(c, sort_work(upper.size()));
    out = canonical_hull(std::move(upper));
  });
  return out;
}

}  // namespace pemlab
