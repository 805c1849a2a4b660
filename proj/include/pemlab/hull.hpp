#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pemlab/geometry.hpp"
#include "pemlab/machine.hpp"
#include "pemlab/merge.hpp"
#include "pemlab/sort.hpp"

namespace pemlab {

// Geometric records live on the host; simulated memory carries one-word
// handles (indices into the host arrays). Every predicate or constructor
// evaluated on a record is charged one operation to the evaluating core.

// ---------------------------------------------------------------- maxima

// Points not dominated by another point with different coordinates, where q
// dominates p when q.x >= p.x and q.y >= p.y. Coincident points do not
// dominate each other. Result: indices in decreasing x (then decreasing y).
std::vector<std::size_t> maxima_seq(Machine& m, int core, std::span<const Point2> pts);
std::vector<std::size_t> maxima_par(Machine& m, CoreRange cores, std::span<const Point2> pts,
                                    const SortPlan& plan = {});

// The line through the lexicographically smallest and largest points splits
// the set. Points on or above the line (the two extremes included) are
// upper, points strictly below are lower. Indices keep input order.
struct UpperLower {
  std::vector<std::size_t> upper, lower;
  std::size_t left = 0, right = 0;
};
UpperLower split_upper_lower(Machine& m, CoreRange cores, std::span<const Point2> pts);

// ------------------------------------------------------ brute intersection

// All-pairs vertex enumeration. Throws GeometryError when the interior is
// not strictly feasible or the intersection is unbounded.
HullChain halfplane_brute(Machine& m, CoreRange cores, std::span<const HalfPlane> planes,
                          const Point2& interior);

// ----------------------------------------------------------------- sectors

// Cone at `apex` between the rays apex + t*ray_lo and apex + t*ray_hi
// (t >= 0), with ray_hi strictly counterclockwise of ray_lo by less than pi.
struct Sector {
  Point2 apex;
  Point2 ray_lo, ray_hi;
  std::size_t index = 0;

  // Half-planes bounding the cone, and the chord between the two ray points
  // apex + ray_lo and apex + ray_hi (apex side).
  HalfPlane lo_side() const;
  HalfPlane hi_side() const;
  HalfPlane chord_side() const;
};

// Sector k runs from vertex k to vertex k + 1 of the chain.
std::vector<Sector> sectors_around(const Point2& apex, const HullChain& chain);

// Cyclic run of `count` sectors starting at `start`.
struct SectorInterval {
  std::size_t start = 0;
  std::size_t count = 0;

  bool empty() const { return count == 0; }
  bool covers(std::size_t sector, std::size_t total) const {
    return count != 0 && (sector + total - start) % total < count;
  }
  friend bool operator==(const SectorInterval&, const SectorInterval&) = default;
};

// Smallest cyclic interval covering every marked sector.
SectorInterval covering_interval(const std::vector<char>& marked);

// Sectors whose cone, clipped by the chord, the plane's boundary cuts: the
// neighbours of every chain vertex strictly outside the plane. Host-side
// reference for tests and estimates.
SectorInterval sectors_cut(const HalfPlane& h, const HullChain& chain);

// ----------------------------------------------------------------- duality

// Dual line y = slope * x + intercept. A dual point on the `outside_above`
// side of the line (above when set) is a plane that excludes the vertex.
struct Line2 {
  Rational slope, intercept;
  bool outside_above = true;

  Rational at(const Rational& x) const { return slope * x + intercept; }
  friend bool operator==(const Line2&, const Line2&) = default;
};

// Translation to `center` followed by a rotation with rational cosine and
// sine; the rotation is chosen so no dualized vertex gives a vertical line.
struct DualFrame {
  Point2 center;
  Rational cos = 1, sin = 0;
  bool rotated = false;

  Point2 to_local(const Point2& p) const;
  Point2 to_global(const Point2& q) const;
};

DualFrame choose_frame(const Point2& center, std::span<const Point2> vertices);

// Plane a.x <= c with the center strictly inside maps to the point n / c'
// in the frame, where n and c' are the plane's local normal and offset.
Point2 dual_point(const HalfPlane& h, const DualFrame& f);
HalfPlane plane_from_dual(const Point2& q, const DualFrame& f);
Line2 dual_line(const Point2& vertex, const DualFrame& f);
Point2 vertex_from_dual(const Line2& l, const DualFrame& f);

std::vector<Point2> dualize(std::span<const HalfPlane> planes, const DualFrame& f);
std::vector<Line2> dualize_vertices(const HullChain& chain, const DualFrame& f);

// ------------------------------------------------------------- arrangement

struct SlabArrangement {
  std::vector<Line2> lines;
  std::size_t sectors = 0;
  std::vector<Rational> slab_xs;                // sorted distinct crossing x's
  std::vector<std::vector<std::uint32_t>> order;  // per slab, bottom to top
  std::vector<SectorInterval> regions;          // slab * (lines + 1) + rank
  MemRegion order_table;                        // order, flattened
  MemRegion region_table;                       // start, count per region

  std::size_t slab_count() const { return slab_xs.size() + 1; }
  std::size_t regions_per_slab() const { return lines.size() + 1; }
  std::size_t region_id(std::size_t slab, std::size_t rank) const { return slab * regions_per_slab() + rank; }
  // Host lookup: slab by x (a point on a slab boundary belongs to the slab on
  // its left), then the number of lines strictly below the point.
  std::size_t locate(const Point2& q) const;
};

// Line k stands for chain vertex k, which borders sectors k - 1 and k.
SlabArrangement preprocess_arrangement(Machine& m, CoreRange cores, std::span<const Line2> lines,
                                       std::size_t sectors);

std::vector<std::size_t> locate_points(Machine& m, CoreRange cores, std::span<const Point2> pts,
                                       const SlabArrangement& arr);

std::vector<SectorInterval> find_sectors(Machine& m, CoreRange cores, std::span<const HalfPlane> planes,
                                         const HullChain& chain, const Point2& center);

// ---------------------------------------------------------------- grouping

// Plane copies grouped by sector; group j holds the plane indices whose
// interval covers j, in increasing index order.
struct SectorGroups {
  BucketedRun run;
  std::vector<std::vector<std::size_t>> groups;
  std::size_t total = 0;
};

SectorGroups expand_by_sector(Machine& m, CoreRange cores, std::span<const SectorInterval> intervals,
                              std::size_t sectors, double expansion_factor = 4.0, const SortPlan& plan = {});

// --------------------------------------------------------------- polling

struct HullConfig {
  double epsilon = 1.0 / 32;
  double expansion_factor = 4.0;  // allowed copies per plane after expansion
  std::size_t min_sample = 8;     // floor on the n^epsilon sample size
  std::size_t base_floor = 32;    // subproblems this small are solved sequentially
  std::uint64_t seed = 1;
  bool check_preconditions = false;
  SortPlan sort{.check_preconditions = false};
};

struct PollRecord {
  std::size_t n = 0;
  std::size_t candidates = 0;
  std::size_t sample_size = 0;
  std::size_t poll_size = 0;
  std::size_t chosen = 0;
  std::string rule;  // "bound", "repoll" or "fallback"
  double estimated_total = 0;
  double estimated_max = 0;
  double bound = 0;
  std::vector<double> candidate_totals;
};

struct PollResult {
  std::vector<std::size_t> sample;
  HullChain chain;
  std::vector<Sector> sectors;
};

// 2 n^(1 - epsilon) log2 n.
double group_bound(std::size_t n, double epsilon);

PollResult polling_sample(Machine& m, CoreRange cores, std::span<const HalfPlane> planes, const Point2& interior,
                          const HullConfig& cfg, std::uint64_t seed, PollRecord* record = nullptr);

// -------------------------------------------------------------- filtering

struct FilterStats {
  std::size_t input = 0;
  std::size_t survivors = 0;
  std::size_t missed_rays = 0;  // planes whose boundary misses one bounding ray
};

// Survivors of rank dominance inside the sector cone, as indices into
// `planes`, in increasing order.
std::vector<std::size_t> filter_sector(Machine& m, CoreRange cores, std::span<const HalfPlane> planes,
                                       std::span<const std::size_t> group, const Sector& sector,
                                       const SortPlan& plan = {}, FilterStats* stats = nullptr);

std::vector<std::vector<std::size_t>> filter_all(Machine& m, CoreRange cores, std::span<const HalfPlane> planes,
                                                 const std::vector<std::vector<std::size_t>>& groups,
                                                 std::span<const Sector> sectors, const SortPlan& plan = {},
                                                 FilterStats* stats = nullptr);

// ------------------------------------------------------------ main driver

struct HullRound {
  std::size_t n = 0;
  int depth = 0;
  std::size_t sectors = 0;
  std::size_t expanded = 0;
  std::size_t max_group = 0;
  double bound = 0;
  std::size_t survivors = 0;
};

struct HullStats {
  std::vector<PollRecord> polls;
  std::vector<HullRound> rounds;
  FilterStats filter;
  std::size_t base_cases = 0;
  int max_depth = 0;
};

HullChain hull_main(Machine& m, CoreRange cores, std::span<const HalfPlane> planes, const Point2& interior,
                    const HullConfig& cfg = {}, HullStats* stats = nullptr);

// Convex hull through duality. Fewer than three affinely independent points
// give a chain of one or two vertices.
HullChain convex_hull_2d(Machine& m, CoreRange cores, std::span<const Point2> pts, const HullConfig& cfg = {},
                         HullStats* stats = nullptr);

}  // namespace pemlab
