#pragma once

#include <gmpxx.h>

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pemlab {

using Rational = mpq_class;

struct Point2 {
  Rational x, y;

  friend bool operator==(const Point2& a, const Point2& b) { return a.x == b.x && a.y == b.y; }
  friend bool operator<(const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }
  Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
  Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
};

// The constraint a*x + b*y <= c.
struct HalfPlane {
  Rational a, b, c;

  Rational slack(const Point2& p) const { return c - a * p.x - b * p.y; }
  bool contains(const Point2& p) const { return sgn(slack(p)) >= 0; }
  bool strictly_contains(const Point2& p) const { return sgn(slack(p)) > 0; }
};

// Counterclockwise vertex cycle starting at the lexicographically smallest
// vertex, with no repeated or collinear vertices.
struct HullChain {
  std::vector<Point2> vertices;

  std::size_t size() const { return vertices.size(); }
  friend bool operator==(const HullChain&, const HullChain&) = default;
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Rational dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
inline Rational cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
// Twice the signed area of (o, a, b); positive for a left turn.
inline Rational orient(const Point2& o, const Point2& a, const Point2& b) { return cross(a - o, b - o); }

std::optional<Point2> boundary_intersection(const HalfPlane& h, const HalfPlane& g);

// Boundary direction with the feasible side on its left.
inline Point2 boundary_direction(const HalfPlane& h) { return {-h.b, h.a}; }

// Total order on directions by angle in [0, 2*pi) from the positive x axis.
bool angle_less(const Point2& u, const Point2& v);

// Canonical strictly convex hull of a point set (monotone chain).
HullChain canonical_hull(std::vector<Point2> pts);

// True when the normals positively span the plane, i.e. every intersection
// with a nonempty interior is bounded.
bool normals_span_plane(std::span<const HalfPlane> planes);

// Sequential intersection by angle sort and a deque sweep. Requires a
// bounded intersection; `interior` must be strictly inside every plane.
HullChain clip_intersection(std::span<const HalfPlane> planes, const Point2& interior);

// Throws GeometryError unless the point is strictly inside every plane.
void require_interior(std::span<const HalfPlane> planes, const Point2& interior);

// Text formats: points "x y", half-planes "a b c" (a*x + b*y <= c), one per
// line; numbers are integers, fractions p/q or decimals. '#' starts a comment.
Rational parse_rational(const std::string& token);
std::vector<Point2> read_points(std::istream& in);
std::vector<HalfPlane> read_planes(std::istream& in);
void write_chain(std::ostream& out, const HullChain& chain);

}  // namespace pemlab
