#include "pemlab/geometry.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>

namespace pemlab {

std::optional<Point2> boundary_intersection(const HalfPlane& h, const HalfPlane& g) {
  const Rational det = h.a * g.b - h.b * g.a;
  if (sgn(det) == 0) return std::nullopt;
  return Point2{(h.c * g.b - h.b * g.c) / det, (h.a * g.c - h.c * g.a) / det};
}

namespace {

int half_of(const Point2& d) { return (sgn(d.y) > 0 || (sgn(d.y) == 0 && sgn(d.x) > 0)) ? 0 : 1; }

}  // namespace

bool angle_less(const Point2& u, const Point2& v) {
  const int hu = half_of(u), hv = half_of(v);
  if (hu != hv) return hu < hv;
  return sgn(cross(u, v)) > 0;
}

HullChain canonical_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return {pts};
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && sgn(orient(hull[k - 2], hull[k - 1], p)) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && sgn(orient(hull[k - 2], hull[k - 1], pts[i])) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return {hull};
}

bool normals_span_plane(std::span<const HalfPlane> planes) {
  std::vector<Point2> normals;
  normals.reserve(planes.size());
  for (const auto& h : planes) normals.push_back({h.a, h.b});
  std::sort(normals.begin(), normals.end(), angle_less);
  auto same_direction = [](const Point2& u, const Point2& v) { return sgn(cross(u, v)) == 0 && sgn(dot(u, v)) > 0; };
  normals.erase(std::unique(normals.begin(), normals.end(), same_direction), normals.end());
  if (normals.size() > 1 && same_direction(normals.front(), normals.back())) normals.pop_back();
  if (normals.size() < 3) return false;
  // Every counterclockwise gap between consecutive normals must be below pi.
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (sgn(cross(normals[i], normals[(i + 1) % normals.size()])) <= 0) return false;
  }
  return true;
}

void require_interior(std::span<const HalfPlane> planes, const Point2& interior) {
  for (const auto& h : planes) {
    if (sgn(h.a) == 0 && sgn(h.b) == 0) throw GeometryError("half-plane with zero normal");
    if (!h.strictly_contains(interior)) throw GeometryError("interior point is not strictly inside every half-plane");
  }
}

HullChain clip_intersection(std::span<const HalfPlane> planes, const Point2& interior) {
  require_interior(planes, interior);
  if (!normals_span_plane(planes)) throw GeometryError("half-plane intersection is unbounded");

  std::vector<const HalfPlane*> order;
  order.reserve(planes.size());
  for (const auto& h : planes) order.push_back(&h);
  std::sort(order.begin(), order.end(), [](const HalfPlane* l, const HalfPlane* r) {
    return angle_less(boundary_direction(*l), boundary_direction(*r));
  });
  // Among planes with the same direction only the tightest matters.
  std::vector<const HalfPlane*> unique;
  for (const auto* h : order) {
    if (!unique.empty()) {
      const Point2 du = boundary_direction(*unique.back()), dh = boundary_direction(*h);
      if (!angle_less(du, dh) && !angle_less(dh, du)) {
        // Same direction: keep the boundary nearer the interior, comparing
        // squared distances slack^2 / |normal|^2.
        const Rational su = unique.back()->slack(interior), sh = h->slack(interior);
        if (sh * sh * dot(du, du) < su * su * dot(dh, dh)) unique.back() = h;
        continue;
      }
    }
    unique.push_back(h);
  }

  auto corner = [](const HalfPlane* l, const HalfPlane* r) {
    auto p = boundary_intersection(*l, *r);
    if (!p) throw GeometryError("parallel boundaries met in the sweep");
    return *p;
  };
  std::deque<const HalfPlane*> dq;
  for (const auto* h : unique) {
    while (dq.size() >= 2 && !h->strictly_contains(corner(dq[dq.size() - 2], dq.back()))) dq.pop_back();
    while (dq.size() >= 2 && !h->strictly_contains(corner(dq[0], dq[1]))) dq.pop_front();
    dq.push_back(h);
  }
  while (dq.size() >= 3 && !dq.front()->strictly_contains(corner(dq[dq.size() - 2], dq.back()))) dq.pop_back();
  while (dq.size() >= 3 && !dq.back()->strictly_contains(corner(dq[0], dq[1]))) dq.pop_front();
  if (dq.size() < 3) throw GeometryError("degenerate half-plane intersection");

  std::vector<Point2> vertices;
  for (std::size_t i = 0; i < dq.size(); ++i) vertices.push_back(corner(dq[i], dq[(i + 1) % dq.size()]));
  return canonical_hull(std::move(vertices));
}

Rational parse_rational(const std::string& token) {
  if (token.empty()) throw GeometryError("empty number");
  const auto dot_at = token.find('.');
  if (dot_at == std::string::npos) {
    Rational r;
    if (r.set_str(token, 10) != 0) throw GeometryError("bad number: " + token);
    r.canonicalize();
    if (sgn(r.get_den()) == 0) throw GeometryError("zero denominator: " + token);
    return r;
  }
  std::string digits = token.substr(0, dot_at) + token.substr(dot_at + 1);
  const std::size_t scale = token.size() - dot_at - 1;
  if (digits.empty() || digits == "-" || digits == "+") throw GeometryError("bad number: " + token);
  if (digits[0] == '+') digits.erase(0, 1);
  mpz_class num;
  if (num.set_str(digits, 10) != 0) throw GeometryError("bad number: " + token);
  mpz_class den;
  mpz_ui_pow_ui(den.get_mpz_t(), 10, scale);
  Rational r(num, den);
  r.canonicalize();
  return r;
}

namespace {

std::vector<std::vector<Rational>> read_rows(std::istream& in, std::size_t width) {
  std::vector<std::vector<Rational>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<Rational> row;
    for (std::string tok; fields >> tok;) row.push_back(parse_rational(tok));
    if (row.empty()) continue;
    if (row.size() != width)
      throw GeometryError("line " + std::to_string(lineno) + ": expected " + std::to_string(width) + " numbers");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<Point2> read_points(std::istream& in) {
  std::vector<Point2> out;
  for (auto& r : read_rows(in, 2)) out.push_back({r[0], r[1]});
  return out;
}

std::vector<HalfPlane> read_planes(std::istream& in) {
  std::vector<HalfPlane> out;
  for (auto& r : read_rows(in, 3)) {
    if (sgn(r[0]) == 0 && sgn(r[1]) == 0) throw GeometryError("half-plane with zero normal");
    out.push_back({r[0], r[1], r[2]});
  }
  return out;
}

void write_chain(std::ostream& out, const HullChain& chain) {
  for (const auto& v : chain.vertices) out << v.x.get_str() << ' ' << v.y.get_str() << '\n';
}

}  // namespace pemlab
