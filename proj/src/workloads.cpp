#include "pemlab/workloads.hpp"

#include "pemlab/rng.hpp"

namespace pemlab::workloads {

namespace {

Rational uniform_rational(CounterRng& rng, long lo, long hi, long den) {
  const auto span = static_cast<std::uint64_t>((hi - lo) * den);
  Rational r{mpz_class(static_cast<long>(rng.below(span + 1)) + lo * den), mpz_class(den)};
  r.canonicalize();
  return r;
}

}  // namespace

std::vector<Word> random_keys(std::size_t n, std::uint64_t seed, std::uint64_t range) {
  if (range == 0) range = std::max<std::uint64_t>(1, n / 4);
  CounterRng rng(seed, 11);
  std::vector<Word> keys(n);
  for (auto& k : keys) k = static_cast<Word>(rng.below(range));
  return keys;
}

std::vector<HalfPlane> tangent_planes(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed, 13);
  for (;;) {
    std::vector<HalfPlane> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      // (1 - t^2, 2t) / (1 + t^2) is a rational point on the unit circle.
      const Rational t = uniform_rational(rng, -4, 4, 4093);
      const Rational d = 1 + t * t;
      const Rational flip = rng.below(2) ? 1 : -1;
      out.push_back({flip * (1 - t * t) / d, 2 * t / d, uniform_rational(rng, 1, 2, 256)});
    }
    if (normals_span_plane(out)) return out;
  }
}

std::vector<Point2> random_points(std::size_t n, std::uint64_t seed, long range) {
  CounterRng rng(seed, 17);
  const auto width = static_cast<std::uint64_t>(2 * range + 1);
  std::vector<Point2> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const long x = static_cast<long>(rng.below(width)) - range;
    const long y = static_cast<long>(rng.below(width)) - range;
    out.push_back({Rational(x), Rational(y)});
  }
  return out;
}

}  // namespace pemlab::workloads
