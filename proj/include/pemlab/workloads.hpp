#pragma once

#include <cstdint>
#include <vector>

#include "pemlab/geometry.hpp"
#include "pemlab/machine.hpp"

namespace pemlab::workloads {

// Keys in [0, range); range = 0 picks n / 4, so duplicates are common.
std::vector<Word> random_keys(std::size_t n, std::uint64_t seed, std::uint64_t range = 0);

// Half-planes tangent to a ring around the origin: rational unit normals and
// offsets in [1, 2]. The origin is strictly inside and the intersection is
// bounded (regenerated until it is).
std::vector<HalfPlane> tangent_planes(std::size_t n, std::uint64_t seed);

// Integer points in the square [-range, range]^2.
std::vector<Point2> random_points(std::size_t n, std::uint64_t seed, long range = 1000);

}  // namespace pemlab::workloads
