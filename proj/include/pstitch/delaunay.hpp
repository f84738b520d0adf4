#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "pstitch/corrio.hpp"

namespace pstitch {

struct Triangulation {
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise in y-up terms
  std::vector<std::pair<int, int>> edges;     // (u, v) with u < v, sorted
};

// > 0 when c lies to the left of a->b.
double orient2d(const Vec2& a, const Vec2& b, const Vec2& c);
// > 0 when d lies strictly inside the circumcircle of the positively oriented
// triangle (a, b, c).
double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

/// Delaunay triangulation by lexicographic incremental insertion with edge
/// flips. Cocircular configurations are never flipped, so the result depends
/// only on the input order. Throws DegenerateGeometry for fewer than three
/// points, coincident points or an all-collinear input.
Triangulation delaunay(std::span<const Vec2> pts);

}  // namespace pstitch
