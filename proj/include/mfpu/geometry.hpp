#pragma once

// Planar geometry on pixel coordinates (x right, y down, pixel centres at
// integers). "Counterclockwise" means positive shoelace area in raw (x, y),
// which appears clockwise on screen.

#include <array>
#include <cstddef>
#include <vector>

#include "mfpu/image.hpp"

namespace mfpu {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

using Polygon = std::vector<Point>;
using Triangle = std::array<Point, 3>;

double cross(const Point& o, const Point& a, const Point& b);
double distance(const Point& a, const Point& b);
double signed_area(const Polygon& polygon);
double triangle_area(const Triangle& t);
// Inside or on the boundary, with an absolute tolerance on edge distance.
bool triangle_contains(const Triangle& t, const Point& p, double tolerance = 1e-9);

struct Contour {
  Polygon points;            // closed implicitly, first point not repeated
  bool multiple_components = false;
};

// Moore-neighbour trace of the largest 4-connected foreground component,
// started at its first pixel in raster order. Throws MeasurementError on an
// empty mask.
Contour extract_contour(const GrayImage& mask);

// Andrew's monotone chain. Counterclockwise, collinear points dropped.
// Throws MeasurementError when fewer than three non-collinear points exist.
Polygon convex_hull(const Polygon& points);

// Minimum-area triangle enclosing a convex counterclockwise polygon. Every
// candidate has two sides flush with polygon edges and a third side either
// flush or touching the polygon at its own midpoint.
Triangle min_enclosing_triangle(const Polygon& hull);

struct Landmarks {
  Point annulus_a;
  Point annulus_b;
  Point apex;
  std::array<std::size_t, 3> contour_index{};  // annulus_a, annulus_b, apex
};

// Nearest contour point to each triangle vertex (lowest index on ties); the
// apex is the one farthest from the line through the other two.
Landmarks lv_landmarks(const Polygon& contour, const Triangle& triangle);

}  // namespace mfpu
