#pragma once

// Overlap and contour-distance agreement between two segmentations.

#include "mfpu/geometry.hpp"
#include "mfpu/image.hpp"

namespace mfpu {

// 2|A n B| / (|A| + |B|); 1 when both masks are empty.
double dice(const GrayImage& a, const GrayImage& b);
// |A n B| / |A u B|; 1 when both masks are empty.
double jaccard(const GrayImage& a, const GrayImage& b);

// Symmetric Hausdorff distance between non-empty point sets.
double hausdorff(const Polygon& a, const Polygon& b);
// Mean over a of the distance to the nearest point of b (not symmetric).
double mad(const Polygon& a, const Polygon& b);

// Nearest-neighbour distance from p to the set, exact; `sorted` must be
// ordered by x (see sort_by_x).
double nearest_distance(const Point& p, const Polygon& sorted);
Polygon sort_by_x(Polygon points);

}  // namespace mfpu
