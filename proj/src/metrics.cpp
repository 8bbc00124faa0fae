#include "mfpu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfpu/errors.hpp"

namespace mfpu {

namespace {

struct Census {
  std::size_t a = 0, b = 0, both = 0;
};

Census census(const GrayImage& a, const GrayImage& b) {
  require(a.width == b.width && a.height == b.height, "masks must have equal shapes");
  Census c;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.pixels[i] != 0, y = b.pixels[i] != 0;
    c.a += x;
    c.b += y;
    c.both += x && y;
  }
  return c;
}

double squared(const Point& p, const Point& q) {
  const double dx = p.x - q.x, dy = p.y - q.y;
  return dx * dx + dy * dy;
}

}  // namespace

double dice(const GrayImage& a, const GrayImage& b) {
  const Census c = census(a, b);
  if (c.a + c.b == 0) return 1.0;
  return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

double jaccard(const GrayImage& a, const GrayImage& b) {
  const Census c = census(a, b);
  const std::size_t uni = c.a + c.b - c.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.both) / static_cast<double>(uni);
}

Polygon sort_by_x(Polygon points) {
  std::sort(points.begin(), points.end(), [](const Point& p, const Point& q) { return p.x < q.x || (p.x == q.x && p.y < q.y); });
  return points;
}

double nearest_distance(const Point& p, const Polygon& sorted) {
  require(!sorted.empty(), "distance to an empty point set");
  const auto start = std::lower_bound(sorted.begin(), sorted.end(), p.x, [](const Point& q, double x) { return q.x < x; });
  double best = std::numeric_limits<double>::infinity();
  // Walk outward in x; stop once the x gap alone exceeds the best distance.
  for (auto it = start; it != sorted.end(); ++it) {
    const double dx = it->x - p.x;
    if (dx * dx > best) break;
    best = std::min(best, squared(p, *it));
  }
  for (auto it = start; it != sorted.begin();) {
    --it;
    const double dx = p.x - it->x;
    if (dx * dx > best) break;
    best = std::min(best, squared(p, *it));
  }
  return std::sqrt(best);
}

namespace {

double directed_max(const Polygon& from, const Polygon& to_sorted) {
  double worst = 0.0;
  for (const Point& p : from) worst = std::max(worst, nearest_distance(p, to_sorted));
  return worst;
}

}  // namespace

double hausdorff(const Polygon& a, const Polygon& b) {
  require(!a.empty() && !b.empty(), "Hausdorff distance needs non-empty point sets");
  return std::max(directed_max(a, sort_by_x(b)), directed_max(b, sort_by_x(a)));
}

double mad(const Polygon& a, const Polygon& b) {
  require(!a.empty() && !b.empty(), "mean absolute distance needs non-empty point sets");
  const Polygon sorted = sort_by_x(b);
  double total = 0.0;
  for (const Point& p : a) total += nearest_distance(p, sorted);
  return total / static_cast<double>(a.size());
}

}  // namespace mfpu
