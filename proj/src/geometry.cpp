#include "mfpu/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>

#include "mfpu/errors.hpp"

namespace mfpu {

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double signed_area(const Polygon& polygon) {
  double twice = 0.0;
  for (std::size_t i = 0, n = polygon.size(); i < n; ++i) {
    const Point& p = polygon[i];
    const Point& q = polygon[(i + 1) % n];
    twice += p.x * q.y - q.x * p.y;
  }
  return twice / 2.0;
}

double triangle_area(const Triangle& t) { return std::abs(cross(t[0], t[1], t[2])) / 2.0; }

bool triangle_contains(const Triangle& t, const Point& p, double tolerance) {
  const double orientation = cross(t[0], t[1], t[2]) >= 0 ? 1.0 : -1.0;
  for (int i = 0; i < 3; ++i) {
    const Point& a = t[i];
    const Point& b = t[(i + 1) % 3];
    const double len = distance(a, b);
    if (len == 0.0) continue;
    if (orientation * cross(a, b, p) / len < -tolerance) return false;
  }
  return true;
}

// ---------------------------------------------------------------- contour

namespace {

constexpr int kDx[8] = {-1, -1, 0, 1, 1, 1, 0, -1};  // W NW N NE E SE S SW
constexpr int kDy[8] = {0, -1, -1, -1, 0, 1, 1, 1};

int direction_of(int dx, int dy) {
  for (int d = 0; d < 8; ++d)
    if (kDx[d] == dx && kDy[d] == dy) return d;
  return -1;
}

// Labels of the largest 4-connected component (first in raster order on ties).
std::vector<std::uint8_t> largest_component(const GrayImage& mask, std::size_t& components) {
  const std::size_t w = mask.width, h = mask.height;
  std::vector<int> label(mask.size(), -1);
  std::vector<std::size_t> sizes;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask.pixels[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    std::size_t size = 0;
    std::queue<std::size_t> queue;
    queue.push(start);
    label[start] = id;
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop();
      ++size;
      const std::size_t x = i % w, y = i / w;
      const auto visit = [&](std::size_t j) {
        if (mask.pixels[j] && label[j] < 0) {
          label[j] = id;
          queue.push(j);
        }
      };
      if (x > 0) visit(i - 1);
      if (x + 1 < w) visit(i + 1);
      if (y > 0) visit(i - w);
      if (y + 1 < h) visit(i + w);
    }
    sizes.push_back(size);
  }
  components = sizes.size();
  std::vector<std::uint8_t> keep(mask.size(), 0);
  if (sizes.empty()) return keep;
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < mask.size(); ++i) keep[i] = label[i] == best;
  return keep;
}

}  // namespace

Contour extract_contour(const GrayImage& mask) {
  std::size_t components = 0;
  const auto keep = largest_component(mask, components);
  if (components == 0) throw MeasurementError("cannot trace a contour: mask is empty");
  const long w = static_cast<long>(mask.width), h = static_cast<long>(mask.height);
  const auto inside = [&](long x, long y) { return x >= 0 && y >= 0 && x < w && y < h && keep[y * w + x]; };

  const std::size_t first = static_cast<std::size_t>(std::find(keep.begin(), keep.end(), 1) - keep.begin());
  const long sx = static_cast<long>(first) % w, sy = static_cast<long>(first) / w;

  Contour contour;
  contour.multiple_components = components > 1;
  long cx = sx, cy = sy;
  int back = 0;  // west of the first raster pixel is background
  const int start_back = back;
  const std::size_t limit = 4 * mask.size() + 8;
  for (std::size_t step = 0; step < limit; ++step) {
    contour.points.push_back({double(cx), double(cy)});
    int found = -1;
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      if (inside(cx + kDx[d], cy + kDy[d])) {
        found = d;
        break;
      }
    }
    if (found < 0) break;  // isolated pixel
    const int prev = (found + 7) % 8;
    const long bx = cx + kDx[prev], by = cy + kDy[prev];
    cx += kDx[found];
    cy += kDy[found];
    back = direction_of(static_cast<int>(bx - cx), static_cast<int>(by - cy));
    if (cx == sx && cy == sy && back == start_back) break;
  }
  if (signed_area(contour.points) < 0) std::reverse(contour.points.begin(), contour.points.end());
  return contour;
}

// ---------------------------------------------------------------- hull

Polygon convex_hull(const Polygon& input) {
  Polygon pts = input;
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) throw MeasurementError("convex hull needs at least three distinct points");
  Polygon hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) throw MeasurementError("convex hull is degenerate: all points are collinear");
  return hull;
}

// ---------------------------------------------------------------- triangle

namespace {

struct Line {
  Point n;   // unit outward normal
  double h;  // n . x = h on the line, n . x <= h inside
};

double dot(const Point& a, const Point& b) { return a.x * b.x + a.y * b.y; }
double cross2(const Point& a, const Point& b) { return a.x * b.y - a.y * b.x; }

std::optional<Point> intersect(const Line& a, const Line& b) {
  const double det = cross2(a.n, b.n);
  if (std::abs(det) < 1e-12) return std::nullopt;
  return Point{(a.h * b.n.y - b.h * a.n.y) / det, (a.n.x * b.h - b.n.x * a.h) / det};
}

bool positively_spanning(const Point& a, const Point& b, const Point& c) {
  constexpr double eps = 1e-12;
  const double ab = cross2(a, b), bc = cross2(b, c), ca = cross2(c, a);
  return (ab > eps && bc > eps && ca > eps) || (ab < -eps && bc < -eps && ca < -eps);
}

std::optional<Triangle> from_lines(const Line& a, const Line& b, const Line& c) {
  if (!positively_spanning(a.n, b.n, c.n)) return std::nullopt;
  auto p = intersect(b, c), q = intersect(c, a), r = intersect(a, b);
  if (!p || !q || !r) return std::nullopt;
  return Triangle{*p, *q, *r};
}

}  // namespace

Triangle min_enclosing_triangle(const Polygon& hull) {
  const std::size_t n = hull.size();
  if (n < 3 || signed_area(hull) <= 0.0)
    throw MeasurementError("enclosing triangle needs a counterclockwise convex polygon with nonzero area");

  double scale = 0.0;
  Point centroid{0, 0};
  for (const Point& p : hull) {
    centroid.x += p.x / n;
    centroid.y += p.y / n;
  }
  for (const Point& p : hull) scale = std::max(scale, distance(p, centroid));
  const double tolerance = 1e-9 * std::max(1.0, scale);

  std::vector<Line> edges(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = hull[i];
    const Point& b = hull[(i + 1) % n];
    const double len = distance(a, b);
    const Point normal{(b.y - a.y) / len, -(b.x - a.x) / len};
    edges[i] = {normal, dot(normal, a)};
  }

  Triangle best{};
  double best_area = std::numeric_limits<double>::infinity();
  const auto consider = [&](const std::optional<Triangle>& t) {
    if (!t) return;
    const double area = triangle_area(*t);
    if (!(area < best_area * (1 - 1e-12))) return;
    for (const Point& p : hull)
      if (!triangle_contains(*t, p, tolerance)) return;
    best = *t;
    best_area = area;
  };

  // Three flush sides.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) consider(from_lines(edges[i], edges[j], edges[k]));

  // Two flush sides; the third touches vertex v at its own midpoint.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto corner = intersect(edges[i], edges[j]);
      if (!corner) continue;
      const Point ui{-edges[i].n.y, edges[i].n.x};
      const Point uj{-edges[j].n.y, edges[j].n.x};
      const double det = cross2(ui, uj);
      for (std::size_t k = 0; k < n; ++k) {
        const Point& v = hull[k];
        const Point rhs{2 * (v.x - corner->x), 2 * (v.y - corner->y)};
        const double s = cross2(rhs, uj) / det;
        const double t = cross2(ui, rhs) / det;
        const Point p{corner->x + s * ui.x, corner->y + s * ui.y};
        const Point q{corner->x + t * uj.x, corner->y + t * uj.y};
        const double len = distance(p, q);
        if (len < tolerance) continue;
        Point normal{(q.y - p.y) / len, -(q.x - p.x) / len};
        if (dot(normal, Point{centroid.x - v.x, centroid.y - v.y}) > 0) normal = {-normal.x, -normal.y};
        const Line third{normal, dot(normal, v)};
        const Point& prev = hull[(k + n - 1) % n];
        const Point& next = hull[(k + 1) % n];
        if (dot(normal, prev) > third.h + tolerance || dot(normal, next) > third.h + tolerance) continue;
        consider(from_lines(edges[i], edges[j], third));
      }
    }

  if (!std::isfinite(best_area)) throw MeasurementError("no enclosing triangle found for a degenerate hull");
  return best;
}

// ---------------------------------------------------------------- landmarks

namespace {

double line_distance(const Point& a, const Point& b, const Point& p) {
  const double len = distance(a, b);
  return len == 0.0 ? distance(a, p) : std::abs(cross(a, b, p)) / len;
}

}  // namespace

Landmarks lv_landmarks(const Polygon& contour, const Triangle& triangle) {
  if (contour.empty()) throw MeasurementError("landmarks need a non-empty contour");
  std::array<std::size_t, 3> index{};
  for (int v = 0; v < 3; ++v) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < contour.size(); ++i) {
      const double d = distance(contour[i], triangle[v]);
      if (d < best) {
        best = d;
        index[v] = i;
      }
    }
  }
  int apex = 0;
  double far = -1.0;
  for (int c = 0; c < 3; ++c) {
    const double d = line_distance(contour[index[(c + 1) % 3]], contour[index[(c + 2) % 3]], contour[index[c]]);
    if (d > far) {
      far = d;
      apex = c;
    }
  }
  Landmarks out;
  out.contour_index = {index[(apex + 1) % 3], index[(apex + 2) % 3], index[apex]};
  out.annulus_a = contour[out.contour_index[0]];
  out.annulus_b = contour[out.contour_index[1]];
  out.apex = contour[out.contour_index[2]];
  return out;
}

}  // namespace mfpu
