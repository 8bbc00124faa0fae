#include "mfpu/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfpu/errors.hpp"

namespace mfpu {

double lv_length_pixels(const Polygon& contour, const Landmarks& lm) {
  if (contour.size() < 2) throw MeasurementError("length needs a contour with at least two points");
  const Point mid{(lm.annulus_a.x + lm.annulus_b.x) / 2, (lm.annulus_a.y + lm.annulus_b.y) / 2};
  Point dir{-(lm.annulus_b.y - lm.annulus_a.y), lm.annulus_b.x - lm.annulus_a.x};
  double len = std::hypot(dir.x, dir.y);
  if (len == 0.0) {
    dir = {lm.apex.x - mid.x, lm.apex.y - mid.y};
    len = std::hypot(dir.x, dir.y);
    if (len == 0.0) throw MeasurementError("degenerate landmarks: annulus and apex coincide");
  }
  dir = {dir.x / len, dir.y / len};
  if (dir.x * (lm.apex.x - mid.x) + dir.y * (lm.apex.y - mid.y) < 0) dir = {-dir.x, -dir.y};

  double farthest = -1.0;
  for (std::size_t i = 0, n = contour.size(); i < n; ++i) {
    const Point& p = contour[i];
    const Point& q = contour[(i + 1) % n];
    const Point e{q.x - p.x, q.y - p.y};
    const double det = dir.x * (-e.y) - dir.y * (-e.x);
    const Point r{p.x - mid.x, p.y - mid.y};
    if (std::abs(det) < 1e-12) {
      // Collinear edge on the ray: take its far endpoint.
      if (std::abs(dir.x * r.y - dir.y * r.x) < 1e-9) {
        farthest = std::max({farthest, dir.x * r.x + dir.y * r.y, dir.x * (q.x - mid.x) + dir.y * (q.y - mid.y)});
      }
      continue;
    }
    const double t = (r.x * (-e.y) - r.y * (-e.x)) / det;
    const double s = (dir.x * r.y - dir.y * r.x) / det;
    if (s >= -1e-12 && s <= 1 + 1e-12 && t > 1e-9) farthest = std::max(farthest, t);
  }
  if (farthest <= 0.0) throw MeasurementError("long axis does not cross the contour on the apex side");
  return farthest + 1.0;
}

double lv_length(const Polygon& contour, const Landmarks& landmarks, double calibration_mm) {
  require(calibration_mm > 0.0, "calibration must be positive");
  return units::mm_to_cm(lv_length_pixels(contour, landmarks) * calibration_mm);
}

double lv_area(const GrayImage& mask, double calibration_mm) {
  require(calibration_mm > 0.0, "calibration must be positive");
  const auto count = std::count_if(mask.pixels.begin(), mask.pixels.end(), [](std::uint8_t v) { return v != 0; });
  return units::mm2_to_cm2(static_cast<double>(count) * calibration_mm * calibration_mm);
}

double lv_volume(double area_cm2, double length_cm) {
  require(length_cm > 0.0, "volume needs a positive length, got " + std::to_string(length_cm));
  return units::cm3_to_ml(8.0 * area_cm2 * area_cm2 / (3.0 * std::numbers::pi * length_cm));
}

double ejection_fraction(double volume_ed, double volume_es) {
  require(volume_ed > 0.0, "ejection fraction needs a positive ED volume, got " + std::to_string(volume_ed));
  return 100.0 * (volume_ed - volume_es) / volume_ed;
}

bool ejection_fraction_warning(double volume_ed, double volume_es) {
  return volume_es < 0.0 || volume_es > volume_ed;
}

LVMeasures measure_lv(const GrayImage& mask, double calibration_mm) {
  LVMeasures m;
  const Contour contour = extract_contour(mask);
  m.contour = contour.points;
  m.multiple_components = contour.multiple_components;
  m.triangle = min_enclosing_triangle(convex_hull(contour.points));
  m.landmarks = lv_landmarks(contour.points, m.triangle);
  m.length_cm = lv_length(contour.points, m.landmarks, calibration_mm);
  m.area_cm2 = lv_area(mask, calibration_mm);
  m.volume_ml = lv_volume(m.area_cm2, m.length_cm);
  return m;
}

}  // namespace mfpu
