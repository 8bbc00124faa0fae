#pragma once

// Area-length measurements of a segmented left ventricle.

#include <string>

#include "mfpu/geometry.hpp"
#include "mfpu/image.hpp"

namespace mfpu {

namespace units {
inline double mm_to_cm(double mm) { return mm / 10.0; }
inline double mm2_to_cm2(double mm2) { return mm2 / 100.0; }
// 1 cm^3 is 1 mL.
inline double cm3_to_ml(double cm3) { return cm3; }
}  // namespace units

// Long-axis length in cm. The ray starts at the midpoint of the annulus
// points, runs perpendicular to the baseline toward the apex and ends at its
// farthest crossing of the contour. One pixel is added to the centre-to-centre
// distance so that the length spans whole pixels at both ends.
double lv_length(const Polygon& contour, const Landmarks& landmarks, double calibration_mm);
double lv_length_pixels(const Polygon& contour, const Landmarks& landmarks);

// Foreground count * calibration^2, in cm^2.
double lv_area(const GrayImage& mask, double calibration_mm);

// 8 S^2 / (3 pi D), in mL.
double lv_volume(double area_cm2, double length_cm);

// 100 (ED - ES) / ED.
double ejection_fraction(double volume_ed, double volume_es);
// True when the volumes violate 0 <= ES <= ED (the value is still computed).
bool ejection_fraction_warning(double volume_ed, double volume_es);

struct LVMeasures {
  double length_cm = 0.0;
  double area_cm2 = 0.0;
  double volume_ml = 0.0;
  Landmarks landmarks;
  Triangle triangle{};
  Polygon contour;
  bool multiple_components = false;
};

// Full pipeline: contour, hull, triangle, landmarks, length, area, volume.
LVMeasures measure_lv(const GrayImage& mask, double calibration_mm);

}  // namespace mfpu
