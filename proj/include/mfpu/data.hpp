#pragma once

// Samples, augmentation, synthetic phantoms and cross-validation folds.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mfpu/image.hpp"
#include "mfpu/tensor.hpp"

namespace mfpu {

enum class Phase { ED, ES, Other };

std::string_view phase_name(Phase phase);
Phase parse_phase(std::string_view text);

struct ImageSample {
  std::string id;
  std::string subject;
  Phase phase = Phase::Other;
  double calibration_mm = 0.3;  // mm per pixel
  GrayImage image;
  GrayImage mask;  // values in {0, 1}

  // Throws ContractViolation when shapes differ, the mask is not binary or
  // the calibration is not positive.
  void validate() const;
};

struct ElasticParams {
  double alpha = 2.0;  // peak displacement in pixels
  double sigma = 6.0;  // Gaussian smoothing width in pixels
};

// Uniform(-1, 1) displacement per pixel and axis, Gaussian-smoothed, scaled
// so the largest component magnitude equals alpha. The image is resampled
// bilinearly and the mask by nearest neighbour through the same field.
ImageSample elastic_deform(const ImageSample& sample, const ElasticParams& params, std::uint64_t seed);

// Truncated ellipse: the region of an ellipse with semi-axes a (long) and b
// that lies on the apex side of the chord at distance c = t * a behind the
// centre. Coordinates are pixel centres, y down.
struct TruncatedEllipse {
  double cx = 0, cy = 0;       // ellipse centre
  double a = 1, b = 1;         // semi-axes along and across the long axis
  double cut = 0;              // c, distance from centre to the base chord
  double tilt = 0;             // radians; 0 points the apex straight up

  double ux() const;           // unit vector toward the apex
  double uy() const;
  bool contains(double x, double y) const;
  double area() const;         // ab(pi - acos t + t sqrt(1 - t^2))
  double long_axis() const { return a + cut; }
  // Scaled copy about the base-chord midpoint.
  TruncatedEllipse shrunk(double factor) const;
  double base_x() const;
  double base_y() const;
};

GrayImage rasterize(const TruncatedEllipse& shape, std::size_t width, std::size_t height);

// Untruncated, axis-aligned ellipse mask.
GrayImage rasterize_ellipse(std::size_t width, std::size_t height, double cx, double cy, double a, double b);

struct PhantomPair {
  ImageSample ed;
  ImageSample es;
  TruncatedEllipse ed_shape;
  TruncatedEllipse es_shape;
  double shrink = 1.0;
};

// Synthetic ED/ES pair on an N x N canvas: dark cavity, bright open-based
// wall, mid-gray background, multiplicative speckle, calibration 0.3 mm/px.
PhantomPair generate_phantom(std::size_t n, std::uint64_t seed, const std::string& subject = "S000");

// One fold index per sample. Subjects (grouped by their set of phases) are
// shuffled by seed and dealt round-robin; all samples of a subject share a
// fold and subject counts per fold differ by at most one overall.
struct FoldKey {
  std::string subject;
  Phase phase = Phase::Other;
};
std::vector<std::size_t> make_folds(const std::vector<FoldKey>& samples, std::size_t n_folds, std::uint64_t seed);

// 2 x H x W network input: image / 255 and its Niblack map / 255.
template <class T>
Tensor<T> make_input(const GrayImage& image, double niblack_k = 2.0);

// Resize image (bilinear) and mask (nearest) to n x n.
ImageSample resize_sample(const ImageSample& sample, std::size_t n);

}  // namespace mfpu
