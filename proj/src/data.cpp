#include "mfpu/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "mfpu/errors.hpp"

namespace mfpu {

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::ED:
      return "ED";
    case Phase::ES:
      return "ES";
    case Phase::Other:
      return "other";
  }
  return "other";
}

Phase parse_phase(std::string_view text) {
  if (text == "ED" || text == "ed") return Phase::ED;
  if (text == "ES" || text == "es") return Phase::ES;
  if (text == "other" || text.empty()) return Phase::Other;
  throw ContractViolation("unknown phase '" + std::string(text) + "' (expected ED, ES or other)");
}

void ImageSample::validate() const {
  require(!image.empty(), "sample " + id + ": empty image");
  require(image.width == mask.width && image.height == mask.height, "sample " + id + ": image and mask shapes differ");
  require(std::all_of(mask.pixels.begin(), mask.pixels.end(), [](std::uint8_t v) { return v <= 1; }),
          "sample " + id + ": mask is not binary");
  require(calibration_mm > 0.0, "sample " + id + ": calibration must be positive");
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= total;
  return k;
}

// Separable blur with edge replication.
void smooth(std::vector<double>& field, std::size_t w, std::size_t h, const std::vector<double>& kernel) {
  const long r = static_cast<long>(kernel.size() / 2);
  std::vector<double> tmp(field.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long i = -r; i <= r; ++i) {
        const long xx = std::clamp<long>(static_cast<long>(x) + i, 0, static_cast<long>(w) - 1);
        acc += kernel[i + r] * field[y * w + xx];
      }
      tmp[y * w + x] = acc;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long i = -r; i <= r; ++i) {
        const long yy = std::clamp<long>(static_cast<long>(y) + i, 0, static_cast<long>(h) - 1);
        acc += kernel[i + r] * tmp[yy * w + x];
      }
      field[y * w + x] = acc;
    }
}

double bilinear(const GrayImage& img, double x, double y) {
  x = std::clamp(x, 0.0, img.width - 1.0);
  y = std::clamp(y, 0.0, img.height - 1.0);
  const std::size_t x0 = static_cast<std::size_t>(x), y0 = static_cast<std::size_t>(y);
  const std::size_t x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0, fy = y - y0;
  return (1 - fy) * ((1 - fx) * img.at(x0, y0) + fx * img.at(x1, y0)) +
         fy * ((1 - fx) * img.at(x0, y1) + fx * img.at(x1, y1));
}

std::uint8_t nearest(const GrayImage& img, double x, double y) {
  const long xi = std::clamp<long>(std::lround(x), 0, static_cast<long>(img.width) - 1);
  const long yi = std::clamp<long>(std::lround(y), 0, static_cast<long>(img.height) - 1);
  return img.at(static_cast<std::size_t>(xi), static_cast<std::size_t>(yi));
}

}  // namespace

ImageSample elastic_deform(const ImageSample& sample, const ElasticParams& params, std::uint64_t seed) {
  require(params.alpha >= 0.0, "elastic alpha must be >= 0");
  require(params.sigma > 0.0, "elastic sigma must be > 0");
  sample.validate();
  const std::size_t w = sample.image.width, h = sample.image.height;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> dx(w * h), dy(w * h);
  for (auto& v : dx) v = unit(rng);
  for (auto& v : dy) v = unit(rng);
  const auto kernel = gaussian_kernel(params.sigma);
  smooth(dx, w, h, kernel);
  smooth(dy, w, h, kernel);
  double peak = 0.0;
  for (std::size_t i = 0; i < w * h; ++i) peak = std::max({peak, std::abs(dx[i]), std::abs(dy[i])});
  const double gain = peak > 0.0 ? params.alpha / peak : 0.0;

  ImageSample out = sample;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      const double sx = x + gain * dx[i], sy = y + gain * dy[i];
      out.image.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(bilinear(sample.image, sx, sy)), 0L, 255L));
      out.mask.at(x, y) = nearest(sample.mask, sx, sy);
    }
  return out;
}

double TruncatedEllipse::ux() const { return std::sin(tilt); }
double TruncatedEllipse::uy() const { return -std::cos(tilt); }
double TruncatedEllipse::base_x() const { return cx - cut * ux(); }
double TruncatedEllipse::base_y() const { return cy - cut * uy(); }

bool TruncatedEllipse::contains(double x, double y) const {
  const double px = x - cx, py = y - cy;
  const double u = px * ux() + py * uy();
  const double v = -px * uy() + py * ux();
  return u >= -cut && (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
}

double TruncatedEllipse::area() const {
  const double t = cut / a;
  return a * b * (std::numbers::pi - std::acos(t) + t * std::sqrt(1.0 - t * t));
}

TruncatedEllipse TruncatedEllipse::shrunk(double factor) const {
  TruncatedEllipse s = *this;
  const double bx = base_x(), by = base_y();
  s.cx = bx + factor * (cx - bx);
  s.cy = by + factor * (cy - by);
  s.a = a * factor;
  s.b = b * factor;
  s.cut = cut * factor;
  return s;
}

GrayImage rasterize(const TruncatedEllipse& shape, std::size_t width, std::size_t height) {
  GrayImage mask(width, height);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) mask.at(x, y) = shape.contains(double(x), double(y)) ? 1 : 0;
  return mask;
}

GrayImage rasterize_ellipse(std::size_t width, std::size_t height, double cx, double cy, double a, double b) {
  GrayImage mask(width, height);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double u = (x - cx) / a, v = (y - cy) / b;
      mask.at(x, y) = u * u + v * v <= 1.0 ? 1 : 0;
    }
  return mask;
}

namespace {

GrayImage render(const TruncatedEllipse& cavity, double wall, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> speckle(1.0, 0.18);
  const double cavity_level = 30 + 20 * uni(rng);
  const double background_level = 110 + 20 * uni(rng);
  const double wall_level = 200 + 30 * uni(rng);
  TruncatedEllipse outer = cavity;
  outer.a += wall;
  outer.b += wall;
  outer.cut = cavity.cut;  // same base chord keeps the base open
  outer.cx = cavity.cx;
  outer.cy = cavity.cy;
  GrayImage img(n, n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      double level = background_level;
      if (cavity.contains(double(x), double(y)))
        level = cavity_level;
      else if (outer.contains(double(x), double(y)))
        level = wall_level;
      const double value = level * std::max(0.0, speckle(rng));
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
    }
  return img;
}

}  // namespace

PhantomPair generate_phantom(std::size_t n, std::uint64_t seed, const std::string& subject) {
  require(n >= 32, "phantom extent must be >= 32, got " + std::to_string(n));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double nd = static_cast<double>(n);
  TruncatedEllipse shape;
  shape.a = nd * (0.45 + 0.13 * uni(rng));
  shape.b = shape.a * (0.30 + 0.10 * uni(rng));
  shape.cut = -shape.a * (0.05 + 0.15 * uni(rng));
  shape.tilt = (uni(rng) * 2.0 - 1.0) * 20.0 * std::numbers::pi / 180.0;
  const double wall = 2.0 + 2.0 * uni(rng);
  // Centre the long extent on the canvas, with a small jitter.
  const double mx = nd / 2 + (uni(rng) * 2 - 1) * 0.03 * nd;
  const double my = nd / 2 + (uni(rng) * 2 - 1) * 0.03 * nd;
  const double offset = (shape.a - shape.cut) / 2;
  shape.cx = mx - offset * shape.ux();
  shape.cy = my - offset * shape.uy();
  const double shrink = 0.6 + 0.25 * uni(rng);

  PhantomPair pair;
  pair.ed_shape = shape;
  pair.es_shape = shape.shrunk(shrink);
  pair.shrink = shrink;
  const auto make = [&](const TruncatedEllipse& s, Phase phase) {
    ImageSample sample;
    sample.subject = subject;
    sample.id = subject + "_" + std::string(phase_name(phase));
    sample.phase = phase;
    sample.calibration_mm = 0.3;
    sample.mask = rasterize(s, n, n);
    sample.image = render(s, wall, n, rng);
    return sample;
  };
  pair.ed = make(pair.ed_shape, Phase::ED);
  pair.es = make(pair.es_shape, Phase::ES);
  return pair;
}

std::vector<std::size_t> make_folds(const std::vector<FoldKey>& samples, std::size_t n_folds, std::uint64_t seed) {
  require(n_folds >= 1, "need at least one fold");
  std::map<std::string, std::set<Phase>> phases;
  for (const auto& s : samples) phases[s.subject].insert(s.phase);
  require(phases.size() >= n_folds, "need at least " + std::to_string(n_folds) + " subjects for " +
                                         std::to_string(n_folds) + " folds, got " + std::to_string(phases.size()));
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& [subject, set] : phases) {
    std::string signature;
    for (Phase p : set) signature += std::string(phase_name(p)) + "+";
    groups[signature].push_back(subject);
  }
  std::mt19937_64 rng(seed);
  std::map<std::string, std::size_t> subject_fold;
  std::size_t next = 0;
  for (auto& [signature, subjects] : groups) {
    std::shuffle(subjects.begin(), subjects.end(), rng);
    for (const auto& s : subjects) {
      subject_fold[s] = next;
      next = (next + 1) % n_folds;
    }
  }
  std::vector<std::size_t> folds;
  folds.reserve(samples.size());
  for (const auto& s : samples) folds.push_back(subject_fold.at(s.subject));
  return folds;
}

template <class T>
Tensor<T> make_input(const GrayImage& image, double niblack_k) {
  require(!image.empty(), "network input needs a non-empty image");
  const GrayImage nb = niblack_threshold(image, niblack_k);
  const std::size_t hw = image.size();
  std::vector<T> values(2 * hw);
  for (std::size_t i = 0; i < hw; ++i) {
    values[i] = static_cast<T>(image.pixels[i] / 255.0);
    values[hw + i] = static_cast<T>(nb.pixels[i] / 255.0);
  }
  return Tensor<T>({2, image.height, image.width}, std::move(values));
}

template Tensor<float> make_input<float>(const GrayImage&, double);
template Tensor<double> make_input<double>(const GrayImage&, double);

ImageSample resize_sample(const ImageSample& sample, std::size_t n) {
  if (sample.image.width == n && sample.image.height == n) return sample;
  ImageSample out = sample;
  out.calibration_mm = sample.calibration_mm * static_cast<double>(sample.image.width) / static_cast<double>(n);
  out.image = resize_bilinear(sample.image, n, n);
  out.mask = resize_nearest(sample.mask, n, n);
  return out;
}

}  // namespace mfpu
