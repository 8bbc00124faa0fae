#include "mfpu/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "mfpu/errors.hpp"

namespace mfpu {

namespace {

[[noreturn]] void format_error(std::size_t offset, const std::string& what) {
  throw FormatError("PGM: " + what + " at byte offset " + std::to_string(offset));
}

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* field) {
    skip_space();
    const std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1u << 24)) format_error(start, std::string(field) + " too large");
      ++pos_;
    }
    if (pos_ == start) format_error(start, std::string("expected ") + field);
    return value;
  }

  std::size_t pos_ = 0;

 private:
  const std::vector<std::uint8_t>& bytes_;
};

}  // namespace

GrayImage pgm_decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') format_error(0, "bad magic (expected P5)");
  if (bytes[1] != '5') format_error(1, std::string("unsupported variant P") + static_cast<char>(bytes[1]) + " (only binary P5)");
  HeaderReader reader(bytes);
  reader.pos_ = 2;
  if (reader.pos_ < bytes.size() && !std::isspace(bytes[reader.pos_]) && bytes[reader.pos_] != '#')
    format_error(reader.pos_, "bad magic (expected P5)");
  const std::size_t width = reader.number("width");
  const std::size_t height = reader.number("height");
  reader.skip_space();
  const std::size_t maxval_at = reader.pos_;
  const std::size_t maxval = reader.number("maxval");
  if (maxval != 255) format_error(maxval_at, "maxval must be 255, got " + std::to_string(maxval));
  if (width == 0 || height == 0) format_error(maxval_at, "empty image");
  if (reader.pos_ >= bytes.size() || !std::isspace(bytes[reader.pos_]))
    format_error(reader.pos_, "expected single whitespace after maxval");
  const std::size_t data = reader.pos_ + 1;
  const std::size_t need = width * height;
  if (bytes.size() < data + need)
    format_error(bytes.size(), "truncated pixel data (" + std::to_string(bytes.size() - std::min(bytes.size(), data)) +
                                   " of " + std::to_string(need) + " bytes)");
  GrayImage image(width, height);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(data), need, image.pixels.begin());
  return image;
}

std::vector<std::uint8_t> pgm_encode(const GrayImage& image) {
  require(!image.empty() && image.pixels.size() == image.width * image.height, "cannot encode an empty image");
  const std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

GrayImage pgm_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return pgm_decode(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void pgm_write(const std::filesystem::path& path, const GrayImage& image) {
  const auto bytes = pgm_encode(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

double niblack_level(const GrayImage& image, double k) {
  require(!image.empty(), "niblack threshold needs a non-empty image");
  double mean = 0.0;
  for (auto p : image.pixels) mean += p;
  mean /= static_cast<double>(image.size());
  double var = 0.0;
  for (auto p : image.pixels) var += (p - mean) * (p - mean);
  var /= static_cast<double>(image.size());
  return mean + k * std::sqrt(var);
}

GrayImage niblack_threshold(const GrayImage& image, double k) {
  const double level = niblack_level(image, k);
  GrayImage out(image.width, image.height);
  for (std::size_t i = 0; i < image.size(); ++i) out.pixels[i] = image.pixels[i] > level ? 255 : 0;
  return out;
}

namespace {

double source_coord(std::size_t dst, std::size_t dst_extent, std::size_t src_extent) {
  return (static_cast<double>(dst) + 0.5) * static_cast<double>(src_extent) / static_cast<double>(dst_extent) - 0.5;
}

}  // namespace

GrayImage resize_bilinear(const GrayImage& image, std::size_t width, std::size_t height) {
  require(!image.empty() && width > 0 && height > 0, "resize needs non-empty source and target");
  if (width == image.width && height == image.height) return image;
  GrayImage out(width, height);
  const auto clampi = [](double v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(hi - 1)));
  };
  for (std::size_t y = 0; y < height; ++y) {
    const double sy = std::clamp(source_coord(y, height, image.height), 0.0, image.height - 1.0);
    const std::size_t y0 = clampi(std::floor(sy), image.height), y1 = std::min(y0 + 1, image.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double sx = std::clamp(source_coord(x, width, image.width), 0.0, image.width - 1.0);
      const std::size_t x0 = clampi(std::floor(sx), image.width), x1 = std::min(x0 + 1, image.width - 1);
      const double fx = sx - static_cast<double>(x0);
      const double v = (1 - fy) * ((1 - fx) * image.at(x0, y0) + fx * image.at(x1, y0)) +
                       fy * ((1 - fx) * image.at(x0, y1) + fx * image.at(x1, y1));
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

GrayImage resize_nearest(const GrayImage& image, std::size_t width, std::size_t height) {
  require(!image.empty() && width > 0 && height > 0, "resize needs non-empty source and target");
  GrayImage out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = std::min((2 * y + 1) * image.height / (2 * height), image.height - 1);
    for (std::size_t x = 0; x < width; ++x) out.at(x, y) = image.at(std::min((2 * x + 1) * image.width / (2 * width), image.width - 1), sy);
  }
  return out;
}

GrayImage mask_to_display(const GrayImage& mask) {
  GrayImage out = mask;
  for (auto& p : out.pixels) p = p ? 255 : 0;
  return out;
}

GrayImage display_to_mask(const GrayImage& image) {
  GrayImage out = image;
  for (auto& p : out.pixels) p = p >= 128 ? 1 : 0;
  return out;
}

}  // namespace mfpu
