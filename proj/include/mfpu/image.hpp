#pragma once

// 8-bit grayscale rasters, binary PGM I/O, global Niblack thresholding and
// resampling.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace mfpu {

// Row-major, pixel (x, y) at index y * width + x.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h, fill) {}

  bool empty() const { return pixels.empty(); }
  std::size_t size() const { return pixels.size(); }
  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// P5 with maxval 255. Malformed input throws FormatError naming the byte
// offset; unreadable paths throw IoError.
GrayImage pgm_read(const std::filesystem::path& path);
void pgm_write(const std::filesystem::path& path, const GrayImage& image);
GrayImage pgm_decode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> pgm_encode(const GrayImage& image);

// Threshold T = mean + k * (population) stddev over the whole image; output
// is 255 where pixel > T, else 0.
GrayImage niblack_threshold(const GrayImage& image, double k = 2.0);
double niblack_level(const GrayImage& image, double k = 2.0);

// Pixel-centre aligned resampling to width x height.
GrayImage resize_bilinear(const GrayImage& image, std::size_t width, std::size_t height);
GrayImage resize_nearest(const GrayImage& image, std::size_t width, std::size_t height);

// {0,1} mask <-> {0,255} image.
GrayImage mask_to_display(const GrayImage& mask);
GrayImage display_to_mask(const GrayImage& image);

}  // namespace mfpu
