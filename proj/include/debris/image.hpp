#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace debris {

/// Row-major raster of fixed-size pixels.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(int w, int h, T fill = T{})
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  bool contains(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
};

struct Rgba {
  std::uint8_t r = 0, g = 0, b = 0, a = 0;
  bool operator==(const Rgba&) const = default;
};

// PGM (P2/P5), 8-bit grayscale.
Image<std::uint8_t> read_pgm(const std::string& path);
void write_pgm(const Image<std::uint8_t>& img, const std::string& path);

/// Loads an 8-bit single-channel mask from PNG or PGM based on file magic.
Image<std::uint8_t> read_mask(const std::string& path);

}  // namespace debris
