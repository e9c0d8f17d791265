#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "debris/image.hpp"

namespace debris {

// Minimal PNG codec (zlib-backed). Writing always uses filter type 0 and a
// fixed compression level so identical rasters produce identical bytes.

void write_png_gray8(const Image<std::uint8_t>& img, const std::string& path);
void write_png_gray16(const Image<std::uint16_t>& img, const std::string& path);
void write_png_rgba8(const Image<Rgba>& img, const std::string& path);

/// Reads an 8- or 16-bit grayscale or paletted/RGB PNG and collapses it to
/// 8-bit single-channel (RGB collapses via the red channel; 16-bit takes the
/// high byte). Throws MalformedFile on anything unparsable.
Image<std::uint8_t> read_png_gray8(const std::string& path);
Image<std::uint8_t> read_png_gray8(const std::vector<std::uint8_t>& bytes,
                                   const std::string& origin);

}  // namespace debris
