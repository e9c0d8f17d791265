#include "debris/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "debris/error.hpp"

namespace debris {
namespace {

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};
constexpr std::uint32_t kMaxDim = 1 << 16;
constexpr std::uint64_t kMaxPixels = 1ull << 26;

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  std::uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_be32(out, crc);
}

std::vector<std::uint8_t> deflate_bytes(const std::vector<std::uint8_t>& raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> out(bound);
  if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    fail(ErrorKind::IoError, "png deflate failed");
  out.resize(bound);
  return out;
}

void write_png(const std::string& path, int width, int height, int bit_depth,
               int color_type, const std::uint8_t* rows, std::size_t row_bytes) {
  std::vector<std::uint8_t> out(kSignature, kSignature + 8);

  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(width));
  put_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(static_cast<std::uint8_t>(bit_depth));
  ihdr.push_back(static_cast<std::uint8_t>(color_type));
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  append_chunk(out, "IHDR", ihdr);

  std::vector<std::uint8_t> raw;
  raw.reserve((row_bytes + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), rows + y * row_bytes, rows + (y + 1) * row_bytes);
  }
  append_chunk(out, "IDAT", deflate_bytes(raw));
  append_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) fail(ErrorKind::IoError, "write failed: " + path);
}

std::uint8_t paeth(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
  int p = int(a) + int(b) - int(c);
  int pa = std::abs(p - int(a)), pb = std::abs(p - int(b)), pc = std::abs(p - int(c));
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

struct PngData {
  int width = 0, height = 0, bit_depth = 0, color_type = 0;
  std::vector<std::uint8_t> raster;  // unfiltered scanlines
  std::vector<std::uint8_t> palette;  // rgb triples
  std::size_t row_bytes = 0;
  int channels = 0;
};

PngData decode_png(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  auto bad = [&](const std::string& msg) -> void {
    fail(ErrorKind::MalformedFile, origin + ": " + msg);
  };

  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
    bad("not a PNG file");

  PngData png;
  std::vector<std::uint8_t> idat;
  bool seen_ihdr = false, seen_iend = false;
  std::size_t pos = 8;
  while (pos + 12 <= bytes.size() && !seen_iend) {
    std::uint32_t len = get_be32(&bytes[pos]);
    if (len > (1u << 28) || pos + 12 + len > bytes.size())
      bad("truncated chunk at byte " + std::to_string(pos));
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const std::uint8_t* data = &bytes[pos + 8];
    std::uint32_t crc = get_be32(&bytes[pos + 8 + len]);
    std::uint32_t actual = crc32(0L, Z_NULL, 0);
    actual = crc32(actual, &bytes[pos + 4], len + 4);
    if (crc != actual) bad("bad CRC at byte " + std::to_string(pos));

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (seen_ihdr || len != 13) bad("invalid IHDR");
      png.width = static_cast<int>(get_be32(data));
      png.height = static_cast<int>(get_be32(data + 4));
      png.bit_depth = data[8];
      png.color_type = data[9];
      if (data[10] != 0 || data[11] != 0) bad("unsupported compression/filter method");
      if (data[12] != 0) bad("interlaced PNG not supported");
      if (png.width <= 0 || png.height <= 0 ||
          std::uint32_t(png.width) > kMaxDim || std::uint32_t(png.height) > kMaxDim ||
          std::uint64_t(png.width) * std::uint64_t(png.height) > kMaxPixels)
        bad("unreasonable image dimensions");
      switch (png.color_type) {
        case 0: png.channels = 1; break;
        case 2: png.channels = 3; break;
        case 3: png.channels = 1; break;
        case 4: png.channels = 2; break;
        case 6: png.channels = 4; break;
        default: bad("unsupported color type");
      }
      if (png.bit_depth != 8 && png.bit_depth != 16) bad("unsupported bit depth");
      if (png.color_type == 3 && png.bit_depth != 8) bad("unsupported palette depth");
      seen_ihdr = true;
    } else if (std::memcmp(type, "PLTE", 4) == 0) {
      if (!seen_ihdr || len % 3 != 0 || len > 768) bad("invalid PLTE");
      png.palette.assign(data, data + len);
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      if (!seen_ihdr) bad("IDAT before IHDR");
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      seen_iend = true;
    }
    // ancillary chunks are skipped
    pos += 12 + len;
  }
  if (!seen_ihdr) bad("missing IHDR");
  if (!seen_iend) bad("missing IEND");
  if (idat.empty()) bad("missing IDAT");

  int bytes_per_sample = png.bit_depth / 8;
  png.row_bytes = std::size_t(png.width) * png.channels * bytes_per_sample;
  std::size_t raw_size = (png.row_bytes + 1) * png.height;

  std::vector<std::uint8_t> raw(raw_size);
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) bad("inflate init failed");
  zs.next_in = idat.data();
  zs.avail_in = static_cast<uInt>(idat.size());
  zs.next_out = raw.data();
  zs.avail_out = static_cast<uInt>(raw.size());
  int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != raw_size)
    bad("corrupt or truncated image data");

  // undo per-row filters
  png.raster.resize(png.row_bytes * png.height);
  int bpp = png.channels * bytes_per_sample;
  for (int y = 0; y < png.height; ++y) {
    const std::uint8_t* src = &raw[std::size_t(y) * (png.row_bytes + 1)];
    std::uint8_t filter = src[0];
    ++src;
    std::uint8_t* cur = &png.raster[std::size_t(y) * png.row_bytes];
    const std::uint8_t* prev = y > 0 ? cur - png.row_bytes : nullptr;
    for (std::size_t x = 0; x < png.row_bytes; ++x) {
      std::uint8_t a = x >= std::size_t(bpp) ? cur[x - bpp] : 0;
      std::uint8_t b = prev ? prev[x] : 0;
      std::uint8_t c = (prev && x >= std::size_t(bpp)) ? prev[x - bpp] : 0;
      switch (filter) {
        case 0: cur[x] = src[x]; break;
        case 1: cur[x] = static_cast<std::uint8_t>(src[x] + a); break;
        case 2: cur[x] = static_cast<std::uint8_t>(src[x] + b); break;
        case 3: cur[x] = static_cast<std::uint8_t>(src[x] + ((int(a) + int(b)) >> 1)); break;
        case 4: cur[x] = static_cast<std::uint8_t>(src[x] + paeth(a, b, c)); break;
        default: bad("invalid filter type " + std::to_string(filter));
      }
    }
  }
  return png;
}

}  // namespace

void write_png_gray8(const Image<std::uint8_t>& img, const std::string& path) {
  write_png(path, img.width, img.height, 8, 0, img.pixels.data(),
            static_cast<std::size_t>(img.width));
}

void write_png_gray16(const Image<std::uint16_t>& img, const std::string& path) {
  // big-endian samples per the PNG spec
  std::vector<std::uint8_t> rows(std::size_t(img.width) * img.height * 2);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    rows[2 * i] = static_cast<std::uint8_t>(img.pixels[i] >> 8);
    rows[2 * i + 1] = static_cast<std::uint8_t>(img.pixels[i] & 0xff);
  }
  write_png(path, img.width, img.height, 16, 0, rows.data(),
            static_cast<std::size_t>(img.width) * 2);
}

void write_png_rgba8(const Image<Rgba>& img, const std::string& path) {
  std::vector<std::uint8_t> rows(std::size_t(img.width) * img.height * 4);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    rows[4 * i] = img.pixels[i].r;
    rows[4 * i + 1] = img.pixels[i].g;
    rows[4 * i + 2] = img.pixels[i].b;
    rows[4 * i + 3] = img.pixels[i].a;
  }
  write_png(path, img.width, img.height, 8, 6, rows.data(),
            static_cast<std::size_t>(img.width) * 4);
}

Image<std::uint8_t> read_png_gray8(const std::vector<std::uint8_t>& bytes,
                                   const std::string& origin) {
  PngData png = decode_png(bytes, origin);
  Image<std::uint8_t> img(png.width, png.height);
  int step = png.channels * (png.bit_depth / 8);
  for (int y = 0; y < png.height; ++y) {
    const std::uint8_t* row = &png.raster[std::size_t(y) * png.row_bytes];
    for (int x = 0; x < png.width; ++x) {
      std::uint8_t v = row[std::size_t(x) * step];  // first channel, high byte
      if (png.color_type == 3) {
        std::size_t idx = std::size_t(v) * 3;
        if (idx >= png.palette.size())
          fail(ErrorKind::MalformedFile, origin + ": palette index out of range");
        v = png.palette[idx];
      }
      img.at(x, y) = v;
    }
  }
  return img;
}

Image<std::uint8_t> read_png_gray8(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::MalformedFile, "cannot open: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return read_png_gray8(bytes, path);
}

}  // namespace debris
