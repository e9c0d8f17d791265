#include "debris/image.hpp"

#include <fstream>
#include <sstream>

#include "debris/error.hpp"
#include "debris/png_io.hpp"

namespace debris {
namespace {

// Reads the next PGM header token, skipping whitespace and # comments.
bool next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (!std::isspace(c)) break;
  }
  if (c == EOF) return false;
  do {
    tok.push_back(static_cast<char>(c));
  } while ((c = in.get()) != EOF && !std::isspace(c));
  return true;
}

long parse_header_int(std::istream& in, const std::string& path, const char* what) {
  std::string tok;
  if (!next_token(in, tok))
    fail(ErrorKind::MalformedFile, path + ": unexpected end of PGM header");
  try {
    std::size_t used = 0;
    long v = std::stol(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::MalformedFile,
         path + ": bad PGM " + std::string(what) + " '" + tok + "'");
  }
}

}  // namespace

Image<std::uint8_t> read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::MalformedFile, "cannot open: " + path);

  std::string magic;
  if (!next_token(f, magic) || (magic != "P2" && magic != "P5"))
    fail(ErrorKind::MalformedFile, path + ": not a PGM file (expected P2/P5)");

  long w = parse_header_int(f, path, "width");
  long h = parse_header_int(f, path, "height");
  long maxval = parse_header_int(f, path, "maxval");
  if (w <= 0 || h <= 0 || w > 65536 || h > 65536 || (w * h) > (1l << 26))
    fail(ErrorKind::MalformedFile, path + ": unreasonable PGM dimensions");
  if (maxval <= 0 || maxval > 255)
    fail(ErrorKind::MalformedFile, path + ": PGM maxval must be in 1..255");

  Image<std::uint8_t> img(static_cast<int>(w), static_cast<int>(h));
  if (magic == "P5") {
    f.read(reinterpret_cast<char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<std::size_t>(f.gcount()) != img.pixels.size())
      fail(ErrorKind::MalformedFile, path + ": truncated PGM pixel data");
  } else {
    for (auto& px : img.pixels) {
      long v = parse_header_int(f, path, "pixel");
      if (v < 0 || v > maxval)
        fail(ErrorKind::MalformedFile, path + ": PGM pixel out of range");
      px = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

void write_pgm(const Image<std::uint8_t>& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open for writing: " + path);
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!f) fail(ErrorKind::IoError, "write failed: " + path);
}

Image<std::uint8_t> read_mask(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::MalformedFile, "cannot open: " + path);
  int c0 = f.get();
  f.close();
  if (c0 == 0x89) return read_png_gray8(path);
  if (c0 == 'P') return read_pgm(path);
  fail(ErrorKind::MalformedFile, path + ": unrecognized mask format (need PNG or PGM)");
}

}  // namespace debris
