#include "fbfx/pgm.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace fbfx {

namespace {

// next token, skipping whitespace and '#' comment lines
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) continue;
    tok.push_back(static_cast<char>(c));
    while ((c = in.get()) != EOF && !std::isspace(c) && c != '#') tok.push_back(static_cast<char>(c));
    if (c == '#') in.unget();
    break;
  }
  if (tok.empty()) throw std::runtime_error("pgm: truncated header");
  return tok;
}

long to_long(const std::string& s) {
  size_t pos = 0;
  const long v = std::stol(s, &pos);
  if (pos != s.size()) throw std::runtime_error("pgm: bad header token '" + s + "'");
  return v;
}

}  // namespace

ImageGrid read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pgm: cannot open " + path);
  const std::string magic = next_token(in);
  if (magic != "P2" && magic != "P5") throw std::runtime_error("pgm: unsupported magic " + magic);
  const long cols = to_long(next_token(in));
  const long rows = to_long(next_token(in));
  const long maxval = to_long(next_token(in));
  if (cols <= 0 || rows <= 0 || maxval <= 0 || maxval > 65535)
    throw std::runtime_error("pgm: bad dimensions or maxval");

  ImageGrid img;
  img.rows = static_cast<int>(rows);
  img.cols = static_cast<int>(cols);
  img.px.resize(rows * cols);

  if (magic == "P2") {
    for (long k = 0; k < rows * cols; ++k) {
      const long v = to_long(next_token(in));
      if (v < 0 || v > maxval) throw std::runtime_error("pgm: sample out of range");
      img.px[k] = static_cast<double>(v) / static_cast<double>(maxval);
    }
  } else {
    // single whitespace after maxval, then raster
    const int bytes = maxval > 255 ? 2 : 1;
    std::string raster(static_cast<size_t>(rows * cols * bytes), '\0');
    in.read(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (in.gcount() != static_cast<std::streamsize>(raster.size()))
      throw std::runtime_error("pgm: truncated raster");
    const auto* bp = reinterpret_cast<const unsigned char*>(raster.data());
    for (long k = 0; k < rows * cols; ++k) {
      long v;
      if (bytes == 1) v = bp[k];
      else v = (static_cast<long>(bp[2 * k]) << 8) | bp[2 * k + 1];
      if (v > maxval) throw std::runtime_error("pgm: sample out of range");
      img.px[k] = static_cast<double>(v) / static_cast<double>(maxval);
    }
  }
  return img;
}

void write_pgm(const std::string& path, const ImageGrid& img, int maxval, bool binary) {
  if (maxval < 1 || maxval > 65535) throw std::invalid_argument("pgm: maxval out of range");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pgm: cannot write " + path);
  out << (binary ? "P5" : "P2") << "\n" << img.cols << " " << img.rows << "\n" << maxval << "\n";
  const long n = static_cast<long>(img.rows) * img.cols;
  for (long k = 0; k < n; ++k) {
    double v = img.px[k];
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    const long level = std::lround(v * maxval);
    if (binary) {
      if (maxval > 255) {
        out.put(static_cast<char>((level >> 8) & 0xff));
        out.put(static_cast<char>(level & 0xff));
      } else {
        out.put(static_cast<char>(level & 0xff));
      }
    } else {
      out << level << (k % img.cols == img.cols - 1 ? '\n' : ' ');
    }
  }
  if (!out) throw std::runtime_error("pgm: write failed for " + path);
}

}  // namespace fbfx
