#pragma once

#include <string>

#include "fbfx/imaging.hpp"

namespace fbfx {

/// P2 (ASCII) and P5 (binary) grayscale images, 8- or 16-bit (16-bit P5 is
/// big-endian). Pixels normalize to [0,1] on read and round to the nearest
/// level on write.
ImageGrid read_pgm(const std::string& path);
void write_pgm(const std::string& path, const ImageGrid& img, int maxval = 255,
               bool binary = true);

}  // namespace fbfx
