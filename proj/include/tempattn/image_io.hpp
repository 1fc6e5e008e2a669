#pragma once

#include "tempattn/mask.hpp"
#include "tempattn/tensor.hpp"

#include <string>

namespace tempattn::io {

// Binary Netpbm, maxval 255. P6 loads as H x W x 3, P5 as H x W x 1, both
// mapped to [0, 1] (byte / 255). Malformed headers raise IoError with the
// byte offset; short rasters raise IoError naming expected vs actual counts.
Tensor read_image(const std::string& path);

// H x W x 3 -> P6, H x W x 1 -> P5; values clamped to [0, 1] and rounded to
// bytes. write(read(x)) is byte-identical for valid maxval-255 files.
void write_image(const std::string& path, const Tensor& image);

// Masks travel as P5: 0 = known (black), 255 = missing.
void write_mask(const std::string& path, const maskgen::MaskImage& mask);
maskgen::MaskImage read_mask(const std::string& path);

}  // namespace tempattn::io
