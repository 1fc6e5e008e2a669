#pragma once

#include "tempattn/types.hpp"

#include <cstdint>

namespace tempattn::maskgen {

// Binary raster: 1 = missing (to be inpainted), 0 = known.
struct MaskImage {
  Index h = 0;
  Index w = 0;
  std::vector<std::uint8_t> v;

  MaskImage() = default;
  MaskImage(Index h_, Index w_) : h(h_), w(w_), v(static_cast<size_t>(h_ * w_), 0) {}

  std::uint8_t& at(Index i, Index j) { return v[static_cast<size_t>(i * w + j)]; }
  std::uint8_t at(Index i, Index j) const { return v[static_cast<size_t>(i * w + j)]; }

  Index missing_count() const {
    Index n = 0;
    for (auto x : v) n += x;
    return n;
  }
  Scalar ratio() const { return static_cast<Scalar>(missing_count()) / static_cast<Scalar>(h * w); }
};

// Brush parameters are expressed at a 256-pixel reference scale and multiplied
// by min(h, w)/256 at generation time.
struct BrushConfig {
  int strokes_min = 1;
  int strokes_max = 4;
  int vertices_min = 4;
  int vertices_max = 12;
  Scalar width_min = 5.0;
  Scalar width_max = 24.0;
  Scalar segment_min = 10.0;
  Scalar segment_max = 40.0;
  Scalar square_side = 96.0;
};

// Union of random thick polyline strokes (circular caps and joints) and one
// axis-aligned square at a uniform random position. Deterministic in the seed.
MaskImage generate_freeform_mask(Index h, Index w, std::uint64_t seed,
                                 const BrushConfig& cfg = {});

// Block-max downsampling: a low-resolution cell is missing when any covered
// high-resolution pixel is missing. The factor must divide both dimensions.
MaskImage downsample_mask(const MaskImage& m, Index factor);

// Key-patch validity at the geometry of non-padded patch extraction with the
// given patch size and stride: 1 when the s x s window contains no missing
// pixel, 0 otherwise. Output is row-major over key positions.
std::vector<std::uint8_t> binarize_patch_mask(const MaskImage& low, int s, int stride);

}  // namespace tempattn::maskgen
