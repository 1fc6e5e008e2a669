#pragma once

#include "tempattn/mask.hpp"
#include "tempattn/tensor.hpp"

namespace tempattn::sketch {

struct GrayMap {
  Index h = 0, w = 0;
  std::vector<Scalar> v;

  Scalar& at(Index r, Index c) { return v[static_cast<std::size_t>(r * w + c)]; }
  Scalar at(Index r, Index c) const { return v[static_cast<std::size_t>(r * w + c)]; }
};

struct BitMap {
  Index h = 0, w = 0;
  std::vector<std::uint8_t> v;

  std::uint8_t& at(Index r, Index c) { return v[static_cast<std::size_t>(r * w + c)]; }
  std::uint8_t at(Index r, Index c) const { return v[static_cast<std::size_t>(r * w + c)]; }
  Index count() const;
};

struct SketchConfig {
  Scalar threshold = 0.65;  // strict: kept only when the edge response exceeds it
  Index min_area = 100;     // components smaller than this are removed
};

// Rec.601 luminance of an H x W x 3 image in [0, 1].
GrayMap luma(const Tensor& rgb);

// Sobel gradient magnitude with replicated borders, normalized by the global
// maximum; a flat image yields an all-zero map.
GrayMap edge_map(const GrayMap& g);

// 1 where e > threshold (strictly).
BitMap binarize(const GrayMap& e, Scalar threshold);

// Remove 8-connected components with fewer than min_area pixels.
BitMap area_open(const BitMap& b, Index min_area);

// Topology-preserving thinning: repeated directional sub-passes (north,
// south, east, west) delete border pixels that are simple points, keeping
// endpoints and isolated pixels, until nothing changes. The result is a
// subset of the input with the same number of 8-connected components and
// the same holes, and the transform is idempotent.
BitMap skeletonize(const BitMap& b);

// Full pipeline on an H x W x 3 image in [0, 1].
BitMap compute_sketch(const Tensor& rgb, const SketchConfig& cfg);

// The sketch restricted to the missing region, as an H x W x 1 plane.
Tensor sketch_channel(const BitMap& sk, const maskgen::MaskImage& mask);

// Number of 8-connected foreground components (exposed for validation).
Index count_components(const BitMap& b);
// Number of 4-connected background components, counting the surrounding
// plane as part of the outside (so a solid blob yields 1 and an annulus 2).
Index count_holes_plus_outside(const BitMap& b);

}  // namespace tempattn::sketch
