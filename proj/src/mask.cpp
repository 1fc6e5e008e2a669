#include "tempattn/mask.hpp"

#include <algorithm>
#include <cmath>

namespace tempattn::maskgen {

namespace {

// Stamps all pixels within `radius` of the segment (r0,c0)-(r1,c1): a thick
// line with circular caps, which also gives circular joints between segments.
void stamp_segment(MaskImage& m, Scalar r0, Scalar c0, Scalar r1, Scalar c1, Scalar radius) {
  const Index lo_i = std::max<Index>(0, static_cast<Index>(std::floor(std::min(r0, r1) - radius)));
  const Index hi_i =
      std::min<Index>(m.h - 1, static_cast<Index>(std::ceil(std::max(r0, r1) + radius)));
  const Index lo_j = std::max<Index>(0, static_cast<Index>(std::floor(std::min(c0, c1) - radius)));
  const Index hi_j =
      std::min<Index>(m.w - 1, static_cast<Index>(std::ceil(std::max(c0, c1) + radius)));
  const Scalar dr = r1 - r0, dc = c1 - c0;
  const Scalar len2 = dr * dr + dc * dc;
  const Scalar rad2 = radius * radius;
  for (Index i = lo_i; i <= hi_i; ++i) {
    for (Index j = lo_j; j <= hi_j; ++j) {
      const Scalar pr = static_cast<Scalar>(i) - r0;
      const Scalar pc = static_cast<Scalar>(j) - c0;
      Scalar t = len2 > 0.0 ? std::clamp((pr * dr + pc * dc) / len2, 0.0, 1.0) : 0.0;
      const Scalar qr = pr - t * dr;
      const Scalar qc = pc - t * dc;
      if (qr * qr + qc * qc <= rad2) m.at(i, j) = 1;
    }
  }
}

}  // namespace

MaskImage generate_freeform_mask(Index h, Index w, std::uint64_t seed, const BrushConfig& cfg) {
  if (h < 16 || w < 16) {
    throw ConfigError("generate_freeform_mask: image must be at least 16x16, got " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  MaskImage m(h, w);
  Rng rng(seed);
  const Scalar scale = static_cast<Scalar>(std::min(h, w)) / 256.0;

  const int strokes = static_cast<int>(rng.between(cfg.strokes_min, cfg.strokes_max));
  for (int s = 0; s < strokes; ++s) {
    const int vertices = static_cast<int>(rng.between(cfg.vertices_min, cfg.vertices_max));
    const Scalar radius = 0.5 * rng.range(cfg.width_min, cfg.width_max) * scale;
    Scalar r = rng.range(0.0, static_cast<Scalar>(h - 1));
    Scalar c = rng.range(0.0, static_cast<Scalar>(w - 1));
    for (int vtx = 1; vtx < vertices; ++vtx) {
      const Scalar angle = rng.range(0.0, 2.0 * M_PI);
      const Scalar length = rng.range(cfg.segment_min, cfg.segment_max) * scale;
      const Scalar nr = r + length * std::sin(angle);
      const Scalar nc = c + length * std::cos(angle);
      stamp_segment(m, r, c, nr, nc, radius);
      r = nr;
      c = nc;
    }
  }

  const Index side =
      std::lround(cfg.square_side * static_cast<Scalar>(std::min(h, w)) / 256.0);
  const Index top = static_cast<Index>(rng.below(static_cast<std::uint64_t>(h - side + 1)));
  const Index left = static_cast<Index>(rng.below(static_cast<std::uint64_t>(w - side + 1)));
  for (Index i = top; i < top + side; ++i) {
    for (Index j = left; j < left + side; ++j) m.at(i, j) = 1;
  }
  return m;
}

MaskImage downsample_mask(const MaskImage& m, Index factor) {
  if (factor < 1 || m.h % factor != 0 || m.w % factor != 0) {
    throw ConfigError("downsample_mask: factor " + std::to_string(factor) +
                      " must divide mask size " + std::to_string(m.h) + "x" + std::to_string(m.w));
  }
  MaskImage out(m.h / factor, m.w / factor);
  for (Index i = 0; i < out.h; ++i) {
    for (Index j = 0; j < out.w; ++j) {
      std::uint8_t any = 0;
      for (Index di = 0; di < factor && !any; ++di) {
        for (Index dj = 0; dj < factor && !any; ++dj) {
          any = m.at(i * factor + di, j * factor + dj);
        }
      }
      out.at(i, j) = any;
    }
  }
  return out;
}

std::vector<std::uint8_t> binarize_patch_mask(const MaskImage& low, int s, int stride) {
  if (s < 1 || s % 2 == 0) throw ConfigError("binarize_patch_mask: patch size must be odd");
  if (stride < 1) throw ConfigError("binarize_patch_mask: stride must be positive");
  if (low.h < s || low.w < s) {
    throw ConfigError("binarize_patch_mask: patch " + std::to_string(s) +
                      " does not fit inside mask " + std::to_string(low.h) + "x" +
                      std::to_string(low.w));
  }
  const Index nr = (low.h - s) / stride + 1;
  const Index nc = (low.w - s) / stride + 1;
  std::vector<std::uint8_t> valid(static_cast<size_t>(nr * nc), 0);
  for (Index r = 0; r < nr; ++r) {
    for (Index c = 0; c < nc; ++c) {
      Index sum = 0;
      for (Index di = 0; di < s; ++di) {
        for (Index dj = 0; dj < s; ++dj) sum += low.at(r * stride + di, c * stride + dj);
      }
      // A key is usable exactly when its patch contains no missing pixel.
      valid[static_cast<size_t>(r * nc + c)] = (sum == 0) ? 1 : 0;
    }
  }
  return valid;
}

}  // namespace tempattn::maskgen
