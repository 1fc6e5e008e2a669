#include "tempattn/sketch.hpp"

#include <array>
#include <cmath>
#include <deque>

namespace tempattn::sketch {
namespace {

// Ring positions around a pixel, clockwise from north.
constexpr std::array<std::array<int, 2>, 8> kRing = {
    {{-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};

bool fg_at(const BitMap& b, Index r, Index c) {
  return r >= 0 && r < b.h && c >= 0 && c < b.w && b.at(r, c) != 0;
}

// A pixel may be deleted without changing the topology iff its foreground
// neighbours form exactly one 8-connected component and the background
// neighbours that touch it edge-on form exactly one 4-connected component.
bool is_simple(const std::array<bool, 8>& fg) {
  int seen_fg = 0;
  std::array<int, 8> comp{};
  comp.fill(-1);
  int n_fg_comp = 0;
  for (int i = 0; i < 8; ++i) {
    if (!fg[static_cast<std::size_t>(i)] || comp[static_cast<std::size_t>(i)] >= 0) continue;
    ++n_fg_comp;
    std::deque<int> queue{i};
    comp[static_cast<std::size_t>(i)] = n_fg_comp;
    while (!queue.empty()) {
      int a = queue.front();
      queue.pop_front();
      ++seen_fg;
      for (int j = 0; j < 8; ++j) {
        if (!fg[static_cast<std::size_t>(j)] || comp[static_cast<std::size_t>(j)] >= 0) continue;
        const int dr = std::abs(kRing[static_cast<std::size_t>(a)][0] -
                                kRing[static_cast<std::size_t>(j)][0]);
        const int dc = std::abs(kRing[static_cast<std::size_t>(a)][1] -
                                kRing[static_cast<std::size_t>(j)][1]);
        if (std::max(dr, dc) == 1) {  // true 8-adjacency between ring cells
          comp[static_cast<std::size_t>(j)] = n_fg_comp;
          queue.push_back(j);
        }
      }
    }
  }
  if (n_fg_comp != 1) return false;
  (void)seen_fg;

  // Background 4-components that contain a 4-neighbour (ring indices 0, 2,
  // 4, 6 are the edge positions).
  comp.fill(-1);
  int n_bg_comp = 0;
  for (int start : {0, 2, 4, 6}) {
    if (fg[static_cast<std::size_t>(start)] || comp[static_cast<std::size_t>(start)] >= 0) {
      continue;
    }
    ++n_bg_comp;
    std::deque<int> queue{start};
    comp[static_cast<std::size_t>(start)] = n_bg_comp;
    while (!queue.empty()) {
      int a = queue.front();
      queue.pop_front();
      for (int j = 0; j < 8; ++j) {
        if (fg[static_cast<std::size_t>(j)] || comp[static_cast<std::size_t>(j)] >= 0) continue;
        const int dr = std::abs(kRing[static_cast<std::size_t>(a)][0] -
                                kRing[static_cast<std::size_t>(j)][0]);
        const int dc = std::abs(kRing[static_cast<std::size_t>(a)][1] -
                                kRing[static_cast<std::size_t>(j)][1]);
        if (dr + dc == 1) {  // 4-adjacency
          comp[static_cast<std::size_t>(j)] = n_bg_comp;
          queue.push_back(j);
        }
      }
    }
  }
  return n_bg_comp == 1;
}

Index flood_components(const BitMap& b, bool eight_connected, std::vector<Index>* sizes) {
  std::vector<int> label(static_cast<std::size_t>(b.h * b.w), -1);
  Index n = 0;
  for (Index r = 0; r < b.h; ++r) {
    for (Index c = 0; c < b.w; ++c) {
      if (!b.at(r, c) || label[static_cast<std::size_t>(r * b.w + c)] >= 0) continue;
      Index size = 0;
      std::deque<std::pair<Index, Index>> queue{{r, c}};
      label[static_cast<std::size_t>(r * b.w + c)] = static_cast<int>(n);
      while (!queue.empty()) {
        auto [ar, ac] = queue.front();
        queue.pop_front();
        ++size;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (!eight_connected && std::abs(dr) + std::abs(dc) != 1) continue;
            const Index nr = ar + dr, nc = ac + dc;
            if (nr < 0 || nr >= b.h || nc < 0 || nc >= b.w) continue;
            if (!b.at(nr, nc) || label[static_cast<std::size_t>(nr * b.w + nc)] >= 0) continue;
            label[static_cast<std::size_t>(nr * b.w + nc)] = static_cast<int>(n);
            queue.emplace_back(nr, nc);
          }
        }
      }
      if (sizes) sizes->push_back(size);
      ++n;
    }
  }
  return n;
}

}  // namespace

Index BitMap::count() const {
  Index n = 0;
  for (std::uint8_t x : v) n += (x != 0);
  return n;
}

GrayMap luma(const Tensor& rgb) {
  if (rgb.shape().size() != 3 || rgb.shape()[2] != 3) {
    throw ShapeError("luma expects an H x W x 3 image, got " + shape_to_string(rgb.shape()));
  }
  GrayMap g;
  g.h = rgb.shape()[0];
  g.w = rgb.shape()[1];
  g.v.resize(static_cast<std::size_t>(g.h * g.w));
  for (Index r = 0; r < g.h; ++r) {
    for (Index c = 0; c < g.w; ++c) {
      g.at(r, c) = 0.299 * rgb.at3(r, c, 0) + 0.587 * rgb.at3(r, c, 1) + 0.114 * rgb.at3(r, c, 2);
    }
  }
  return g;
}

GrayMap edge_map(const GrayMap& g) {
  if (g.h < 1 || g.w < 1) throw ShapeError("edge_map on an empty image");
  auto sample = [&](Index r, Index c) {  // replicate borders
    return g.at(std::clamp<Index>(r, 0, g.h - 1), std::clamp<Index>(c, 0, g.w - 1));
  };
  GrayMap e;
  e.h = g.h;
  e.w = g.w;
  e.v.resize(g.v.size());
  Scalar peak = 0.0;
  for (Index r = 0; r < g.h; ++r) {
    for (Index c = 0; c < g.w; ++c) {
      // Sum each sign separately so a flat neighbourhood cancels exactly
      // (identical operation sequences), leaving a true zero response.
      const Scalar gx_pos = sample(r - 1, c + 1) + 2.0 * sample(r, c + 1) + sample(r + 1, c + 1);
      const Scalar gx_neg = sample(r - 1, c - 1) + 2.0 * sample(r, c - 1) + sample(r + 1, c - 1);
      const Scalar gy_pos = sample(r + 1, c - 1) + 2.0 * sample(r + 1, c) + sample(r + 1, c + 1);
      const Scalar gy_neg = sample(r - 1, c - 1) + 2.0 * sample(r - 1, c) + sample(r - 1, c + 1);
      const Scalar gx = gx_pos - gx_neg;
      const Scalar gy = gy_pos - gy_neg;
      e.at(r, c) = std::hypot(gx, gy);
      peak = std::max(peak, e.at(r, c));
    }
  }
  if (peak > 0.0) {
    for (Scalar& x : e.v) x /= peak;
  }
  return e;
}

BitMap binarize(const GrayMap& e, Scalar threshold) {
  BitMap b;
  b.h = e.h;
  b.w = e.w;
  b.v.resize(e.v.size());
  for (std::size_t i = 0; i < e.v.size(); ++i) b.v[i] = e.v[i] > threshold ? 1 : 0;
  return b;
}

BitMap area_open(const BitMap& b, Index min_area) {
  std::vector<int> label(static_cast<std::size_t>(b.h * b.w), -1);
  std::vector<Index> sizes;
  // Label, then keep only labels whose component size reaches min_area.
  int n = 0;
  for (Index r = 0; r < b.h; ++r) {
    for (Index c = 0; c < b.w; ++c) {
      if (!b.at(r, c) || label[static_cast<std::size_t>(r * b.w + c)] >= 0) continue;
      Index size = 0;
      std::deque<std::pair<Index, Index>> queue{{r, c}};
      label[static_cast<std::size_t>(r * b.w + c)] = n;
      while (!queue.empty()) {
        auto [ar, ac] = queue.front();
        queue.pop_front();
        ++size;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const Index nr = ar + dr, nc = ac + dc;
            if (nr < 0 || nr >= b.h || nc < 0 || nc >= b.w) continue;
            if (!b.at(nr, nc) || label[static_cast<std::size_t>(nr * b.w + nc)] >= 0) continue;
            label[static_cast<std::size_t>(nr * b.w + nc)] = n;
            queue.emplace_back(nr, nc);
          }
        }
      }
      sizes.push_back(size);
      ++n;
    }
  }
  BitMap out;
  out.h = b.h;
  out.w = b.w;
  out.v.assign(b.v.size(), 0);
  for (std::size_t i = 0; i < b.v.size(); ++i) {
    if (b.v[i] && sizes[static_cast<std::size_t>(label[i])] >= min_area) out.v[i] = 1;
  }
  return out;
}

BitMap skeletonize(const BitMap& b) {
  BitMap s = b;
  // Directional border tests, in fixed order: a pixel is considered in the
  // north pass only when its north neighbour is background, and so on.
  constexpr std::array<std::array<int, 2>, 4> kDirs = {{{-1, 0}, {1, 0}, {0, 1}, {0, -1}}};
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& dir : kDirs) {
      for (Index r = 0; r < s.h; ++r) {
        for (Index c = 0; c < s.w; ++c) {
          if (!s.at(r, c)) continue;
          if (fg_at(s, r + dir[0], c + dir[1])) continue;  // not a border pixel this pass
          std::array<bool, 8> ring{};
          int neighbours = 0;
          for (std::size_t k = 0; k < 8; ++k) {
            ring[k] = fg_at(s, r + kRing[k][0], c + kRing[k][1]);
            neighbours += ring[k] ? 1 : 0;
          }
          if (neighbours < 2) continue;  // keep endpoints and isolated pixels
          if (!is_simple(ring)) continue;
          s.at(r, c) = 0;  // sequential: later pixels see the deletion
          changed = true;
        }
      }
    }
  }
  return s;
}

BitMap compute_sketch(const Tensor& rgb, const SketchConfig& cfg) {
  return skeletonize(area_open(binarize(edge_map(luma(rgb)), cfg.threshold), cfg.min_area));
}

Tensor sketch_channel(const BitMap& sk, const maskgen::MaskImage& mask) {
  if (sk.h != mask.h || sk.w != mask.w) {
    throw ShapeError("sketch and mask sizes differ");
  }
  Tensor plane = Tensor::zeros({sk.h, sk.w, 1});
  for (Index r = 0; r < sk.h; ++r) {
    for (Index c = 0; c < sk.w; ++c) {
      plane.at3(r, c, 0) = (sk.at(r, c) && mask.at(r, c)) ? 1.0 : 0.0;
    }
  }
  return plane;
}

Index count_components(const BitMap& b) { return flood_components(b, true, nullptr); }

Index count_holes_plus_outside(const BitMap& b) {
  // Invert into a map padded by one background ring so the outside is a
  // single region, then count 4-connected components of the inversion.
  BitMap inv;
  inv.h = b.h + 2;
  inv.w = b.w + 2;
  inv.v.assign(static_cast<std::size_t>(inv.h * inv.w), 1);
  for (Index r = 0; r < b.h; ++r) {
    for (Index c = 0; c < b.w; ++c) inv.at(r + 1, c + 1) = b.at(r, c) ? 0 : 1;
  }
  return flood_components(inv, false, nullptr);
}

}  // namespace tempattn::sketch
