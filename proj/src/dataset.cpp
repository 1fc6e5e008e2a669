#include "tempattn/dataset.hpp"

#include <cmath>

namespace tempattn::data {
namespace {

struct Color {
  Scalar r, g, b;
};

Color random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

void put(Tensor& img, Index r, Index c, const Color& color) {
  img.at3(r, c, 0) = color.r;
  img.at3(r, c, 1) = color.g;
  img.at3(r, c, 2) = color.b;
}

Color mix_colors(const Color& a, const Color& b, Scalar t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

// Sinusoidal bands between two colors. Band-limited on purpose: washboard
// patterns near the pixel grid's Nyquist rate are not reproducible through
// the generator's downsampling bottleneck and would put a hard floor under
// the reconstruction loss.
void stripes(Tensor& img, Index n, Rng& rng) {
  const Color a = random_color(rng), b = random_color(rng);
  const Scalar angle = rng.range(0.0, 3.14159265358979323846);
  const Scalar period = rng.range(8.0, 20.0);
  const Scalar dx = std::cos(angle), dy = std::sin(angle);
  const Scalar phase = rng.range(0.0, period);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      const Scalar u = dy * static_cast<Scalar>(r) + dx * static_cast<Scalar>(c) + phase;
      const Scalar t =
          0.5 + 0.5 * std::sin(2.0 * 3.14159265358979323846 * u / period);
      put(img, r, c, mix_colors(a, b, t));
    }
  }
}

void checkerboard(Tensor& img, Index n, Rng& rng) {
  const Color a = random_color(rng), b = random_color(rng);
  const Index cell = 6 + static_cast<Index>(rng.below(7));
  const Index or_ = static_cast<Index>(rng.below(static_cast<std::uint64_t>(cell)));
  const Index oc = static_cast<Index>(rng.below(static_cast<std::uint64_t>(cell)));
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      const bool on = (((r + or_) / cell) + ((c + oc) / cell)) % 2 == 0;
      put(img, r, c, on ? a : b);
    }
  }
}

void gradient(Tensor& img, Index n, Rng& rng) {
  const Color a = random_color(rng), b = random_color(rng);
  const Scalar angle = rng.range(0.0, 2.0 * 3.14159265358979323846);
  const Scalar dx = std::cos(angle), dy = std::sin(angle);
  Scalar lo = 0.0, hi = 0.0;
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      const Scalar u = dy * static_cast<Scalar>(r) + dx * static_cast<Scalar>(c);
      lo = std::min(lo, u);
      hi = std::max(hi, u);
    }
  }
  const Scalar span = hi > lo ? hi - lo : 1.0;
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      const Scalar u = dy * static_cast<Scalar>(r) + dx * static_cast<Scalar>(c);
      put(img, r, c, mix_colors(a, b, (u - lo) / span));
    }
  }
}

void blobs(Tensor& img, Index n, Rng& rng) {
  const Color bg = random_color(rng);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) put(img, r, c, bg);
  const int k = 3 + static_cast<int>(rng.below(4));
  for (int i = 0; i < k; ++i) {
    const Color fg = random_color(rng);
    const Scalar cy = rng.range(0.0, static_cast<Scalar>(n));
    const Scalar cx = rng.range(0.0, static_cast<Scalar>(n));
    const Scalar radius = rng.range(static_cast<Scalar>(n) / 8.0, static_cast<Scalar>(n) / 3.0);
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < n; ++c) {
        const Scalar d2 = (static_cast<Scalar>(r) - cy) * (static_cast<Scalar>(r) - cy) +
                          (static_cast<Scalar>(c) - cx) * (static_cast<Scalar>(c) - cx);
        const Scalar t = std::exp(-d2 / (2.0 * radius * radius / 4.0));
        Color cur{img.at3(r, c, 0), img.at3(r, c, 1), img.at3(r, c, 2)};
        put(img, r, c, mix_colors(cur, fg, t));
      }
    }
  }
}

}  // namespace

Tensor make_texture(Index size, std::uint64_t seed) {
  if (size < 1) throw ConfigError("texture size must be positive");
  Rng rng(Rng::mix(seed, 0x74657874ULL));
  Tensor img = Tensor::zeros({size, size, 3});
  switch (rng.below(4)) {
    case 0: stripes(img, size, rng); break;
    case 1: checkerboard(img, size, rng); break;
    case 2: gradient(img, size, rng); break;
    default: blobs(img, size, rng); break;
  }
  return img;
}

Tensor flip_horizontal(const Tensor& image) {
  if (image.shape().size() != 3) throw ShapeError("flip expects an H x W x C image");
  const Index h = image.shape()[0], w = image.shape()[1], c = image.shape()[2];
  Tensor out = Tensor::zeros(image.shape());
  for (Index r = 0; r < h; ++r) {
    for (Index col = 0; col < w; ++col) {
      for (Index ch = 0; ch < c; ++ch) out.at3(r, col, ch) = image.at3(r, w - 1 - col, ch);
    }
  }
  return out;
}

Tensor ToyDataset::image(Index i) const {
  if (i < 0 || i >= count) {
    throw ConfigError("dataset index " + std::to_string(i) + " out of range [0, " +
                      std::to_string(count) + ")");
  }
  return make_texture(image_size, Rng::mix(seed, static_cast<std::uint64_t>(i)));
}

}  // namespace tempattn::data
