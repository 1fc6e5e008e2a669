#include "doctest.h"

#include "tempattn/metrics.hpp"

#include <cmath>
#include <limits>

using namespace tempattn;

namespace {

Tensor random_image(Index h, Index w, Index c, Rng& rng, Scalar lo = 0.0, Scalar hi = 1.0) {
  Tensor t = Tensor::zeros({h, w, c});
  for (Index i = 0; i < t.data().size(); ++i) t.data()[i] = rng.range(lo, hi);
  return t;
}

// Independent SSIM evaluation: centred moments instead of raw moments, and a
// freshly computed Gaussian window.
Scalar ssim_loop_oracle(const Tensor& a, const Tensor& b) {
  const Index h = a.shape()[0], w = a.shape()[1], c = a.shape()[2];
  std::vector<Scalar> kern(11 * 11);
  Scalar ksum = 0.0;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      const Scalar di = i - 5.0, dj = j - 5.0;
      kern[static_cast<std::size_t>(i * 11 + j)] = std::exp(-(di * di + dj * dj) / (2.0 * 2.25));
      ksum += kern[static_cast<std::size_t>(i * 11 + j)];
    }
  }
  for (Scalar& k : kern) k /= ksum;

  Scalar acc = 0.0;
  Index n = 0;
  for (Index r0 = 0; r0 + 11 <= h; ++r0) {
    for (Index c0 = 0; c0 + 11 <= w; ++c0) {
      for (Index ch = 0; ch < c; ++ch) {
        Scalar mx = 0.0, my = 0.0;
        for (int i = 0; i < 11; ++i) {
          for (int j = 0; j < 11; ++j) {
            const Scalar k = kern[static_cast<std::size_t>(i * 11 + j)];
            mx += k * a.at3(r0 + i, c0 + j, ch);
            my += k * b.at3(r0 + i, c0 + j, ch);
          }
        }
        Scalar vx = 0.0, vy = 0.0, cov = 0.0;
        for (int i = 0; i < 11; ++i) {
          for (int j = 0; j < 11; ++j) {
            const Scalar k = kern[static_cast<std::size_t>(i * 11 + j)];
            const Scalar dx = a.at3(r0 + i, c0 + j, ch) - mx;
            const Scalar dy = b.at3(r0 + i, c0 + j, ch) - my;
            vx += k * dx * dx;
            vy += k * dy * dy;
            cov += k * dx * dy;
          }
        }
        // E[(x - mu)^2] under the window weights differs from the raw-moment
        // form by mu^2 * (1 - sum w) = 0, so the two agree analytically.
        acc += ((2.0 * mx * my + 1e-4) * (2.0 * cov + 9e-4)) /
               ((mx * mx + my * my + 1e-4) * (vx + vy + 9e-4));
        ++n;
      }
    }
  }
  return acc / static_cast<Scalar>(n);
}

maskgen::MaskImage block_mask(Index h, Index w, Index r0, Index c0, Index rh, Index rw) {
  maskgen::MaskImage m;
  m.h = h;
  m.w = w;
  m.v.assign(static_cast<std::size_t>(h * w), 0);
  for (Index r = r0; r < r0 + rh; ++r)
    for (Index c = c0; c < c0 + rw; ++c) m.v[static_cast<std::size_t>(r * w + c)] = 1;
  return m;
}

}  // namespace

TEST_CASE("identical images: zero error, infinite psnr, unit ssim") {
  Rng rng(201);
  Tensor a = random_image(16, 16, 3, rng);
  CHECK(metrics::mae(a, a) == 0.0);
  CHECK(std::isinf(metrics::psnr(a, a)));
  CHECK(metrics::psnr(a, a) > 0.0);
  CHECK(metrics::ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  auto rep = metrics::compare(a, a);
  CHECK(rep.mae == 0.0);
  CHECK(std::isinf(rep.psnr));
  CHECK(rep.ssim == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mae: constant offset and elementwise oracle") {
  Rng rng(202);
  Tensor a = random_image(12, 9, 3, rng, 0.2, 0.8);
  Tensor b = a.clone();
  b.data() += 0.1;
  CHECK(metrics::mae(a, b) == doctest::Approx(0.1).epsilon(1e-12));

  Tensor c = random_image(12, 9, 3, rng);
  Scalar direct = 0.0;
  for (Index i = 0; i < a.data().size(); ++i) direct += std::abs(a.data()[i] - c.data()[i]);
  direct /= static_cast<Scalar>(a.data().size());
  CHECK(metrics::mae(a, c) == doctest::Approx(direct).epsilon(1e-12));

  CHECK_THROWS_AS(metrics::mae(a, random_image(9, 12, 3, rng)), ShapeError);
}

TEST_CASE("psnr hits the closed-form values") {
  Rng rng(203);
  Tensor a = random_image(10, 10, 3, rng, 0.2, 0.8);
  Tensor b = a.clone();
  b.data() += 0.1;  // MSE = 0.01 up to binary rounding of 0.1^2
  CHECK(std::abs(metrics::psnr(a, b) - 20.0) < 1e-9);

  Tensor c = a.clone();
  c.data() += 0.5;  // MSE = 0.25
  CHECK(std::abs(metrics::psnr(a, c) - 10.0 * std::log10(4.0)) < 1e-9);
  CHECK(metrics::psnr(a, c) == doctest::Approx(6.0206).epsilon(1e-4));
}

TEST_CASE("ssim of inverted checkerboards is negative") {
  Tensor a = Tensor::zeros({16, 16, 1});
  for (Index r = 0; r < 16; ++r)
    for (Index c = 0; c < 16; ++c) a.at3(r, c, 0) = static_cast<Scalar>((r + c) % 2);
  Tensor b = Tensor::zeros({16, 16, 1});
  b.data() = 1.0 - a.data();
  CHECK(metrics::ssim(a, b) < 0.0);
  CHECK(metrics::ssim(a, b) >= -1.0);
}

TEST_CASE("ssim matches an independent per-window loop oracle") {
  Rng rng(204);
  for (int rep = 0; rep < 3; ++rep) {
    Tensor a = random_image(14, 17, 3, rng);
    Tensor b = random_image(14, 17, 3, rng);
    // Correlate b with a so the covariance term matters.
    b.data() = 0.6 * a.data() + 0.4 * b.data();
    CHECK(std::abs(metrics::ssim(a, b) - ssim_loop_oracle(a, b)) < 1e-10);
  }
}

TEST_CASE("ssim is symmetric and rejects images smaller than the window") {
  Rng rng(205);
  Tensor a = random_image(13, 13, 3, rng);
  Tensor b = random_image(13, 13, 3, rng);
  CHECK(std::abs(metrics::ssim(a, b) - metrics::ssim(b, a)) < 1e-12);

  Tensor small_a = random_image(10, 13, 3, rng);
  Tensor small_b = random_image(10, 13, 3, rng);
  CHECK_THROWS_AS(metrics::ssim(small_a, small_b), ConfigError);
}

TEST_CASE("mae and psnr are monotone in additive noise amplitude") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(Rng::mix(206, seed));
    Tensor a = random_image(12, 12, 3, rng, 0.3, 0.7);
    Tensor weak = a.clone();
    Tensor strong = a.clone();
    for (Index i = 0; i < a.data().size(); ++i) {
      const Scalar noise = rng.range(-1.0, 1.0);
      weak.data()[i] += 0.05 * noise;
      strong.data()[i] += 0.20 * noise;
    }
    CHECK(metrics::mae(a, weak) < metrics::mae(a, strong));
    CHECK(metrics::psnr(a, weak) > metrics::psnr(a, strong));
  }
}

TEST_CASE("hole-only variants restrict the pixel set") {
  Rng rng(207);
  Tensor a = random_image(16, 16, 3, rng, 0.2, 0.8);
  maskgen::MaskImage m = block_mask(16, 16, 4, 4, 8, 8);

  // Corrupt only the known region: the hole-restricted error stays zero.
  Tensor b = a.clone();
  for (Index r = 0; r < 16; ++r) {
    for (Index c = 0; c < 16; ++c) {
      if (m.at(r, c)) continue;
      for (Index ch = 0; ch < 3; ++ch) b.at3(r, c, ch) += 0.1;
    }
  }
  CHECK(metrics::mae(a, b) > 0.0);
  CHECK(metrics::mae_hole(a, b, m) == 0.0);
  CHECK(std::isinf(metrics::psnr_hole(a, b, m)));

  // Corrupt only the hole: the restricted error exceeds the full-image one.
  Tensor c = a.clone();
  for (Index r = 0; r < 16; ++r) {
    for (Index col = 0; col < 16; ++col) {
      if (!m.at(r, col)) continue;
      for (Index ch = 0; ch < 3; ++ch) c.at3(r, col, ch) += 0.1;
    }
  }
  CHECK(metrics::mae_hole(a, c, m) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(metrics::mae(a, c) == doctest::Approx(0.1 * 64.0 / 256.0).epsilon(1e-12));
  CHECK(metrics::psnr_hole(a, c, m) < metrics::psnr(a, c));

  // Hole-only SSIM uses windows centred in the hole; identical-in-hole
  // images with corrupted surroundings still drop below 1 because windows
  // overlap the known region, but stay above the full-image value.
  CHECK(metrics::ssim_hole(a, c, m) < 1.0);

  auto rep = metrics::compare_hole(a, c, m);
  CHECK(rep.mae == doctest::Approx(0.1).epsilon(1e-12));

  maskgen::MaskImage empty = block_mask(16, 16, 0, 0, 0, 0);
  CHECK_THROWS_AS(metrics::mae_hole(a, b, empty), ConfigError);
  CHECK_THROWS_AS(metrics::compare_hole(a, b, empty), ConfigError);

  maskgen::MaskImage wrong = block_mask(8, 8, 0, 0, 2, 2);
  CHECK_THROWS_AS(metrics::mae_hole(a, b, wrong), ShapeError);
}

TEST_CASE("hole-only ssim needs a window centre inside the hole") {
  Rng rng(208);
  Tensor a = random_image(16, 16, 3, rng);
  Tensor b = random_image(16, 16, 3, rng);
  // Missing pixels only in the outer frame: centres (5..10) never hit them.
  maskgen::MaskImage m = block_mask(16, 16, 0, 0, 1, 16);
  CHECK_THROWS_AS(metrics::ssim_hole(a, b, m), ConfigError);
}
