#include "tempattn/metrics.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace tempattn::metrics {
namespace {

constexpr Index kWindow = 11;
constexpr Scalar kSigma = 1.5;
constexpr Scalar kC1 = 0.01 * 0.01;  // (K1 * L)^2 with L = 1
constexpr Scalar kC2 = 0.03 * 0.03;  // (K2 * L)^2

void check_pair(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 3 || b.shape().size() != 3 || !a.same_shape(b)) {
    throw ShapeError("metric inputs must be H x W x C images of the same shape, got " +
                     shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  }
}

void check_mask(const Tensor& a, const maskgen::MaskImage& mask) {
  if (a.shape()[0] != mask.h || a.shape()[1] != mask.w) {
    throw ShapeError("mask size does not match the images");
  }
  if (mask.missing_count() == 0) {
    throw ConfigError("hole-only metric requested but the mask has no missing pixels");
  }
}

Scalar mse_over(const Tensor& a, const Tensor& b, const maskgen::MaskImage* mask) {
  const Index h = a.shape()[0], w = a.shape()[1], c = a.shape()[2];
  Scalar acc = 0.0;
  Index n = 0;
  for (Index r = 0; r < h; ++r) {
    for (Index col = 0; col < w; ++col) {
      if (mask && !mask->at(r, col)) continue;
      for (Index ch = 0; ch < c; ++ch) {
        const Scalar d = a.at3(r, col, ch) - b.at3(r, col, ch);
        acc += d * d;
        ++n;
      }
    }
  }
  return acc / static_cast<Scalar>(n);
}

Scalar mae_over(const Tensor& a, const Tensor& b, const maskgen::MaskImage* mask) {
  const Index h = a.shape()[0], w = a.shape()[1], c = a.shape()[2];
  Scalar acc = 0.0;
  Index n = 0;
  for (Index r = 0; r < h; ++r) {
    for (Index col = 0; col < w; ++col) {
      if (mask && !mask->at(r, col)) continue;
      for (Index ch = 0; ch < c; ++ch) {
        acc += std::abs(a.at3(r, col, ch) - b.at3(r, col, ch));
        ++n;
      }
    }
  }
  return acc / static_cast<Scalar>(n);
}

Scalar psnr_of_mse(Scalar mse) {
  if (mse == 0.0) return std::numeric_limits<Scalar>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

const std::vector<Scalar>& gaussian_window() {
  static const std::vector<Scalar> kernel = [] {
    std::vector<Scalar> k(kWindow * kWindow);
    const Scalar mid = (kWindow - 1) / 2.0;
    Scalar total = 0.0;
    for (Index i = 0; i < kWindow; ++i) {
      for (Index j = 0; j < kWindow; ++j) {
        const Scalar di = static_cast<Scalar>(i) - mid;
        const Scalar dj = static_cast<Scalar>(j) - mid;
        k[static_cast<std::size_t>(i * kWindow + j)] =
            std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
        total += k[static_cast<std::size_t>(i * kWindow + j)];
      }
    }
    for (Scalar& x : k) x /= total;
    return k;
  }();
  return kernel;
}

// Mean local SSIM; when `mask` is set, only windows whose centre pixel is
// missing contribute.
Scalar ssim_over(const Tensor& a, const Tensor& b, const maskgen::MaskImage* mask) {
  const Index h = a.shape()[0], w = a.shape()[1], c = a.shape()[2];
  if (h < kWindow || w < kWindow) {
    throw ConfigError("ssim needs images of at least " + std::to_string(kWindow) + "x" +
                      std::to_string(kWindow) + ", got " + shape_to_string(a.shape()));
  }
  const std::vector<Scalar>& kern = gaussian_window();
  const Index half = kWindow / 2;
  Scalar acc = 0.0;
  Index n = 0;
  for (Index r0 = 0; r0 + kWindow <= h; ++r0) {
    for (Index c0 = 0; c0 + kWindow <= w; ++c0) {
      if (mask && !mask->at(r0 + half, c0 + half)) continue;
      for (Index ch = 0; ch < c; ++ch) {
        Scalar mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
        for (Index i = 0; i < kWindow; ++i) {
          for (Index j = 0; j < kWindow; ++j) {
            const Scalar k = kern[static_cast<std::size_t>(i * kWindow + j)];
            const Scalar x = a.at3(r0 + i, c0 + j, ch);
            const Scalar y = b.at3(r0 + i, c0 + j, ch);
            mx += k * x;
            my += k * y;
            mxx += k * x * x;
            myy += k * y * y;
            mxy += k * x * y;
          }
        }
        const Scalar vx = mxx - mx * mx;
        const Scalar vy = myy - my * my;
        const Scalar cov = mxy - mx * my;
        acc += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
               ((mx * mx + my * my + kC1) * (vx + vy + kC2));
        ++n;
      }
    }
  }
  if (n == 0) throw ConfigError("hole-only ssim: no window centre falls inside the hole");
  return acc / static_cast<Scalar>(n);
}

}  // namespace

Scalar mae(const Tensor& a, const Tensor& b) {
  check_pair(a, b);
  return mae_over(a, b, nullptr);
}

Scalar psnr(const Tensor& a, const Tensor& b) {
  check_pair(a, b);
  return psnr_of_mse(mse_over(a, b, nullptr));
}

Scalar ssim(const Tensor& a, const Tensor& b) {
  check_pair(a, b);
  return ssim_over(a, b, nullptr);
}

Scalar mae_hole(const Tensor& a, const Tensor& b, const maskgen::MaskImage& mask) {
  check_pair(a, b);
  check_mask(a, mask);
  return mae_over(a, b, &mask);
}

Scalar psnr_hole(const Tensor& a, const Tensor& b, const maskgen::MaskImage& mask) {
  check_pair(a, b);
  check_mask(a, mask);
  return psnr_of_mse(mse_over(a, b, &mask));
}

Scalar ssim_hole(const Tensor& a, const Tensor& b, const maskgen::MaskImage& mask) {
  check_pair(a, b);
  check_mask(a, mask);
  return ssim_over(a, b, &mask);
}

MetricReport compare(const Tensor& a, const Tensor& b) {
  return {mae(a, b), psnr(a, b), ssim(a, b)};
}

MetricReport compare_hole(const Tensor& a, const Tensor& b, const maskgen::MaskImage& mask) {
  return {mae_hole(a, b, mask), psnr_hole(a, b, mask), ssim_hole(a, b, mask)};
}

}  // namespace tempattn::metrics
