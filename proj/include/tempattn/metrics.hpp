#pragma once

#include "tempattn/mask.hpp"
#include "tempattn/tensor.hpp"

namespace tempattn::metrics {

// All metrics take H x W x C images with values in [0, 1] and identical
// shapes. PSNR of identical images is the +infinity sentinel.
struct MetricReport {
  Scalar mae = 0.0;
  Scalar psnr = 0.0;
  Scalar ssim = 0.0;
};

Scalar mae(const Tensor& a, const Tensor& b);
Scalar psnr(const Tensor& a, const Tensor& b);
// Mean local SSIM over fully contained 11x11 Gaussian windows (sigma 1.5,
// K1 0.01, K2 0.03, dynamic range 1), averaged across channels. Images
// smaller than the window are rejected.
Scalar ssim(const Tensor& a, const Tensor& b);

// Restricted variants: MAE/PSNR over missing pixels only; SSIM over windows
// whose centre pixel is missing. An empty mask is a configuration error.
Scalar mae_hole(const Tensor& a, const Tensor& b, const maskgen::MaskImage& mask);
Scalar psnr_hole(const Tensor& a, const Tensor& b, const maskgen::MaskImage& mask);
Scalar ssim_hole(const Tensor& a, const Tensor& b, const maskgen::MaskImage& mask);

MetricReport compare(const Tensor& a, const Tensor& b);
MetricReport compare_hole(const Tensor& a, const Tensor& b, const maskgen::MaskImage& mask);

}  // namespace tempattn::metrics
