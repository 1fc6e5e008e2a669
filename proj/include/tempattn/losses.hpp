#pragma once

#include "tempattn/ops.hpp"

#include <vector>

namespace tempattn::loss {

// Term weights for the generator objective; the defaults are the training
// configuration's.
struct LossWeights {
  Scalar l1_coarse = 1.2;
  Scalar l1_refine = 1.0;
  Scalar perceptual = 0.004;
  Scalar adversarial = 0.01;
};

// mean |a - b| over all elements.
Tensor l1_mean(const Tensor& a, const Tensor& b);

// Frozen random feature extractor for the perceptual term: two 3x3 convs
// (3 -> 16 -> 32) with leaky ReLU, weights fixed at construction and never
// trained. Gradients still flow through it to the images.
class PerceptualProxy {
 public:
  explicit PerceptualProxy(std::uint64_t seed);
  Tensor forward(const Tensor& image) const;  // H x W x 3 -> H x W x 32

 private:
  Tensor w1_, b1_, w2_, b2_;
  Scalar slope_ = 0.2;
};

// mean |proxy(a) - proxy(b)|.
Tensor perceptual_loss(const PerceptualProxy& proxy, const Tensor& a, const Tensor& b);

// Hinge objective, one scalar logit tensor at a time.
Tensor hinge_d_real(const Tensor& logit);  // mean [1 - D(x)]_+
Tensor hinge_d_fake(const Tensor& logit);  // mean [1 + D(G(z))]_+
Tensor adv_g(const Tensor& logit);         // -mean D(G(z))

// Average of scalar tensors (batch aggregation without a stacking op).
Tensor scalar_mean(const std::vector<Tensor>& xs);

// Per-sample generator terms and their weighted combination.
struct GeneratorTerms {
  Tensor recon_coarse;  // mean |coarse - gt|
  Tensor recon_refine;  // mean |composited refine - gt|
  Tensor perceptual;    // proxy-feature L1 on the coarse prediction
  Tensor adversarial;   // -D(composite)
};

Tensor combine(const GeneratorTerms& t, const LossWeights& w);

}  // namespace tempattn::loss
