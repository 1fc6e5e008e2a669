#include "tempattn/losses.hpp"

#include <cmath>

namespace tempattn::loss {

Tensor l1_mean(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("l1_mean: shapes differ, " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  return mean_all(abs_op(sub(a, b)));
}

PerceptualProxy::PerceptualProxy(std::uint64_t seed) {
  Rng rng(Rng::mix(seed, 0x70657263ULL));
  auto init = [&](Shape shape, Scalar fan_in) {
    Tensor t = Tensor::zeros(std::move(shape));
    const Scalar stddev = std::sqrt(2.0 / fan_in);
    for (Index i = 0; i < t.data().size(); ++i) t.data()[i] = rng.normal() * stddev;
    return t;  // requires_grad stays false: the extractor is frozen
  };
  w1_ = init({3, 3, 3, 16}, 3.0 * 3.0 * 3.0);
  b1_ = Tensor::zeros({16});
  w2_ = init({3, 3, 16, 32}, 3.0 * 3.0 * 16.0);
  b2_ = Tensor::zeros({32});
}

Tensor PerceptualProxy::forward(const Tensor& image) const {
  if (image.shape().size() != 3 || image.shape()[2] != 3) {
    throw ShapeError("perceptual proxy expects an H x W x 3 image, got " +
                     shape_to_string(image.shape()));
  }
  Tensor h = leaky_relu(conv2d(image, w1_, b1_, 1, 1, 1), slope_);
  return leaky_relu(conv2d(h, w2_, b2_, 1, 1, 1), slope_);
}

Tensor perceptual_loss(const PerceptualProxy& proxy, const Tensor& a, const Tensor& b) {
  return l1_mean(proxy.forward(a), proxy.forward(b));
}

Tensor hinge_d_real(const Tensor& logit) {
  return mean_all(relu(add_const(mul_const(logit, -1.0), 1.0)));
}

Tensor hinge_d_fake(const Tensor& logit) { return mean_all(relu(add_const(logit, 1.0))); }

Tensor adv_g(const Tensor& logit) { return mul_const(mean_all(logit), -1.0); }

Tensor scalar_mean(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("scalar_mean of an empty batch");
  Tensor acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return mul_const(acc, 1.0 / static_cast<Scalar>(xs.size()));
}

Tensor combine(const GeneratorTerms& t, const LossWeights& w) {
  Tensor total = mul_const(t.recon_coarse, w.l1_coarse);
  total = add(total, mul_const(t.recon_refine, w.l1_refine));
  total = add(total, mul_const(t.perceptual, w.perceptual));
  total = add(total, mul_const(t.adversarial, w.adversarial));
  return total;
}

}  // namespace tempattn::loss
