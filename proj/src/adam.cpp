#include "tempattn/adam.hpp"

#include <cmath>

namespace tempattn::opt {

Adam::Adam(const nets::ParamSet& params, Scalar lr, Scalar beta1, Scalar beta2, Scalar eps)
    : params_(params.items), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  state_.reserve(2 * params_.size());
  for (const auto& [name, p] : params_) {
    state_.emplace_back(name + ".m", Tensor::zeros(p.shape()));
    state_.emplace_back(name + ".v", Tensor::zeros(p.shape()));
  }
}

void Adam::step() {
  ++t_;
  const Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(t_));
  const Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& [name, p] = params_[i];
    ArrayX& m = state_[2 * i].second.data();
    ArrayX& v = state_[2 * i + 1].second.data();
    if (p.has_grad()) {
      const ArrayX& g = p.grad();
      if (!g.isFinite().all()) {
        throw NumericError("non-finite gradient in parameter '" + name + "'");
      }
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g * g;
    } else {  // no gradient recorded: same update as an explicit zero gradient
      m *= beta1_;
      v *= beta2_;
    }
    p.data() -= lr_ * (m / bc1) / ((v / bc2).sqrt() + eps_);
  }
}

}  // namespace tempattn::opt
