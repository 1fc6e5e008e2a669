#pragma once

#include "tempattn/networks.hpp"

namespace tempattn::opt {

// Standard Adam with bias correction over a fixed set of named parameters.
// First and second moments are exposed as named tensors for checkpointing.
class Adam {
 public:
  Adam(const nets::ParamSet& params, Scalar lr, Scalar beta1, Scalar beta2, Scalar eps);

  // One update from the parameters' current gradients (missing gradients
  // count as zero). A non-finite gradient aborts with the parameter name.
  void step();
  Index steps_taken() const { return t_; }
  void set_steps_taken(Index t) { t_ = t; }

  // Moment buffers, named "<param>.m" / "<param>.v" in parameter order.
  const std::vector<std::pair<std::string, Tensor>>& state() const { return state_; }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::pair<std::string, Tensor>> state_;  // m then v per parameter
  Scalar lr_, beta1_, beta2_, eps_;
  Index t_ = 0;
};

}  // namespace tempattn::opt
