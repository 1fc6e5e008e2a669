#pragma once

#include "tempattn/attention.hpp"

#include <string>
#include <utility>

namespace tempattn::nets {

// Named trainable tensors in registration order; the order is what the
// optimizer and the checkpoint format rely on.
struct ParamSet {
  std::vector<std::pair<std::string, Tensor>> items;

  Tensor add(std::string name, Shape shape) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    items.emplace_back(std::move(name), t);
    return t;
  }
  void zero_grads() const {
    for (const auto& [name, t] : items) t.zero_grad();
  }
};

struct NetConfig {
  Index in_channels = 4;  // RGB + mask (+ sketch when user-guided)
  Index base_width = 16;  // must be even
  Index image_size = 32;  // square input, divisible by 8
  int heads = 2;
  int patch_size = 3;
  int key_stride = 1;
  Scalar lambda_m = 1e4;
  bool increasing_softplus = false;

  void validate() const;
};

struct Conv2dLayer {
  Tensor w, b;
  int stride = 1;
  int dilation = 1;
  int pad = 0;

  Tensor forward(const Tensor& x) const { return conv2d(x, w, b, stride, dilation, pad); }
};

// Feature conv modulated by a learned sigmoid gate from a parallel conv.
struct GatedConv {
  Conv2dLayer feature, gate;
  Scalar slope = 0.2;

  Tensor forward(const Tensor& x) const {
    return mul(leaky_relu(feature.forward(x), slope), sigmoid(gate.forward(x)));
  }
};

// Power-iteration state for one spectrally normalized weight. `u` lives in
// the out-feature space of the weight viewed as (out-features x rest).
struct SpectralState {
  Tensor u, v;
};

// One power-iteration update of (u, v), then w scaled by 1/max(sigma, 1e-12)
// with sigma = u^T W v treated as a constant.
Tensor spectral_normalize(const Tensor& w, Index out_features, SpectralState& st);
// Rescale with the current (u, v) without advancing the iteration.
Tensor spectral_normalize_frozen(const Tensor& w, Index out_features, const SpectralState& st);
// The current estimate sigma = u^T W v.
Scalar spectral_sigma(const Tensor& w, Index out_features, const SpectralState& st);

// out * M + in * (1 - M): known pixels pass through bit-exactly.
Tensor composite_with_mask(const Tensor& out, const Tensor& in, const maskgen::MaskImage& mask);

// Mask raster as a broadcastable constant cube (1 = missing) with c channels.
Tensor mask_to_cube(const maskgen::MaskImage& mask, Index channels);

// Encoder-decoder with gated convolutions and a dilated middle; maps the
// masked input to a full coarse prediction in (-1, 1).
class CoarseNet {
 public:
  CoarseNet(const NetConfig& cfg, const std::string& prefix, ParamSet& params, Rng& rng);
  Tensor forward(const Tensor& x) const;

 private:
  std::vector<GatedConv> enc_;      // encoder + dilated middle + decoder gated stack
  std::vector<int> upsample_before_;  // indices in enc_ preceded by 2x upsampling
  Conv2dLayer out_;                 // final plain conv, tanh outside
};

// Two parallel encoders (plain conv branch and attention branch with the
// multi-head temperature attention at quarter resolution), concatenated and
// decoded to the refined image. Also exposes the temperatures it used.
class RefineNet {
 public:
  RefineNet(const NetConfig& cfg, const std::string& prefix, ParamSet& params, Rng& rng);

  struct Result {
    Tensor image;         // H x W x 3 in (-1, 1)
    Tensor temperatures;  // [K]
  };
  Result forward(const Tensor& x, const maskgen::MaskImage& mask_low) const;

 private:
  std::vector<GatedConv> conv_branch_;
  std::vector<GatedConv> attn_pre_, attn_post_;
  attn::MhtmaParams mhtma_;
  attn::TemperatureNet tnet_;
  std::vector<GatedConv> dec_;
  std::vector<int> dec_upsample_before_;
  Conv2dLayer out_;
};

// Global branch on the full image, local branch on a crop around the hole,
// joined by a fully connected head into one raw logit. All weights are
// spectrally normalized.
class Discriminator {
 public:
  Discriminator(const NetConfig& cfg, const std::string& prefix, ParamSet& params, Rng& rng);

  // Same crop_seed (and mask) => same local crop; the trainer reuses one seed
  // for the real and generated image of a step.
  Tensor forward(const Tensor& image, const maskgen::MaskImage& mask,
                 std::uint64_t crop_seed) const;

  // Advances every power iteration by one step; called once per train step.
  void update_power_iterations();

  // SN buffers for checkpointing, named and in registration order.
  std::vector<std::pair<std::string, Tensor>>& buffers() { return buffers_; }
  Index local_side() const { return local_side_; }

 private:
  struct SnConv {
    Conv2dLayer conv;
    SpectralState sn;
  };
  struct SnLinear {
    Tensor w, b;
    SpectralState sn;
  };

  Tensor run_conv_stack(const std::vector<SnConv>& stack, Tensor x) const;
  Tensor run_linear(const SnLinear& fc, const Tensor& x, bool activate) const;

  std::vector<SnConv> global_, local_;
  SnLinear global_fc_, local_fc_, head_;
  std::vector<std::pair<std::string, Tensor>> buffers_;
  Index image_size_ = 0;
  Index local_side_ = 0;
  Scalar slope_ = 0.01;
};

// Crop window (top-left corner) for the local branch: centred on a random
// point of the missing region's bounding box when one exists, uniform
// otherwise, clamped to fit.
std::pair<Index, Index> choose_local_crop(const maskgen::MaskImage& mask, Index side,
                                          std::uint64_t seed);

}  // namespace tempattn::nets
