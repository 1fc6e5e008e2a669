#pragma once

#include "tempattn/mask.hpp"
#include "tempattn/ops.hpp"

namespace tempattn::attn {

struct HeadConfig {
  int patch_size = 3;       // odd
  int key_stride = 1;
  Index embed_channels = 0;  // C' after the per-head channel embedding
  Scalar lambda_m = 1e4;     // additive mask offset
};

// Per-head channel-embedding weights; the sum of embed_channels over heads
// must equal the input channel count so the concatenated output matches it.
struct MhtmaParams {
  std::vector<HeadConfig> heads;
  std::vector<Tensor> embed_w;  // one [C, C'_k] matrix per head
};

// Four channel-preserving 3x3 conv layers, global average + max pooling in
// parallel, and a fully connected head that emits one pre-activation per
// attention head; a decreasing softplus maps it to a positive temperature.
struct TemperatureNet {
  std::vector<Tensor> conv_w;  // 4 x [3, 3, C, C]
  std::vector<Tensor> conv_b;  // 4 x [C]
  Tensor fc_w;                 // [2C, K]
  Tensor fc_b;                 // [K]
  Scalar slope = 0.01;
  bool increasing_softplus = false;  // conventional ln(1+e^x) form when true
  Scalar temperature_cap = 1e6;
  // Softplus underflows to exact 0 once its argument passes ~745; a zero
  // temperature would divide the attention scores by zero, so outputs are
  // floored here as well as capped.
  Scalar temperature_floor = 1e-8;

  Tensor forward(const Tensor& f_in) const;  // -> [K], strictly positive
};

// Pixel-wise linear map over channels: [H, W, C] x [C, C'] -> [H, W, C'].
Tensor embed_channels(const Tensor& f, const Tensor& w);

// Patch extraction. With zero_pad, one patch per pixel (centre-aligned,
// zero-filled outside the map, stride must be 1); without, patches lie fully
// inside the map on a stride grid. Rows are laid out patch-row-major with
// channels fastest.
Tensor extract_patches(const Tensor& f, int s, int stride, bool zero_pad);

// Inverse of padded extraction: overlap-add patches at their centres and
// divide by the per-pixel contribution count.
Tensor roll(const Tensor& patches, Index h, Index w, Index c, int s);

// Cosine-similarity score matrix between query and key patch rows; all-zero
// rows produce zero scores rather than NaN.
Tensor attention_scores(const Tensor& q, const Tensor& k);

// Temperature scaling plus key masking: valid keys keep s/t, invalid keys are
// pinned at -lambda (the masked additive-offset form, evaluated exactly).
// Differentiable in s and t; t must be a positive scalar tensor.
Tensor mask_scores(const Tensor& s, const std::vector<std::uint8_t>& key_valid, const Tensor& t,
                   Scalar lambda_m);

// Row-wise softmax over keys. Raises when no key is valid.
Tensor attention_weights(const Tensor& s_m, const std::vector<std::uint8_t>& key_valid);

// Weighted reassembly of value patches: W x V.
Tensor refine_patches(const Tensor& w, const Tensor& v);

// Full multi-head pipeline: per head embed -> unroll -> cosine scores ->
// temperature + mask -> softmax -> weighted patches -> roll, then channel
// concatenation across heads. `temperatures` holds one positive scalar per
// head. When a head has no valid key its weights fall back to uniform over
// all keys and a warning is emitted.
Tensor mhtma_forward(const Tensor& f_in, const maskgen::MaskImage& low_mask,
                     const MhtmaParams& params, const Tensor& temperatures);

// Semantically identical scalar-loop implementation (forward only, no
// gradients); the reference half of the equivalence and benchmark pair.
Tensor attention_loop_reference(const Tensor& f_in, const maskgen::MaskImage& low_mask,
                                const MhtmaParams& params, const Tensor& temperatures);

// Single-head baseline with a fixed temperature of 1/10: no channel
// embedding, key-only normalization, multiplicative masking both before the
// softmax and after it (so rows with no valid key produce zero output).
Tensor contextual_attention_forward(const Tensor& f_in, const maskgen::MaskImage& low_mask,
                                    int s = 3, int stride = 1);

}  // namespace tempattn::attn
