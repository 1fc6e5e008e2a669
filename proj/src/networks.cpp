#include "tempattn/networks.hpp"

#include <cmath>
#include <string>

namespace tempattn::nets {
namespace {

Tensor init_normal(ParamSet& params, const std::string& name, Shape shape, Rng& rng,
                   Scalar stddev) {
  Tensor t = params.add(name, std::move(shape));
  ArrayX& d = t.data();
  for (Index i = 0; i < d.size(); ++i) d[i] = rng.normal() * stddev;
  return t;
}

Conv2dLayer make_conv(ParamSet& params, const std::string& name, Index k, Index cin, Index cout,
                      int stride, int dilation, Rng& rng) {
  Conv2dLayer layer;
  const Scalar stddev = std::sqrt(2.0 / static_cast<Scalar>(k * k * cin));
  layer.w = init_normal(params, name + ".w", {k, k, cin, cout}, rng, stddev);
  layer.b = params.add(name + ".b", {cout});
  layer.stride = stride;
  layer.dilation = dilation;
  layer.pad = dilation * static_cast<int>(k - 1) / 2;
  return layer;
}

GatedConv make_gated(ParamSet& params, const std::string& name, Index k, Index cin, Index cout,
                     int stride, int dilation, Rng& rng, Scalar slope) {
  GatedConv g;
  g.feature = make_conv(params, name + ".f", k, cin, cout, stride, dilation, rng);
  g.gate = make_conv(params, name + ".g", k, cin, cout, stride, dilation, rng);
  // Gates start open (sigmoid(2) ~ 0.88): with zero bias every layer halves
  // the signal, which attenuates activations and gradients by 2^-depth and
  // stalls the encoder layers of deep gated stacks.
  g.gate.b.data() = 2.0;
  g.slope = slope;
  return g;
}

void init_unit_vector(Tensor t, Rng& rng) {
  ArrayX& d = t.data();
  Scalar norm2 = 0.0;
  for (Index i = 0; i < d.size(); ++i) {
    d[i] = rng.normal();
    norm2 += d[i] * d[i];
  }
  d /= std::max(std::sqrt(norm2), 1e-12);
}

// The weight viewed as (out-features x rest) is the transpose of its natural
// row-major matrix map (rest rows, out-feature columns).
Index rest_features(const Tensor& w, Index out_features) {
  const Index n = shape_numel(w.shape());
  if (out_features <= 0 || n % out_features != 0) {
    throw ShapeError("spectral norm: out_features " + std::to_string(out_features) +
                     " does not divide weight size " + std::to_string(n));
  }
  return n / out_features;
}

void check_sn_state(const Tensor& w, Index out, Index rest, const SpectralState& st) {
  if (st.u.data().size() != out || st.v.data().size() != rest) {
    throw ShapeError("spectral norm state does not match weight " + shape_to_string(w.shape()));
  }
}

}  // namespace

void NetConfig::validate() const {
  if (in_channels != 4 && in_channels != 5) {
    throw ConfigError("in_channels must be 4 (RGB+mask) or 5 (with sketch), got " +
                      std::to_string(in_channels));
  }
  if (base_width < 2 || base_width % 2 != 0) {
    throw ConfigError("base_width must be an even integer >= 2, got " +
                      std::to_string(base_width));
  }
  if (image_size < 16 || image_size % 8 != 0) {
    throw ConfigError("image_size must be a multiple of 8 and at least 16, got " +
                      std::to_string(image_size));
  }
  if (heads < 1) throw ConfigError("heads must be >= 1");
  if (4 * base_width % heads != 0) {
    throw ConfigError("heads must divide the attention width 4*base_width");
  }
  if (patch_size < 1 || patch_size % 2 == 0) {
    throw ConfigError("patch_size must be odd and positive, got " + std::to_string(patch_size));
  }
  if (key_stride < 1) throw ConfigError("key_stride must be >= 1");
  const Index low = image_size / 4;
  if (low < patch_size || (low - patch_size) % key_stride != 0) {
    throw ConfigError("attention resolution " + std::to_string(low) +
                      " incompatible with patch_size/key_stride");
  }
  if (!(lambda_m > 0.0) || !std::isfinite(lambda_m)) {
    throw ConfigError("lambda_m must be positive and finite");
  }
}

Scalar spectral_sigma(const Tensor& w, Index out_features, const SpectralState& st) {
  const Index rest = rest_features(w, out_features);
  check_sn_state(w, out_features, rest, st);
  ConstMapMatrix m(w.data().data(), rest, out_features);
  Eigen::Map<const Eigen::VectorXd> u(st.u.data().data(), out_features);
  Eigen::Map<const Eigen::VectorXd> v(st.v.data().data(), rest);
  return u.dot(m.transpose() * v);
}

static void sn_power_step(const Tensor& w, Index out_features, SpectralState& st) {
  const Index rest = rest_features(w, out_features);
  check_sn_state(w, out_features, rest, st);
  ConstMapMatrix m(w.data().data(), rest, out_features);
  Eigen::Map<Eigen::VectorXd> u(st.u.data().data(), out_features);
  Eigen::Map<Eigen::VectorXd> v(st.v.data().data(), rest);
  v = m * u;
  v /= std::max(v.norm(), 1e-12);
  u = m.transpose() * v;
  u /= std::max(u.norm(), 1e-12);
}

Tensor spectral_normalize_frozen(const Tensor& w, Index out_features, const SpectralState& st) {
  const Scalar sigma = spectral_sigma(w, out_features, st);
  return mul_const(w, 1.0 / std::max(sigma, 1e-12));
}

Tensor spectral_normalize(const Tensor& w, Index out_features, SpectralState& st) {
  sn_power_step(w, out_features, st);
  return spectral_normalize_frozen(w, out_features, st);
}

Tensor mask_to_cube(const maskgen::MaskImage& mask, Index channels) {
  Tensor cube = Tensor::zeros({mask.h, mask.w, channels});
  ArrayX& d = cube.data();
  for (Index r = 0; r < mask.h; ++r) {
    for (Index c = 0; c < mask.w; ++c) {
      const Scalar m = mask.at(r, c) ? 1.0 : 0.0;
      for (Index ch = 0; ch < channels; ++ch) d[(r * mask.w + c) * channels + ch] = m;
    }
  }
  return cube;
}

Tensor composite_with_mask(const Tensor& out, const Tensor& in, const maskgen::MaskImage& mask) {
  if (out.shape().size() != 3 || !out.same_shape(in)) {
    throw ShapeError("composite: shapes differ, " + shape_to_string(out.shape()) + " vs " +
                     shape_to_string(in.shape()));
  }
  if (out.shape()[0] != mask.h || out.shape()[1] != mask.w) {
    throw ShapeError("composite: mask size does not match image");
  }
  Tensor hole = mask_to_cube(mask, out.shape()[2]);
  Tensor known = Tensor::zeros(hole.shape());
  known.data() = 1.0 - hole.data();
  return add(mul(out, hole), mul(in, known));
}

// ---------------------------------------------------------------------------
// CoarseNet

CoarseNet::CoarseNet(const NetConfig& cfg, const std::string& prefix, ParamSet& params, Rng& rng) {
  cfg.validate();
  const Index w = cfg.base_width;
  const Scalar sl = 0.2;
  auto gated = [&](int idx, Index k, Index cin, Index cout, int stride, int dilation) {
    enc_.push_back(make_gated(params, prefix + ".l" + std::to_string(idx), k, cin, cout, stride,
                              dilation, rng, sl));
  };
  gated(0, 5, cfg.in_channels, w, 1, 1);
  gated(1, 3, w, 2 * w, 2, 1);
  gated(2, 3, 2 * w, 2 * w, 1, 1);
  gated(3, 3, 2 * w, 4 * w, 2, 1);
  gated(4, 3, 4 * w, 4 * w, 1, 1);
  gated(5, 3, 4 * w, 4 * w, 1, 1);
  gated(6, 3, 4 * w, 4 * w, 1, 2);
  gated(7, 3, 4 * w, 4 * w, 1, 4);
  gated(8, 3, 4 * w, 4 * w, 1, 8);
  gated(9, 3, 4 * w, 4 * w, 1, 16);
  gated(10, 3, 4 * w, 4 * w, 1, 1);
  gated(11, 3, 4 * w, 4 * w, 1, 1);
  gated(12, 3, 4 * w, 2 * w, 1, 1);
  gated(13, 3, 2 * w, 2 * w, 1, 1);
  gated(14, 3, 2 * w, w, 1, 1);
  gated(15, 3, w, w / 2, 1, 1);
  upsample_before_ = {12, 14};
  out_ = make_conv(params, prefix + ".out", 3, w / 2, 3, 1, 1, rng);
}

Tensor CoarseNet::forward(const Tensor& x) const {
  Tensor h = x;
  for (int i = 0; i < static_cast<int>(enc_.size()); ++i) {
    for (int up : upsample_before_) {
      if (up == i) h = upsample_nearest2(h);
    }
    h = enc_[static_cast<std::size_t>(i)].forward(h);
  }
  return tanh_op(out_.forward(h));
}

// ---------------------------------------------------------------------------
// RefineNet

RefineNet::RefineNet(const NetConfig& cfg, const std::string& prefix, ParamSet& params, Rng& rng) {
  cfg.validate();
  const Index w = cfg.base_width;
  const Index cw = 4 * w;  // channel width at attention resolution
  const Scalar sl = 0.2;

  auto gated = [&](std::vector<GatedConv>& dst, const std::string& tag, int idx, Index k,
                   Index cin, Index cout, int stride, int dilation) {
    dst.push_back(make_gated(params, prefix + "." + tag + std::to_string(idx), k, cin, cout,
                             stride, dilation, rng, sl));
  };

  gated(conv_branch_, "c", 0, 5, cfg.in_channels, w, 1, 1);
  gated(conv_branch_, "c", 1, 3, w, 2 * w, 2, 1);
  gated(conv_branch_, "c", 2, 3, 2 * w, 2 * w, 1, 1);
  gated(conv_branch_, "c", 3, 3, 2 * w, cw, 2, 1);
  gated(conv_branch_, "c", 4, 3, cw, cw, 1, 1);
  gated(conv_branch_, "c", 5, 3, cw, cw, 1, 1);
  gated(conv_branch_, "c", 6, 3, cw, cw, 1, 2);
  gated(conv_branch_, "c", 7, 3, cw, cw, 1, 4);
  gated(conv_branch_, "c", 8, 3, cw, cw, 1, 8);
  gated(conv_branch_, "c", 9, 3, cw, cw, 1, 16);

  gated(attn_pre_, "a", 0, 5, cfg.in_channels, w, 1, 1);
  gated(attn_pre_, "a", 1, 3, w, 2 * w, 2, 1);
  gated(attn_pre_, "a", 2, 3, 2 * w, 2 * w, 1, 1);
  gated(attn_pre_, "a", 3, 3, 2 * w, cw, 2, 1);
  gated(attn_pre_, "a", 4, 3, cw, cw, 1, 1);
  gated(attn_pre_, "a", 5, 3, cw, cw, 1, 1);

  const Index embed = cw / cfg.heads;
  const Scalar embed_std = std::sqrt(1.0 / static_cast<Scalar>(cw));
  for (int hd = 0; hd < cfg.heads; ++hd) {
    attn::HeadConfig head;
    head.patch_size = cfg.patch_size;
    head.key_stride = cfg.key_stride;
    head.embed_channels = embed;
    head.lambda_m = cfg.lambda_m;
    mhtma_.heads.push_back(head);
    mhtma_.embed_w.push_back(init_normal(params, prefix + ".embed" + std::to_string(hd) + ".w",
                                         {cw, embed}, rng, embed_std));
  }

  const Scalar conv_std = std::sqrt(2.0 / static_cast<Scalar>(3 * 3 * cw));
  for (int i = 0; i < 4; ++i) {
    tnet_.conv_w.push_back(init_normal(params, prefix + ".t.conv" + std::to_string(i) + ".w",
                                       {3, 3, cw, cw}, rng, conv_std));
    tnet_.conv_b.push_back(params.add(prefix + ".t.conv" + std::to_string(i) + ".b", {cw}));
  }
  // Zero head: every temperature starts at softplus(0) = ln 2.
  tnet_.fc_w = params.add(prefix + ".t.fc.w", {2 * cw, static_cast<Index>(cfg.heads)});
  tnet_.fc_b = params.add(prefix + ".t.fc.b", {static_cast<Index>(cfg.heads)});
  tnet_.increasing_softplus = cfg.increasing_softplus;

  gated(attn_post_, "p", 0, 3, cw, cw, 1, 1);
  gated(attn_post_, "p", 1, 3, cw, cw, 1, 1);

  gated(dec_, "d", 0, 3, 2 * cw, cw, 1, 1);
  gated(dec_, "d", 1, 3, cw, 2 * w, 1, 1);
  gated(dec_, "d", 2, 3, 2 * w, 2 * w, 1, 1);
  gated(dec_, "d", 3, 3, 2 * w, w, 1, 1);
  gated(dec_, "d", 4, 3, w, w / 2, 1, 1);
  dec_upsample_before_ = {1, 3};
  out_ = make_conv(params, prefix + ".out", 3, w / 2, 3, 1, 1, rng);
}

RefineNet::Result RefineNet::forward(const Tensor& x, const maskgen::MaskImage& mask_low) const {
  if (x.shape().size() != 3) throw ShapeError("refine input must be rank 3");
  if (x.shape()[0] / 4 != mask_low.h || x.shape()[1] / 4 != mask_low.w) {
    throw ShapeError("refine: low-resolution mask must be the input at 1/4 scale");
  }
  Tensor xc = x;
  for (const GatedConv& g : conv_branch_) xc = g.forward(xc);

  Tensor f = x;
  for (const GatedConv& g : attn_pre_) f = g.forward(f);
  Tensor temps = tnet_.forward(f);
  Tensor att = attn::mhtma_forward(f, mask_low, mhtma_, temps);
  for (const GatedConv& g : attn_post_) att = g.forward(att);

  Tensor h = concat_channels(xc, att);
  for (int i = 0; i < static_cast<int>(dec_.size()); ++i) {
    for (int up : dec_upsample_before_) {
      if (up == i) h = upsample_nearest2(h);
    }
    h = dec_[static_cast<std::size_t>(i)].forward(h);
  }
  return {tanh_op(out_.forward(h)), temps};
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(const NetConfig& cfg, const std::string& prefix, ParamSet& params,
                             Rng& rng) {
  cfg.validate();
  const Index w = cfg.base_width;
  image_size_ = cfg.image_size;
  // The local branch sees a crop at half the training resolution (the 128 of
  // a 256 reference scale).
  local_side_ = static_cast<Index>(std::lround(128.0 / 256.0 * static_cast<Scalar>(image_size_)));

  auto sn_conv = [&](std::vector<SnConv>& dst, const std::string& name, Index cin, Index cout,
                     int stride) {
    SnConv layer;
    layer.conv = make_conv(params, name, 5, cin, cout, stride, 1, rng);
    layer.sn.u = Tensor::zeros({cout});
    layer.sn.v = Tensor::zeros({5 * 5 * cin});
    init_unit_vector(layer.sn.u, rng);
    init_unit_vector(layer.sn.v, rng);
    buffers_.emplace_back(name + ".sn_u", layer.sn.u);
    buffers_.emplace_back(name + ".sn_v", layer.sn.v);
    dst.push_back(layer);
  };
  auto sn_linear = [&](SnLinear& dst, const std::string& name, Index nin, Index nout) {
    const Scalar stddev = std::sqrt(2.0 / static_cast<Scalar>(nin));
    dst.w = init_normal(params, name + ".w", {nin, nout}, rng, stddev);
    dst.b = params.add(name + ".b", {nout});
    dst.sn.u = Tensor::zeros({nout});
    dst.sn.v = Tensor::zeros({nin});
    init_unit_vector(dst.sn.u, rng);
    init_unit_vector(dst.sn.v, rng);
    buffers_.emplace_back(name + ".sn_u", dst.sn.u);
    buffers_.emplace_back(name + ".sn_v", dst.sn.v);
  };

  sn_conv(global_, prefix + ".g0", 3, w, 2);
  sn_conv(global_, prefix + ".g1", w, 2 * w, 2);
  sn_conv(global_, prefix + ".g2", 2 * w, 4 * w, 2);
  sn_conv(global_, prefix + ".g3", 4 * w, 4 * w, 1);
  sn_conv(global_, prefix + ".g4", 4 * w, 4 * w, 1);
  sn_conv(global_, prefix + ".g5", 4 * w, 4 * w, 1);
  const Index gside = image_size_ / 8;
  sn_linear(global_fc_, prefix + ".gfc", gside * gside * 4 * w, 4 * w);

  sn_conv(local_, prefix + ".l0", 3, w, 2);
  sn_conv(local_, prefix + ".l1", w, 2 * w, 2);
  sn_conv(local_, prefix + ".l2", 2 * w, 4 * w, 2);
  sn_conv(local_, prefix + ".l3", 4 * w, 4 * w, 1);
  sn_conv(local_, prefix + ".l4", 4 * w, 4 * w, 1);
  const Index lside = local_side_ / 8;
  sn_linear(local_fc_, prefix + ".lfc", lside * lside * 4 * w, 4 * w);

  sn_linear(head_, prefix + ".head", 8 * w, 1);
}

Tensor Discriminator::run_conv_stack(const std::vector<SnConv>& stack, Tensor x) const {
  for (const SnConv& layer : stack) {
    Tensor wn = spectral_normalize_frozen(layer.conv.w, layer.conv.w.shape()[3], layer.sn);
    x = leaky_relu(
        conv2d(x, wn, layer.conv.b, layer.conv.stride, layer.conv.dilation, layer.conv.pad),
        slope_);
  }
  return x;
}

Tensor Discriminator::run_linear(const SnLinear& fc, const Tensor& x, bool activate) const {
  Tensor wn = spectral_normalize_frozen(fc.w, fc.w.shape()[1], fc.sn);
  Tensor y = add_channel_bias(matmul(x, wn), fc.b);
  return activate ? leaky_relu(y, slope_) : y;
}

Tensor Discriminator::forward(const Tensor& image, const maskgen::MaskImage& mask,
                              std::uint64_t crop_seed) const {
  if (image.shape().size() != 3 || image.shape()[0] != image_size_ ||
      image.shape()[1] != image_size_ || image.shape()[2] != 3) {
    throw ShapeError("discriminator expects a " + std::to_string(image_size_) + "x" +
                     std::to_string(image_size_) + "x3 image, got " +
                     shape_to_string(image.shape()));
  }
  auto [r0, c0] = choose_local_crop(mask, local_side_, crop_seed);

  Tensor gfeat = run_conv_stack(global_, image);
  gfeat = reshape(gfeat, {1, shape_numel(gfeat.shape())});
  gfeat = run_linear(global_fc_, gfeat, true);

  Tensor lfeat = run_conv_stack(local_, crop(image, r0, c0, local_side_, local_side_));
  lfeat = reshape(lfeat, {1, shape_numel(lfeat.shape())});
  lfeat = run_linear(local_fc_, lfeat, true);

  Tensor joint = concat_vec(reshape(gfeat, {gfeat.shape()[1]}), reshape(lfeat, {lfeat.shape()[1]}));
  Tensor logit = run_linear(head_, reshape(joint, {1, joint.shape()[0]}), false);
  return reshape(logit, {1});
}

void Discriminator::update_power_iterations() {
  NoGradGuard guard;
  for (SnConv& layer : global_) sn_power_step(layer.conv.w, layer.conv.w.shape()[3], layer.sn);
  for (SnConv& layer : local_) sn_power_step(layer.conv.w, layer.conv.w.shape()[3], layer.sn);
  sn_power_step(global_fc_.w, global_fc_.w.shape()[1], global_fc_.sn);
  sn_power_step(local_fc_.w, local_fc_.w.shape()[1], local_fc_.sn);
  sn_power_step(head_.w, head_.w.shape()[1], head_.sn);
}

std::pair<Index, Index> choose_local_crop(const maskgen::MaskImage& mask, Index side,
                                          std::uint64_t seed) {
  if (side < 1 || side > mask.h || side > mask.w) {
    throw ShapeError("local crop side " + std::to_string(side) + " does not fit in " +
                     std::to_string(mask.h) + "x" + std::to_string(mask.w));
  }
  Index r_lo = mask.h, r_hi = -1, c_lo = mask.w, c_hi = -1;
  for (Index r = 0; r < mask.h; ++r) {
    for (Index c = 0; c < mask.w; ++c) {
      if (!mask.at(r, c)) continue;
      r_lo = std::min(r_lo, r);
      r_hi = std::max(r_hi, r);
      c_lo = std::min(c_lo, c);
      c_hi = std::max(c_hi, c);
    }
  }
  Rng rng(Rng::mix(seed, 0x63726f70ULL));
  Index rc, cc;
  if (r_hi < 0) {  // no missing pixels: any centre
    rc = static_cast<Index>(rng.below(static_cast<std::uint64_t>(mask.h)));
    cc = static_cast<Index>(rng.below(static_cast<std::uint64_t>(mask.w)));
  } else {
    rc = r_lo + static_cast<Index>(rng.below(static_cast<std::uint64_t>(r_hi - r_lo + 1)));
    cc = c_lo + static_cast<Index>(rng.below(static_cast<std::uint64_t>(c_hi - c_lo + 1)));
  }
  Index r0 = std::clamp<Index>(rc - side / 2, 0, mask.h - side);
  Index c0 = std::clamp<Index>(cc - side / 2, 0, mask.w - side);
  return {r0, c0};
}

}  // namespace tempattn::nets
