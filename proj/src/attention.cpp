#include "tempattn/attention.hpp"

#include <cmath>
#include <cstdio>

namespace tempattn::attn {

namespace {

// Invalid key columns are overwritten with `fill`; gradients flow only
// through the valid columns (and never into `fill`).
Tensor apply_key_mask(const Tensor& x, const std::vector<std::uint8_t>& key_valid, Scalar fill) {
  if (x.rank() != 2 || x.dim(1) != static_cast<Index>(key_valid.size())) {
    throw ShapeError("apply_key_mask: validity vector of length " +
                     std::to_string(key_valid.size()) + " does not match scores " +
                     shape_to_string(x.shape()));
  }
  const Index r = x.dim(0), c = x.dim(1);
  bool rec = recording(x);
  Tensor out = Tensor::zeros({r, c});
  if (rec) out.set_requires_grad();
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) {
      out.at2(i, j) = key_valid[static_cast<size_t>(j)] ? x.at2(i, j) : fill;
    }
  }
  if (rec) {
    Tape::active()->record([x, out, key_valid, r, c]() mutable {
      for (Index i = 0; i < r; ++i) {
        for (Index j = 0; j < c; ++j) {
          if (key_valid[static_cast<size_t>(j)]) x.grad()[i * c + j] += out.grad()[i * c + j];
        }
      }
    });
  }
  return out;
}

void check_patch_geometry(const Tensor& f, int s) {
  if (f.rank() != 3) throw ShapeError("patch ops expect an H x W x C cube");
  if (s < 1 || s % 2 == 0) throw ConfigError("patch size must be odd, got " + std::to_string(s));
}

}  // namespace

Tensor embed_channels(const Tensor& f, const Tensor& w) {
  if (f.rank() != 3 || w.rank() != 2 || f.dim(2) != w.dim(0)) {
    throw ShapeError("embed_channels: cube " + shape_to_string(f.shape()) +
                     " incompatible with weight " + shape_to_string(w.shape()));
  }
  const Index h = f.dim(0), wd = f.dim(1);
  Tensor flat = reshape(f, {h * wd, f.dim(2)});
  return reshape(matmul(flat, w), {h, wd, w.dim(1)});
}

Tensor extract_patches(const Tensor& f, int s, int stride, bool zero_pad) {
  check_patch_geometry(f, s);
  if (stride < 1) throw ConfigError("extract_patches: stride must be positive");
  const Index h = f.dim(0), w = f.dim(1), c = f.dim(2);
  const int pad = zero_pad ? (s - 1) / 2 : 0;
  if (zero_pad && stride != 1) {
    throw ConfigError("extract_patches: padded (query) extraction is per-pixel, stride must be 1");
  }
  if (!zero_pad && (h < s || w < s)) {
    throw ShapeError("extract_patches: patch " + std::to_string(s) + " exceeds map " +
                     std::to_string(h) + "x" + std::to_string(w) + " without padding");
  }
  const Index nr = zero_pad ? h : (h - s) / stride + 1;
  const Index nc = zero_pad ? w : (w - s) / stride + 1;
  const Index cols = static_cast<Index>(s) * s * c;

  bool rec = recording(f);
  Tensor out = Tensor::zeros({nr * nc, cols});
  if (rec) out.set_requires_grad();
  for (Index r = 0; r < nr; ++r) {
    for (Index q = 0; q < nc; ++q) {
      Scalar* dst = out.data().data() + (r * nc + q) * cols;
      for (int di = 0; di < s; ++di) {
        const Index src_i = r * stride + di - pad;
        for (int dj = 0; dj < s; ++dj) {
          const Index src_j = q * stride + dj - pad;
          if (src_i < 0 || src_i >= h || src_j < 0 || src_j >= w) continue;  // stays zero
          const Scalar* src = f.data().data() + (src_i * w + src_j) * c;
          Scalar* cell = dst + (static_cast<Index>(di) * s + dj) * c;
          for (Index ch = 0; ch < c; ++ch) cell[ch] = src[ch];
        }
      }
    }
  }
  if (rec) {
    Tape::active()->record([f, out, h, w, c, s, stride, pad, nr, nc, cols]() mutable {
      for (Index r = 0; r < nr; ++r) {
        for (Index q = 0; q < nc; ++q) {
          const Scalar* src = out.grad().data() + (r * nc + q) * cols;
          for (int di = 0; di < s; ++di) {
            const Index dst_i = r * stride + di - pad;
            for (int dj = 0; dj < s; ++dj) {
              const Index dst_j = q * stride + dj - pad;
              if (dst_i < 0 || dst_i >= h || dst_j < 0 || dst_j >= w) continue;
              const Scalar* cell = src + (static_cast<Index>(di) * s + dj) * c;
              Scalar* dst = f.grad().data() + (dst_i * w + dst_j) * c;
              for (Index ch = 0; ch < c; ++ch) dst[ch] += cell[ch];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor roll(const Tensor& patches, Index h, Index w, Index c, int s) {
  if (patches.rank() != 2 || patches.dim(0) != h * w ||
      patches.dim(1) != static_cast<Index>(s) * s * c) {
    throw ShapeError("roll: patches " + shape_to_string(patches.shape()) +
                     " do not match geometry " + std::to_string(h) + "x" + std::to_string(w) +
                     "x" + std::to_string(c) + " at patch size " + std::to_string(s));
  }
  const int pad = (s - 1) / 2;
  // Contribution count per pixel: how many centred patches cover it.
  std::vector<Scalar> count(static_cast<size_t>(h * w), 0.0);
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      for (int di = 0; di < s; ++di) {
        for (int dj = 0; dj < s; ++dj) {
          const Index ti = i + di - pad;
          const Index tj = j + dj - pad;
          if (ti >= 0 && ti < h && tj >= 0 && tj < w) count[static_cast<size_t>(ti * w + tj)] += 1.0;
        }
      }
    }
  }

  bool rec = recording(patches);
  Tensor out = Tensor::zeros({h, w, c});
  if (rec) out.set_requires_grad();
  const Index cols = static_cast<Index>(s) * s * c;
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      const Scalar* src = patches.data().data() + (i * w + j) * cols;
      for (int di = 0; di < s; ++di) {
        const Index ti = i + di - pad;
        for (int dj = 0; dj < s; ++dj) {
          const Index tj = j + dj - pad;
          if (ti < 0 || ti >= h || tj < 0 || tj >= w) continue;
          const Scalar* cell = src + (static_cast<Index>(di) * s + dj) * c;
          Scalar* dst = out.data().data() + (ti * w + tj) * c;
          for (Index ch = 0; ch < c; ++ch) dst[ch] += cell[ch];
        }
      }
    }
  }
  for (Index p = 0; p < h * w; ++p) {
    for (Index ch = 0; ch < c; ++ch) out.data()[p * c + ch] /= count[static_cast<size_t>(p)];
  }

  if (rec) {
    Tape::active()->record([patches, out, h, w, c, s, pad, cols, count]() mutable {
      for (Index i = 0; i < h; ++i) {
        for (Index j = 0; j < w; ++j) {
          Scalar* dst = patches.grad().data() + (i * w + j) * cols;
          for (int di = 0; di < s; ++di) {
            const Index ti = i + di - pad;
            for (int dj = 0; dj < s; ++dj) {
              const Index tj = j + dj - pad;
              if (ti < 0 || ti >= h || tj < 0 || tj >= w) continue;
              const Scalar* src = out.grad().data() + (ti * w + tj) * c;
              const Scalar inv = 1.0 / count[static_cast<size_t>(ti * w + tj)];
              Scalar* cell = dst + (static_cast<Index>(di) * s + dj) * c;
              for (Index ch = 0; ch < c; ++ch) cell[ch] += src[ch] * inv;
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor attention_scores(const Tensor& q, const Tensor& k) {
  if (q.rank() != 2 || k.rank() != 2 || q.dim(1) != k.dim(1)) {
    throw ShapeError("attention_scores: query " + shape_to_string(q.shape()) +
                     " and key " + shape_to_string(k.shape()) + " rows must match");
  }
  return matmul(l2_normalize_rows(q), transpose(l2_normalize_rows(k)));
}

Tensor mask_scores(const Tensor& s, const std::vector<std::uint8_t>& key_valid, const Tensor& t,
                   Scalar lambda_m) {
  const Scalar tv = t.value();
  if (!(tv > 0.0) || !std::isfinite(tv)) {
    throw NumericError("mask_scores: temperature must be positive and finite, got " +
                       std::to_string(tv));
  }
  return apply_key_mask(div_by_scalar(s, t), key_valid, -lambda_m);
}

Tensor attention_weights(const Tensor& s_m, const std::vector<std::uint8_t>& key_valid) {
  bool any_valid = false;
  for (auto v : key_valid) any_valid |= (v != 0);
  if (!any_valid) {
    throw NumericError("attention_weights: no valid key in the mask (degenerate mask)");
  }
  return softmax_rows(s_m);
}

Tensor refine_patches(const Tensor& w, const Tensor& v) { return matmul(w, v); }

namespace {

void check_mhtma_args(const Tensor& f_in, const maskgen::MaskImage& low_mask,
                      const MhtmaParams& params, const Tensor& temperatures) {
  if (f_in.rank() != 3) throw ShapeError("mhtma_forward: feature map must be H x W x C");
  if (low_mask.h != f_in.dim(0) || low_mask.w != f_in.dim(1)) {
    throw ShapeError("mhtma_forward: mask " + std::to_string(low_mask.h) + "x" +
                     std::to_string(low_mask.w) + " does not match feature map " +
                     shape_to_string(f_in.shape()));
  }
  const size_t kk = params.heads.size();
  if (kk == 0 || params.embed_w.size() != kk) {
    throw ConfigError("mhtma_forward: head configuration and embedding weights disagree");
  }
  if (temperatures.rank() != 1 || temperatures.dim(0) != static_cast<Index>(kk)) {
    throw ShapeError("mhtma_forward: expected one temperature per head");
  }
  Index embed_total = 0;
  for (size_t i = 0; i < kk; ++i) {
    if (params.embed_w[i].rank() != 2 || params.embed_w[i].dim(0) != f_in.dim(2) ||
        params.embed_w[i].dim(1) != params.heads[i].embed_channels) {
      throw ShapeError("mhtma_forward: head " + std::to_string(i) + " embedding weight " +
                       shape_to_string(params.embed_w[i].shape()) + " incompatible");
    }
    embed_total += params.heads[i].embed_channels;
  }
  if (embed_total != f_in.dim(2)) {
    throw ConfigError("mhtma_forward: per-head embedded channels must sum to the input channel "
                      "count so the concatenated output preserves it");
  }
}

}  // namespace

Tensor mhtma_forward(const Tensor& f_in, const maskgen::MaskImage& low_mask,
                     const MhtmaParams& params, const Tensor& temperatures) {
  check_mhtma_args(f_in, low_mask, params, temperatures);
  const Index h = f_in.dim(0), w = f_in.dim(1);

  Tensor out;
  for (size_t hd = 0; hd < params.heads.size(); ++hd) {
    const HeadConfig& cfg = params.heads[hd];
    const Index cp = cfg.embed_channels;
    Tensor fe = embed_channels(f_in, params.embed_w[hd]);
    Tensor q = extract_patches(fe, cfg.patch_size, 1, true);
    Tensor kv = extract_patches(fe, cfg.patch_size, cfg.key_stride, false);
    const auto valid = maskgen::binarize_patch_mask(low_mask, cfg.patch_size, cfg.key_stride);

    bool any_valid = false;
    for (auto vbit : valid) any_valid |= (vbit != 0);

    Tensor weights;
    if (any_valid) {
      Tensor t = index_vec(temperatures, static_cast<Index>(hd));
      Tensor s = attention_scores(q, kv);
      Tensor s_m = mask_scores(s, valid, t, cfg.lambda_m);
      weights = attention_weights(s_m, valid);
    } else {
      // Degenerate mask: nothing can be attended to. Fall back to a uniform
      // combination of all keys so the output stays defined.
      std::fprintf(stderr,
                   "[tempattn] warning: head %zu has no valid key patch; using uniform weights\n",
                   hd);
      weights = Tensor::full({q.dim(0), kv.dim(0)}, 1.0 / static_cast<Scalar>(kv.dim(0)));
    }
    Tensor p = refine_patches(weights, kv);
    Tensor head_out = roll(p, h, w, cp, cfg.patch_size);
    out = out.defined() ? concat_channels(out, head_out) : head_out;
  }
  return out;
}

Tensor attention_loop_reference(const Tensor& f_in, const maskgen::MaskImage& low_mask,
                                const MhtmaParams& params, const Tensor& temperatures) {
  check_mhtma_args(f_in, low_mask, params, temperatures);
  const Index h = f_in.dim(0), w = f_in.dim(1), c = f_in.dim(2);
  Tensor out = Tensor::zeros({h, w, c});
  Index out_ch0 = 0;

  for (size_t hd = 0; hd < params.heads.size(); ++hd) {
    const HeadConfig& cfg = params.heads[hd];
    const int s = cfg.patch_size;
    const int pad = (s - 1) / 2;
    const Index cp = cfg.embed_channels;
    const Scalar t = temperatures.data()[static_cast<Index>(hd)];
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw NumericError("attention_loop_reference: temperature must be positive and finite");
    }
    const Tensor& ew = params.embed_w[hd];

    // Per-pixel channel embedding.
    std::vector<Scalar> fe(static_cast<size_t>(h * w * cp), 0.0);
    for (Index p = 0; p < h * w; ++p) {
      for (Index co = 0; co < cp; ++co) {
        Scalar acc = 0.0;
        for (Index ci = 0; ci < c; ++ci) acc += f_in.data()[p * c + ci] * ew.at2(ci, co);
        fe[static_cast<size_t>(p * cp + co)] = acc;
      }
    }

    // Key/value patches on the stride grid (fully inside the map).
    const Index nkr = (h - s) / cfg.key_stride + 1;
    const Index nkc = (w - s) / cfg.key_stride + 1;
    const Index nk = nkr * nkc;
    const Index cols = static_cast<Index>(s) * s * cp;
    std::vector<Scalar> keys(static_cast<size_t>(nk * cols), 0.0);
    for (Index kr = 0; kr < nkr; ++kr) {
      for (Index kc = 0; kc < nkc; ++kc) {
        for (int di = 0; di < s; ++di) {
          for (int dj = 0; dj < s; ++dj) {
            for (Index ch = 0; ch < cp; ++ch) {
              keys[static_cast<size_t>((kr * nkc + kc) * cols + (di * s + dj) * cp + ch)] =
                  fe[static_cast<size_t>(((kr * cfg.key_stride + di) * w +
                                          kc * cfg.key_stride + dj) * cp + ch)];
            }
          }
        }
      }
    }
    std::vector<Scalar> key_norm(static_cast<size_t>(nk), 0.0);
    for (Index kI = 0; kI < nk; ++kI) {
      Scalar n2 = 0.0;
      for (Index e = 0; e < cols; ++e) {
        const Scalar val = keys[static_cast<size_t>(kI * cols + e)];
        n2 += val * val;
      }
      key_norm[static_cast<size_t>(kI)] = std::sqrt(n2);
    }
    const auto valid = maskgen::binarize_patch_mask(low_mask, s, cfg.key_stride);
    bool any_valid = false;
    for (auto vbit : valid) any_valid |= (vbit != 0);

    std::vector<Scalar> acc(static_cast<size_t>(h * w * cp), 0.0);
    std::vector<Scalar> cnt(static_cast<size_t>(h * w), 0.0);
    std::vector<Scalar> qpatch(static_cast<size_t>(cols), 0.0);
    std::vector<Scalar> scores(static_cast<size_t>(nk), 0.0);
    std::vector<Scalar> weights(static_cast<size_t>(nk), 0.0);

    for (Index qi = 0; qi < h; ++qi) {
      for (Index qj = 0; qj < w; ++qj) {
        // Zero-padded query patch centred on (qi, qj).
        std::fill(qpatch.begin(), qpatch.end(), 0.0);
        for (int di = 0; di < s; ++di) {
          const Index si = qi + di - pad;
          for (int dj = 0; dj < s; ++dj) {
            const Index sj = qj + dj - pad;
            if (si < 0 || si >= h || sj < 0 || sj >= w) continue;
            for (Index ch = 0; ch < cp; ++ch) {
              qpatch[static_cast<size_t>((di * s + dj) * cp + ch)] =
                  fe[static_cast<size_t>((si * w + sj) * cp + ch)];
            }
          }
        }
        Scalar qn2 = 0.0;
        for (Index e = 0; e < cols; ++e) qn2 += qpatch[static_cast<size_t>(e)] * qpatch[static_cast<size_t>(e)];
        const Scalar qn = std::sqrt(qn2);

        if (any_valid) {
          // Masked, temperature-scaled cosine scores.
          for (Index kI = 0; kI < nk; ++kI) {
            if (!valid[static_cast<size_t>(kI)]) {
              scores[static_cast<size_t>(kI)] = -cfg.lambda_m;
              continue;
            }
            Scalar dot = 0.0;
            for (Index e = 0; e < cols; ++e) {
              dot += qpatch[static_cast<size_t>(e)] * keys[static_cast<size_t>(kI * cols + e)];
            }
            const Scalar kn = key_norm[static_cast<size_t>(kI)];
            const Scalar cosine = (qn > 0.0 && kn > 0.0) ? dot / (qn * kn) : 0.0;
            scores[static_cast<size_t>(kI)] = cosine / t;
          }
          // Row softmax with max subtraction so extreme temperatures stay finite.
          Scalar mx = scores[0];
          for (Index kI = 1; kI < nk; ++kI) mx = std::max(mx, scores[static_cast<size_t>(kI)]);
          Scalar denom = 0.0;
          for (Index kI = 0; kI < nk; ++kI) {
            weights[static_cast<size_t>(kI)] = std::exp(scores[static_cast<size_t>(kI)] - mx);
            denom += weights[static_cast<size_t>(kI)];
          }
          for (Index kI = 0; kI < nk; ++kI) weights[static_cast<size_t>(kI)] /= denom;
        } else {
          for (Index kI = 0; kI < nk; ++kI) {
            weights[static_cast<size_t>(kI)] = 1.0 / static_cast<Scalar>(nk);
          }
        }

        // Weighted sum of value patches, overlap-added at the query centre.
        for (int di = 0; di < s; ++di) {
          const Index ti = qi + di - pad;
          for (int dj = 0; dj < s; ++dj) {
            const Index tj = qj + dj - pad;
            if (ti < 0 || ti >= h || tj < 0 || tj >= w) continue;
            for (Index ch = 0; ch < cp; ++ch) {
              Scalar val = 0.0;
              for (Index kI = 0; kI < nk; ++kI) {
                val += weights[static_cast<size_t>(kI)] *
                       keys[static_cast<size_t>(kI * cols + (di * s + dj) * cp + ch)];
              }
              acc[static_cast<size_t>((ti * w + tj) * cp + ch)] += val;
            }
            cnt[static_cast<size_t>(ti * w + tj)] += 1.0;
          }
        }
      }
    }

    for (Index p = 0; p < h * w; ++p) {
      for (Index ch = 0; ch < cp; ++ch) {
        out.data()[p * c + out_ch0 + ch] = acc[static_cast<size_t>(p * cp + ch)] / cnt[static_cast<size_t>(p)];
      }
    }
    out_ch0 += cp;
  }
  return out;
}

Tensor contextual_attention_forward(const Tensor& f_in, const maskgen::MaskImage& low_mask,
                                    int s, int stride) {
  if (f_in.rank() != 3) throw ShapeError("contextual_attention_forward: feature map must be H x W x C");
  if (low_mask.h != f_in.dim(0) || low_mask.w != f_in.dim(1)) {
    throw ShapeError("contextual_attention_forward: mask does not match feature map");
  }
  const Index h = f_in.dim(0), w = f_in.dim(1), c = f_in.dim(2);
  Tensor q = extract_patches(f_in, s, 1, true);
  Tensor kv = extract_patches(f_in, s, stride, false);
  const auto valid = maskgen::binarize_patch_mask(low_mask, s, stride);

  // Raw queries against normalized keys, zeroed at invalid keys.
  Tensor scores = matmul(q, transpose(l2_normalize_rows(kv)));
  Tensor masked = apply_key_mask(scores, valid, 0.0);
  // Fixed temperature of 1/10, then a second multiplicative mask: rows with
  // no valid key end up all-zero instead of uniform.
  Tensor weights = apply_key_mask(softmax_rows(mul_const(masked, 10.0)), valid, 0.0);
  Tensor p = refine_patches(weights, kv);
  return roll(p, h, w, c, s);
}

Tensor TemperatureNet::forward(const Tensor& f_in) const {
  if (f_in.rank() != 3) throw ShapeError("TemperatureNet: feature map must be H x W x C");
  if (conv_w.size() != 4 || conv_b.size() != 4) {
    throw ConfigError("TemperatureNet: expected exactly four conv layers");
  }
  Tensor x = f_in;
  for (size_t i = 0; i < conv_w.size(); ++i) {
    x = leaky_relu(conv2d(x, conv_w[i], conv_b[i], 1, 1, 1), slope);
  }
  Tensor pooled = concat_vec(pool_global_mean(x), pool_global_max(x));
  Tensor logits = add_channel_bias(matmul(reshape(pooled, {1, pooled.dim(0)}), fc_w), fc_b);
  Tensor flat = reshape(logits, {fc_b.dim(0)});
  Tensor t = increasing_softplus ? softplus_increasing(flat) : softplus_decreasing(flat);
  return clamp_min_const(clamp_max_const(t, temperature_cap), temperature_floor);
}

}  // namespace tempattn::attn
