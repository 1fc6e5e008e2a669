#pragma once

// Independent straight-loop implementations used as test oracles. These are
// deliberately written with scalar loops and no shared code with the library.

#include "tempattn/types.hpp"

#include <cmath>
#include <vector>

namespace testutil {

using tempattn::ArrayX;
using tempattn::Index;
using tempattn::Scalar;

// Plain quadruple-loop cross-correlation over an H x W x C cube.
inline ArrayX conv2d_oracle(const ArrayX& x, Index h, Index w, Index cin, const ArrayX& ker,
                            int kh, int kw, Index cout, const ArrayX& bias, int stride,
                            int dilation, int pad) {
  const Index out_h = (h + 2 * pad - dilation * (kh - 1) - 1) / stride + 1;
  const Index out_w = (w + 2 * pad - dilation * (kw - 1) - 1) / stride + 1;
  ArrayX out(out_h * out_w * cout);
  for (Index oi = 0; oi < out_h; ++oi) {
    for (Index oj = 0; oj < out_w; ++oj) {
      for (Index co = 0; co < cout; ++co) {
        Scalar acc = bias[co];
        for (int ki = 0; ki < kh; ++ki) {
          for (int kj = 0; kj < kw; ++kj) {
            const Index ii = oi * stride + ki * dilation - pad;
            const Index jj = oj * stride + kj * dilation - pad;
            if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
            for (Index ci = 0; ci < cin; ++ci) {
              acc += x[(ii * w + jj) * cin + ci] * ker[((ki * kw + kj) * cin + ci) * cout + co];
            }
          }
        }
        out[(oi * out_w + oj) * cout + co] = acc;
      }
    }
  }
  return out;
}

// Direct e^{x_i/t} / sum formula with no max-subtraction trick.
inline std::vector<Scalar> softmax_oracle(const std::vector<Scalar>& x, Scalar t) {
  std::vector<Scalar> out(x.size());
  Scalar denom = 0.0;
  for (size_t i = 0; i < x.size(); ++i) denom += std::exp(x[i] / t);
  for (size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i] / t) / denom;
  return out;
}

inline Scalar cosine_oracle(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
  Scalar dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace testutil
