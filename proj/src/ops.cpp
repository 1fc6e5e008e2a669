#include "tempattn/ops.hpp"

#include <cmath>

namespace tempattn {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

Tensor make_like(const Tensor& x, bool rec) {
  Tensor out = Tensor::zeros(x.shape());
  if (rec) out.set_requires_grad();
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  bool rec = recording(a, b);
  Tensor out = make_like(a, rec);
  out.data() = a.data() + b.data();
  if (rec) {
    Tape::active()->record([a, b, out]() mutable {
      if (a.requires_grad()) a.grad() += out.grad();
      if (b.requires_grad()) b.grad() += out.grad();
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  bool rec = recording(a, b);
  Tensor out = make_like(a, rec);
  out.data() = a.data() - b.data();
  if (rec) {
    Tape::active()->record([a, b, out]() mutable {
      if (a.requires_grad()) a.grad() += out.grad();
      if (b.requires_grad()) b.grad() -= out.grad();
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  bool rec = recording(a, b);
  Tensor out = make_like(a, rec);
  out.data() = a.data() * b.data();
  if (rec) {
    Tape::active()->record([a, b, out]() mutable {
      if (a.requires_grad()) a.grad() += out.grad() * b.data();
      if (b.requires_grad()) b.grad() += out.grad() * a.data();
    });
  }
  return out;
}

Tensor add_const(const Tensor& x, Scalar c) {
  bool rec = recording(x);
  Tensor out = make_like(x, rec);
  out.data() = x.data() + c;
  if (rec) {
    Tape::active()->record([x, out]() mutable { x.grad() += out.grad(); });
  }
  return out;
}

Tensor mul_const(const Tensor& x, Scalar c) {
  bool rec = recording(x);
  Tensor out = make_like(x, rec);
  out.data() = x.data() * c;
  if (rec) {
    Tape::active()->record([x, out, c]() mutable { x.grad() += out.grad() * c; });
  }
  return out;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  if (b.rank() != 1 || x.dim(x.rank() - 1) != b.dim(0)) {
    throw ShapeError("add_channel_bias: bias " + shape_to_string(b.shape()) +
                     " does not match last axis of " + shape_to_string(x.shape()));
  }
  bool rec = recording(x, b);
  Tensor out = make_like(x, rec);
  const Index c = b.dim(0);
  const Index rows = x.size() / c;
  out.as_matrix(rows, c) = x.as_matrix(rows, c).rowwise() + b.as_matrix(1, c).row(0);
  if (rec) {
    Tape::active()->record([x, b, out, rows, c]() mutable {
      if (x.requires_grad()) x.grad() += out.grad();
      if (b.requires_grad()) {
        b.grad_matrix(1, c).row(0) += out.grad_matrix(rows, c).colwise().sum();
      }
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  bool rec = recording(a, b);
  Tensor out = Tensor::zeros({m, n});
  if (rec) out.set_requires_grad();
  out.as_matrix(m, n).noalias() = a.as_matrix(m, k) * b.as_matrix(k, n);
  if (rec) {
    Tape::active()->record([a, b, out, m, k, n]() mutable {
      if (a.requires_grad()) {
        a.grad_matrix(m, k).noalias() += out.grad_matrix(m, n) * b.as_matrix(k, n).transpose();
      }
      if (b.requires_grad()) {
        b.grad_matrix(k, n).noalias() += a.as_matrix(m, k).transpose() * out.grad_matrix(m, n);
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose: rank-2 tensor required");
  const Index r = x.dim(0), c = x.dim(1);
  bool rec = recording(x);
  Tensor out = Tensor::zeros({c, r});
  if (rec) out.set_requires_grad();
  out.as_matrix(c, r) = x.as_matrix(r, c).transpose();
  if (rec) {
    Tape::active()->record([x, out, r, c]() mutable {
      x.grad_matrix(r, c) += out.grad_matrix(c, r).transpose();
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                     shape_to_string(shape));
  }
  bool rec = recording(x);
  Tensor out = Tensor::zeros(std::move(shape));
  if (rec) out.set_requires_grad();
  out.data() = x.data();
  if (rec) {
    Tape::active()->record([x, out]() mutable { x.grad() += out.grad(); });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  bool rec = recording(x);
  Tensor out = make_like(x, rec);
  out.data() = 1.0 / (1.0 + (-x.data()).exp());
  if (rec) {
    Tape::active()->record([x, out]() mutable {
      x.grad() += out.grad() * out.data() * (1.0 - out.data());
    });
  }
  return out;
}

Tensor tanh_op(const Tensor& x) {
  bool rec = recording(x);
  Tensor out = make_like(x, rec);
  out.data() = x.data().tanh();
  if (rec) {
    Tape::active()->record([x, out]() mutable {
      x.grad() += out.grad() * (1.0 - out.data().square());
    });
  }
  return out;
}

Tensor leaky_relu(const Tensor& x, Scalar slope) {
  bool rec = recording(x);
  Tensor out = make_like(x, rec);
  out.data() = (x.data() > 0.0).select(x.data(), slope * x.data());
  if (rec) {
    Tape::active()->record([x, out, slope]() mutable {
      x.grad() += out.grad() * (x.data() > 0.0).select(ArrayX::Ones(x.size()), ArrayX::Constant(x.size(), slope));
    });
  }
  return out;
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

Tensor abs_op(const Tensor& x) {
  bool rec = recording(x);
  Tensor out = make_like(x, rec);
  out.data() = x.data().abs();
  if (rec) {
    Tape::active()->record([x, out]() mutable {
      x.grad() += out.grad() * x.data().sign();
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("softmax_rows: rank-2 tensor required");
  if (x.data().isNaN().any()) throw NumericError("softmax_rows: NaN input");
  const Index r = x.dim(0), c = x.dim(1);
  bool rec = recording(x);
  Tensor out = make_like(x, rec);
  auto xm = x.as_matrix(r, c);
  auto om = out.as_matrix(r, c);
  for (Index i = 0; i < r; ++i) {
    const Scalar m = xm.row(i).maxCoeff();
    Scalar denom = 0.0;
    // Scalar std::exp rather than Eigen's vectorized exp: the latter clamps
    // extreme arguments to a denormal instead of underflowing to exact zero,
    // and fully suppressed entries must come out as exactly 0.
    for (Index j = 0; j < c; ++j) {
      const Scalar e = std::exp(xm(i, j) - m);
      om(i, j) = e;
      denom += e;
    }
    om.row(i) /= denom;
  }
  if (rec) {
    Tape::active()->record([x, out, r, c]() mutable {
      auto y = out.as_matrix(r, c);
      auto g = out.grad_matrix(r, c);
      auto xg = x.grad_matrix(r, c);
      for (Index i = 0; i < r; ++i) {
        const Scalar dot = y.row(i).dot(g.row(i));
        xg.row(i).array() += y.row(i).array() * (g.row(i).array() - dot);
      }
    });
  }
  return out;
}

Tensor softplus_decreasing(const Tensor& x) {
  bool rec = recording(x);
  Tensor out = make_like(x, rec);
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar v = x.data()[i];
    // ln(1 + e^(-v)), computed to avoid overflow on either tail.
    out.data()[i] = v >= 0.0 ? std::log1p(std::exp(-v)) : -v + std::log1p(std::exp(v));
  }
  if (rec) {
    Tape::active()->record([x, out]() mutable {
      // d/dv ln(1 + e^(-v)) = -sigmoid(-v)
      x.grad() += out.grad() * (-1.0 / (1.0 + x.data().exp()));
    });
  }
  return out;
}

Tensor softplus_increasing(const Tensor& x) {
  bool rec = recording(x);
  Tensor out = make_like(x, rec);
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar v = x.data()[i];
    out.data()[i] = v <= 0.0 ? std::log1p(std::exp(v)) : v + std::log1p(std::exp(-v));
  }
  if (rec) {
    Tape::active()->record([x, out]() mutable {
      x.grad() += out.grad() * (1.0 / (1.0 + (-x.data()).exp()));
    });
  }
  return out;
}

Tensor l2_normalize_rows(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("l2_normalize_rows: rank-2 tensor required");
  const Index r = x.dim(0), c = x.dim(1);
  bool rec = recording(x);
  Tensor out = make_like(x, rec);
  auto xm = x.as_matrix(r, c);
  auto om = out.as_matrix(r, c);
  for (Index i = 0; i < r; ++i) {
    const Scalar n = xm.row(i).norm();
    if (n > 0.0) om.row(i) = xm.row(i) / n;
    // all-zero rows stay zero
  }
  if (rec) {
    Tape::active()->record([x, out, r, c]() mutable {
      auto xm2 = x.as_matrix(r, c);
      auto y = out.as_matrix(r, c);
      auto g = out.grad_matrix(r, c);
      auto xg = x.grad_matrix(r, c);
      for (Index i = 0; i < r; ++i) {
        const Scalar n = xm2.row(i).norm();
        if (n == 0.0) continue;  // subgradient 0 at the non-differentiable point
        const Scalar dot = y.row(i).dot(g.row(i));
        xg.row(i) += (g.row(i) - dot * y.row(i)) / n;
      }
    });
  }
  return out;
}

Tensor div_by_scalar(const Tensor& x, const Tensor& t) {
  if (t.size() != 1) throw ShapeError("div_by_scalar: divisor must be a single-element tensor");
  const Scalar tv = t.value();
  if (tv == 0.0) throw NumericError("div_by_scalar: division by zero");
  bool rec = recording(x, t);
  Tensor out = make_like(x, rec);
  out.data() = x.data() / tv;
  if (rec) {
    Tape::active()->record([x, t, out, tv]() mutable {
      if (x.requires_grad()) x.grad() += out.grad() / tv;
      if (t.requires_grad()) t.grad()[0] += -(out.grad() * x.data()).sum() / (tv * tv);
    });
  }
  return out;
}

void im2col(const ArrayX& x, Index h, Index w, Index c, int kh, int kw, int stride, int dilation,
            int pad, ArrayX& col, Index& out_h, Index& out_w) {
  out_h = (h + 2 * pad - dilation * (kh - 1) - 1) / stride + 1;
  out_w = (w + 2 * pad - dilation * (kw - 1) - 1) / stride + 1;
  col.setZero(out_h * out_w * kh * kw * c);
  const Index patch = static_cast<Index>(kh) * kw * c;
  for (Index oi = 0; oi < out_h; ++oi) {
    for (Index oj = 0; oj < out_w; ++oj) {
      Scalar* dst = col.data() + (oi * out_w + oj) * patch;
      for (int ki = 0; ki < kh; ++ki) {
        const Index src_i = oi * stride + static_cast<Index>(ki) * dilation - pad;
        for (int kj = 0; kj < kw; ++kj) {
          const Index src_j = oj * stride + static_cast<Index>(kj) * dilation - pad;
          Scalar* cell = dst + (static_cast<Index>(ki) * kw + kj) * c;
          if (src_i >= 0 && src_i < h && src_j >= 0 && src_j < w) {
            const Scalar* src = x.data() + (src_i * w + src_j) * c;
            for (Index ch = 0; ch < c; ++ch) cell[ch] = src[ch];
          }
        }
      }
    }
  }
}

void col2im(const ArrayX& col, Index h, Index w, Index c, int kh, int kw, int stride, int dilation,
            int pad, ArrayX& x) {
  const Index out_h = (h + 2 * pad - dilation * (kh - 1) - 1) / stride + 1;
  const Index out_w = (w + 2 * pad - dilation * (kw - 1) - 1) / stride + 1;
  const Index patch = static_cast<Index>(kh) * kw * c;
  for (Index oi = 0; oi < out_h; ++oi) {
    for (Index oj = 0; oj < out_w; ++oj) {
      const Scalar* src = col.data() + (oi * out_w + oj) * patch;
      for (int ki = 0; ki < kh; ++ki) {
        const Index dst_i = oi * stride + static_cast<Index>(ki) * dilation - pad;
        for (int kj = 0; kj < kw; ++kj) {
          const Index dst_j = oj * stride + static_cast<Index>(kj) * dilation - pad;
          const Scalar* cell = src + (static_cast<Index>(ki) * kw + kj) * c;
          if (dst_i >= 0 && dst_i < h && dst_j >= 0 && dst_j < w) {
            Scalar* dst = x.data() + (dst_i * w + dst_j) * c;
            for (Index ch = 0; ch < c; ++ch) dst[ch] += cell[ch];
          }
        }
      }
    }
  }
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int dilation,
              int pad) {
  if (x.rank() != 3) throw ShapeError("conv2d: input must be H x W x C");
  if (w.rank() != 4) throw ShapeError("conv2d: kernel must be [kh, kw, Cin, Cout]");
  const Index h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
  const int kh = static_cast<int>(w.dim(0)), kw = static_cast<int>(w.dim(1));
  const Index cout = w.dim(3);
  if (w.dim(2) != cin) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(w.dim(2)) + " input channels, got " +
                     std::to_string(cin));
  }
  if (b.rank() != 1 || b.dim(0) != cout) throw ShapeError("conv2d: bias must be [Cout]");
  if (stride < 1 || dilation < 1 || pad < 0) throw ShapeError("conv2d: bad stride/dilation/pad");
  const Index out_h = (h + 2 * pad - static_cast<Index>(dilation) * (kh - 1) - 1) / stride + 1;
  const Index out_w = (wd + 2 * pad - static_cast<Index>(dilation) * (kw - 1) - 1) / stride + 1;
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("conv2d: non-positive output size for input " + shape_to_string(x.shape()));
  }

  const Index patch = static_cast<Index>(kh) * kw * cin;
  ArrayX col;
  Index oh = 0, ow = 0;
  im2col(x.data(), h, wd, cin, kh, kw, stride, dilation, pad, col, oh, ow);

  bool rec = recording(x, w, b);
  Tensor out = Tensor::zeros({out_h, out_w, cout});
  if (rec) out.set_requires_grad();
  ConstMapMatrix colm(col.data(), out_h * out_w, patch);
  out.as_matrix(out_h * out_w, cout).noalias() = colm * w.as_matrix(patch, cout);
  out.as_matrix(out_h * out_w, cout).rowwise() += b.as_matrix(1, cout).row(0);

  if (rec) {
    // The column matrix is recomputed in the adjoint rather than captured, so
    // a deep network does not hold every unrolled activation alive at once.
    Tape::active()->record([x, w, b, out, h, wd, cin, kh, kw, stride, dilation, pad, patch,
                            cout]() mutable {
      const Index rows = out.dim(0) * out.dim(1);
      MapMatrix g(out.grad().data(), rows, cout);
      if (b.requires_grad()) {
        b.grad_matrix(1, cout).row(0) += g.colwise().sum();
      }
      if (w.requires_grad()) {
        ArrayX col2;
        Index oh2 = 0, ow2 = 0;
        im2col(x.data(), h, wd, cin, kh, kw, stride, dilation, pad, col2, oh2, ow2);
        ConstMapMatrix colm2(col2.data(), rows, patch);
        w.grad_matrix(patch, cout).noalias() += colm2.transpose() * g;
      }
      if (x.requires_grad()) {
        ArrayX dcol(rows * patch);
        MapMatrix(dcol.data(), rows, patch).noalias() = g * w.as_matrix(patch, cout).transpose();
        col2im(dcol, h, wd, cin, kh, kw, stride, dilation, pad, x.grad());
      }
    });
  }
  return out;
}

Tensor pool_global_mean(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("pool_global_mean: input must be H x W x C");
  const Index hw = x.dim(0) * x.dim(1), c = x.dim(2);
  bool rec = recording(x);
  Tensor out = Tensor::zeros({c});
  if (rec) out.set_requires_grad();
  out.as_matrix(1, c).row(0) = x.as_matrix(hw, c).colwise().mean();
  if (rec) {
    Tape::active()->record([x, out, hw, c]() mutable {
      x.grad_matrix(hw, c).rowwise() += out.grad_matrix(1, c).row(0) / static_cast<Scalar>(hw);
    });
  }
  return out;
}

Tensor pool_global_max(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("pool_global_max: input must be H x W x C");
  const Index hw = x.dim(0) * x.dim(1), c = x.dim(2);
  bool rec = recording(x);
  Tensor out = Tensor::zeros({c});
  if (rec) out.set_requires_grad();
  std::vector<Index> argmax(static_cast<size_t>(c), 0);
  auto xm = x.as_matrix(hw, c);
  for (Index ch = 0; ch < c; ++ch) {
    Index best = 0;
    for (Index p = 1; p < hw; ++p) {
      if (xm(p, ch) > xm(best, ch)) best = p;  // strict: ties keep the first
    }
    argmax[static_cast<size_t>(ch)] = best;
    out.data()[ch] = xm(best, ch);
  }
  if (rec) {
    Tape::active()->record([x, out, argmax, hw, c]() mutable {
      auto xg = x.grad_matrix(hw, c);
      for (Index ch = 0; ch < c; ++ch) xg(argmax[static_cast<size_t>(ch)], ch) += out.grad()[ch];
    });
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1)) {
    throw ShapeError("concat_channels: spatial dims must match, got " +
                     shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  }
  const Index hw = a.dim(0) * a.dim(1), ca = a.dim(2), cb = b.dim(2);
  bool rec = recording(a, b);
  Tensor out = Tensor::zeros({a.dim(0), a.dim(1), ca + cb});
  if (rec) out.set_requires_grad();
  auto om = out.as_matrix(hw, ca + cb);
  om.leftCols(ca) = a.as_matrix(hw, ca);
  om.rightCols(cb) = b.as_matrix(hw, cb);
  if (rec) {
    Tape::active()->record([a, b, out, hw, ca, cb]() mutable {
      auto g = out.grad_matrix(hw, ca + cb);
      if (a.requires_grad()) a.grad_matrix(hw, ca) += g.leftCols(ca);
      if (b.requires_grad()) b.grad_matrix(hw, cb) += g.rightCols(cb);
    });
  }
  return out;
}

Tensor concat_vec(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1) throw ShapeError("concat_vec: rank-1 tensors required");
  const Index na = a.dim(0), nb = b.dim(0);
  bool rec = recording(a, b);
  Tensor out = Tensor::zeros({na + nb});
  if (rec) out.set_requires_grad();
  out.data().head(na) = a.data();
  out.data().tail(nb) = b.data();
  if (rec) {
    Tape::active()->record([a, b, out, na, nb]() mutable {
      if (a.requires_grad()) a.grad() += out.grad().head(na);
      if (b.requires_grad()) b.grad() += out.grad().tail(nb);
    });
  }
  return out;
}

Tensor index_vec(const Tensor& x, Index k) {
  if (x.rank() != 1 || k < 0 || k >= x.dim(0)) {
    throw ShapeError("index_vec: index " + std::to_string(k) + " out of range for " +
                     shape_to_string(x.shape()));
  }
  bool rec = recording(x);
  Tensor out = Tensor::scalar(x.data()[k]);
  if (rec) {
    out.set_requires_grad();
    Tape::active()->record([x, out, k]() mutable { x.grad()[k] += out.grad()[0]; });
  }
  return out;
}

Tensor upsample_nearest2(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("upsample_nearest2: input must be H x W x C");
  const Index h = x.dim(0), w = x.dim(1), c = x.dim(2);
  bool rec = recording(x);
  Tensor out = Tensor::zeros({2 * h, 2 * w, c});
  if (rec) out.set_requires_grad();
  for (Index i = 0; i < 2 * h; ++i) {
    for (Index j = 0; j < 2 * w; ++j) {
      const Scalar* src = x.data().data() + ((i / 2) * w + j / 2) * c;
      Scalar* dst = out.data().data() + (i * 2 * w + j) * c;
      for (Index ch = 0; ch < c; ++ch) dst[ch] = src[ch];
    }
  }
  if (rec) {
    Tape::active()->record([x, out, h, w, c]() mutable {
      for (Index i = 0; i < 2 * h; ++i) {
        for (Index j = 0; j < 2 * w; ++j) {
          const Scalar* src = out.grad().data() + (i * 2 * w + j) * c;
          Scalar* dst = x.grad().data() + ((i / 2) * w + j / 2) * c;
          for (Index ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
    });
  }
  return out;
}

Tensor crop(const Tensor& x, Index r0, Index c0, Index h, Index w) {
  if (x.rank() != 3) throw ShapeError("crop: input must be H x W x C");
  if (r0 < 0 || c0 < 0 || r0 + h > x.dim(0) || c0 + w > x.dim(1)) {
    throw ShapeError("crop: window [" + std::to_string(r0) + "," + std::to_string(c0) + "," +
                     std::to_string(h) + "," + std::to_string(w) + "] outside " +
                     shape_to_string(x.shape()));
  }
  const Index c = x.dim(2), xw = x.dim(1);
  bool rec = recording(x);
  Tensor out = Tensor::zeros({h, w, c});
  if (rec) out.set_requires_grad();
  for (Index i = 0; i < h; ++i) {
    const Scalar* src = x.data().data() + ((r0 + i) * xw + c0) * c;
    Scalar* dst = out.data().data() + i * w * c;
    std::copy(src, src + w * c, dst);
  }
  if (rec) {
    Tape::active()->record([x, out, r0, c0, h, w, c, xw]() mutable {
      for (Index i = 0; i < h; ++i) {
        const Scalar* src = out.grad().data() + i * w * c;
        Scalar* dst = x.grad().data() + ((r0 + i) * xw + c0) * c;
        for (Index k = 0; k < w * c; ++k) dst[k] += src[k];
      }
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  bool rec = recording(x);
  Tensor out = Tensor::scalar(x.data().sum());
  if (rec) {
    out.set_requires_grad();
    Tape::active()->record([x, out]() mutable { x.grad() += out.grad()[0]; });
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  bool rec = recording(x);
  const Scalar n = static_cast<Scalar>(x.size());
  Tensor out = Tensor::scalar(x.data().mean());
  if (rec) {
    out.set_requires_grad();
    Tape::active()->record([x, out, n]() mutable { x.grad() += out.grad()[0] / n; });
  }
  return out;
}

Tensor clamp_max_const(const Tensor& x, Scalar cap) {
  bool rec = recording(x);
  Tensor out = make_like(x, rec);
  out.data() = x.data().min(cap);
  if (rec) {
    Tape::active()->record([x, out, cap]() mutable {
      x.grad() += out.grad() * (x.data() <= cap).cast<Scalar>();
    });
  }
  return out;
}

Tensor clamp_min_const(const Tensor& x, Scalar floor) {
  bool rec = recording(x);
  Tensor out = make_like(x, rec);
  out.data() = x.data().max(floor);
  if (rec) {
    Tape::active()->record([x, out, floor]() mutable {
      x.grad() += out.grad() * (x.data() >= floor).cast<Scalar>();
    });
  }
  return out;
}

}  // namespace tempattn
