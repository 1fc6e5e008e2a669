#pragma once

#include "tempattn/tensor.hpp"

namespace tempattn {

// Elementwise arithmetic (shapes must match exactly; no broadcasting beyond
// the scalar / per-channel-bias helpers below).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_const(const Tensor& x, Scalar c);
Tensor mul_const(const Tensor& x, Scalar c);

// x[..., c] + b[c] where b has the length of the last axis.
Tensor add_channel_bias(const Tensor& x, const Tensor& b);

// Rank-2 linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Same data, new shape (element count must be preserved).
Tensor reshape(const Tensor& x, Shape shape);

// Elementwise nonlinearities.
Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor leaky_relu(const Tensor& x, Scalar slope);
Tensor relu(const Tensor& x);
Tensor abs_op(const Tensor& x);

// Row-wise stable softmax of a rank-2 tensor; rows sum to 1. NaN input is a
// numeric error.
Tensor softmax_rows(const Tensor& x);

// Softplus in the decreasing form ln(1 + e^(-x)); derivative -sigmoid(-x).
Tensor softplus_decreasing(const Tensor& x);
// Conventional increasing form ln(1 + e^(x)); derivative sigmoid(x).
Tensor softplus_increasing(const Tensor& x);

// Row-wise L2 normalization of a rank-2 tensor; all-zero rows stay zero.
Tensor l2_normalize_rows(const Tensor& x);

// x / t where t is a positive single-element tensor; differentiable in both.
Tensor div_by_scalar(const Tensor& x, const Tensor& t);

// 2-D convolution over an H x W x C cube with kernel [kh, kw, Cin, Cout]
// (cross-correlation, zero padding). Output is H' x W' x Cout.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int dilation,
              int pad);

// Global pooling over the spatial axes of an H x W x C cube -> [C].
Tensor pool_global_mean(const Tensor& x);
// Max pooling routes the gradient to the first (row-major) argmax per channel.
Tensor pool_global_max(const Tensor& x);

// Channel concatenation of two H x W x C cubes, and rank-1 concatenation.
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor concat_vec(const Tensor& a, const Tensor& b);

// Single element of a rank-1 tensor as a scalar tensor.
Tensor index_vec(const Tensor& x, Index k);

// Nearest-neighbour 2x spatial upsampling of an H x W x C cube.
Tensor upsample_nearest2(const Tensor& x);

// Spatial crop of an H x W x C cube.
Tensor crop(const Tensor& x, Index r0, Index c0, Index h, Index w);

// Reductions to a scalar tensor.
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// min(x, cap) elementwise; gradient passes where x <= cap.
Tensor clamp_max_const(const Tensor& x, Scalar cap);

// max(x, floor) elementwise; gradient passes where x >= floor.
Tensor clamp_min_const(const Tensor& x, Scalar floor);

// Raw im2col/col2im on flat buffers (no autograd): patch rows are laid out
// patch-row-major with channels fastest, matching the kernel layout above.
void im2col(const ArrayX& x, Index h, Index w, Index c, int kh, int kw, int stride, int dilation,
            int pad, ArrayX& col, Index& out_h, Index& out_w);
void col2im(const ArrayX& col, Index h, Index w, Index c, int kh, int kw, int stride, int dilation,
            int pad, ArrayX& x);

}  // namespace tempattn
