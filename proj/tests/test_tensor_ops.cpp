#include "tempattn/ops.hpp"
#include "tempattn/tensor.hpp"

#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace tempattn;
using testutil::gradcheck;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, Scalar lo = -1.0, Scalar hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = rng.range(lo, hi);
  return t;
}

// Keeps values away from the kinks of abs / leaky_relu so central differences
// stay valid.
Tensor random_away_from_zero(Shape shape, Rng& rng, Scalar margin = 0.05) {
  Tensor t = random_tensor(std::move(shape), rng);
  for (Index i = 0; i < t.size(); ++i) {
    if (std::abs(t.data()[i]) < margin) t.data()[i] = t.data()[i] < 0 ? -margin : margin;
  }
  return t;
}

}  // namespace

TEST_CASE("tape computes chain-rule gradients for a small expression") {
  Tensor a = Tensor::scalar(2.0, true);
  Tensor b = Tensor::scalar(3.0, true);
  Tape tape;
  // y = (a + b) * a  =>  dy/da = 2a + b = 7, dy/db = a = 2
  Tensor y = mul(add(a, b), a);
  tape.backward(y);
  CHECK(y.value() == doctest::Approx(10.0));
  CHECK(a.grad()[0] == doctest::Approx(7.0));
  CHECK(b.grad()[0] == doctest::Approx(2.0));
}

TEST_CASE("gradients accumulate across multiple uses and backward is repeatable bit-for-bit") {
  Rng rng(7);
  Tensor x = random_tensor({4, 4}, rng);
  x.set_requires_grad();
  ArrayX first;
  for (int round = 0; round < 2; ++round) {
    Tape tape;
    x.zero_grad();
    Tensor y = mul(sigmoid(x), tanh_op(x));
    Tensor loss = mean_all(y);
    tape.backward(loss);
    if (round == 0) {
      first = x.grad();
    } else {
      for (Index i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == first[i]);
    }
    for (Index i = 0; i < x.size(); ++i) CHECK(std::isfinite(x.grad()[i]));
  }
}

TEST_CASE("matmul matches hand-computed product") {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({2, 1}, {1, 1});
  Tensor y = matmul(a, b);
  CHECK(y.at2(0, 0) == doctest::Approx(3.0));
  CHECK(y.at2(1, 0) == doctest::Approx(7.0));
  CHECK_THROWS_AS(matmul(a, Tensor::zeros({3, 2})), ShapeError);
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(11);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Tensor r = random_tensor({3, 2}, rng);  // fixed projection makes the loss scalar
  auto res = gradcheck({a, b}, [&]() { return sum_all(mul(matmul(a, b), r)); });
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("transpose is an involution and routes gradients") {
  Rng rng(12);
  Tensor a = random_tensor({3, 5}, rng);
  Tensor t2 = transpose(transpose(a));
  for (Index i = 0; i < a.size(); ++i) CHECK(t2.data()[i] == a.data()[i]);
  Tensor r = random_tensor({5, 3}, rng);
  auto res = gradcheck({a}, [&]() { return sum_all(mul(transpose(a), r)); });
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("reshape preserves data and gradient flow") {
  Rng rng(13);
  Tensor a = random_tensor({2, 6}, rng);
  Tensor r = reshape(a, {3, 4});
  for (Index i = 0; i < a.size(); ++i) CHECK(r.data()[i] == a.data()[i]);
  CHECK_THROWS_AS(reshape(a, {5, 5}), ShapeError);
  auto res = gradcheck({a}, [&]() { return mean_all(sigmoid(reshape(a, {4, 3}))); });
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("softmax rows sum to one and match the direct formula") {
  Rng rng(17);
  Tensor x = random_tensor({7, 13}, rng, -4.0, 4.0);
  Tensor y = softmax_rows(x);
  for (Index i = 0; i < 7; ++i) {
    Scalar sum = 0.0;
    std::vector<Scalar> row(13);
    for (Index j = 0; j < 13; ++j) {
      sum += y.at2(i, j);
      row[static_cast<size_t>(j)] = x.at2(i, j);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    auto expect = testutil::softmax_oracle(row, 1.0);
    for (Index j = 0; j < 13; ++j) {
      CHECK(y.at2(i, j) == doctest::Approx(expect[static_cast<size_t>(j)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax is shift-stable and rejects NaN") {
  Tensor big = Tensor::from({1, 3}, {1000.0, 1001.0, 1002.0});
  Tensor small = Tensor::from({1, 3}, {0.0, 1.0, 2.0});
  Tensor yb = softmax_rows(big);
  Tensor ys = softmax_rows(small);
  for (Index j = 0; j < 3; ++j) {
    CHECK(std::isfinite(yb.at2(0, j)));
    CHECK(yb.at2(0, j) == doctest::Approx(ys.at2(0, j)).epsilon(1e-12));
  }
  Tensor single = Tensor::from({1, 1}, {42.0});
  CHECK(softmax_rows(single).value() == doctest::Approx(1.0));
  Tensor bad = Tensor::from({1, 2}, {0.0, std::nan("")});
  CHECK_THROWS_AS(softmax_rows(bad), NumericError);
}

TEST_CASE("softmax gradient matches finite differences") {
  Rng rng(19);
  Tensor x = random_tensor({4, 6}, rng, -2.0, 2.0);
  Tensor r = random_tensor({4, 6}, rng);
  auto res = gradcheck({x}, [&]() { return sum_all(mul(softmax_rows(x), r)); });
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("decreasing softplus takes the printed form ln(1+e^(-x))") {
  Tensor x = Tensor::from({4}, {0.0, 40.0, -40.0, 1.0});
  Tensor y = softplus_decreasing(x);
  CHECK(y.data()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // At +40 the decreasing form is tiny (~e^-40), not ~40 as the increasing
  // form would give.
  CHECK(y.data()[1] == doctest::Approx(std::exp(-40.0)).epsilon(1e-10));
  CHECK(y.data()[1] < 1e-17);
  CHECK(y.data()[2] == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(y.data()[3] == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-15));
  // strictly positive and monotone decreasing
  Scalar prev = std::numeric_limits<Scalar>::infinity();
  for (Scalar v = -6.0; v <= 6.0; v += 0.25) {
    Scalar s = softplus_decreasing(Tensor::scalar(v)).value();
    CHECK(s > 0.0);
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("softplus gradients match finite differences in both forms") {
  Rng rng(23);
  Tensor x = random_tensor({10}, rng, -3.0, 3.0);
  Tensor r = random_tensor({10}, rng);
  auto dec = gradcheck({x}, [&]() { return sum_all(mul(softplus_decreasing(x), r)); });
  CHECK(dec.max_rel_err < 1e-6);
  auto inc = gradcheck({x}, [&]() { return sum_all(mul(softplus_increasing(x), r)); });
  CHECK(inc.max_rel_err < 1e-6);
}

TEST_CASE("conv2d with a 1x1 identity kernel reproduces the input") {
  Rng rng(29);
  Tensor x = random_tensor({5, 4, 3}, rng);
  Tensor w = Tensor::zeros({1, 1, 3, 3});
  for (Index c = 0; c < 3; ++c) w.data()[c * 3 + c] = 1.0;
  Tensor b = Tensor::zeros({3});
  Tensor y = conv2d(x, w, b, 1, 1, 0);
  REQUIRE(y.shape() == Shape{5, 4, 3});
  for (Index i = 0; i < x.size(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv2d matches the straight-loop oracle across strides, dilations and padding") {
  Rng rng(31);
  const struct {
    Index h, w, cin, cout;
    int k, stride, dilation, pad;
  } cases[] = {
      {7, 7, 3, 4, 3, 1, 1, 1}, {8, 6, 2, 5, 3, 2, 1, 1}, {9, 9, 4, 2, 3, 1, 2, 2},
      {6, 8, 3, 3, 5, 2, 1, 2}, {11, 7, 2, 2, 3, 1, 4, 4}, {5, 5, 1, 1, 1, 1, 1, 0},
  };
  for (const auto& cs : cases) {
    Tensor x = random_tensor({cs.h, cs.w, cs.cin}, rng);
    Tensor w = random_tensor({cs.k, cs.k, cs.cin, cs.cout}, rng);
    Tensor b = random_tensor({cs.cout}, rng);
    Tensor y = conv2d(x, w, b, cs.stride, cs.dilation, cs.pad);
    ArrayX expect = testutil::conv2d_oracle(x.data(), cs.h, cs.w, cs.cin, w.data(), cs.k, cs.k,
                                            cs.cout, b.data(), cs.stride, cs.dilation, cs.pad);
    REQUIRE(y.size() == expect.size());
    for (Index i = 0; i < y.size(); ++i) CHECK(std::abs(y.data()[i] - expect[i]) < 1e-12);
  }
}

TEST_CASE("conv2d rejects inconsistent shapes") {
  Tensor x = Tensor::zeros({4, 4, 3});
  Tensor w = Tensor::zeros({3, 3, 2, 4});  // wrong input channel count
  Tensor b = Tensor::zeros({4});
  CHECK_THROWS_AS(conv2d(x, w, b, 1, 1, 1), ShapeError);
  Tensor w2 = Tensor::zeros({9, 9, 3, 4});  // kernel larger than padded input
  CHECK_THROWS_AS(conv2d(x, w2, Tensor::zeros({4}), 1, 1, 0), ShapeError);
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(37);
  Tensor x = random_tensor({5, 5, 2}, rng);
  Tensor w = random_tensor({3, 3, 2, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  Tensor r = random_tensor({3, 3, 3}, rng);
  auto res = gradcheck({x, w, b}, [&]() { return sum_all(mul(conv2d(x, w, b, 2, 1, 1), r)); });
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("global pools reduce over space and route gradients correctly") {
  Tensor x = Tensor::from({2, 2, 2}, {1, 10, 2, 20, 3, 30, 4, 40});
  Tensor gm = pool_global_mean(x);
  CHECK(gm.data()[0] == doctest::Approx(2.5));
  CHECK(gm.data()[1] == doctest::Approx(25.0));
  Tensor gx = pool_global_max(x);
  CHECK(gx.data()[0] == doctest::Approx(4.0));
  CHECK(gx.data()[1] == doctest::Approx(40.0));

  // A tie sends the max gradient to the first position in row-major order.
  Tensor tie = Tensor::from({2, 1, 1}, {7.0, 7.0});
  tie.set_requires_grad();
  Tape tape;
  Tensor y = pool_global_max(tie);
  tape.backward(sum_all(y));
  CHECK(tie.grad()[0] == doctest::Approx(1.0));
  CHECK(tie.grad()[1] == doctest::Approx(0.0));
}

TEST_CASE("global pool gradients match finite differences") {
  Rng rng(41);
  Tensor x = random_tensor({4, 3, 3}, rng);
  // Spread values so the max is unique per channel.
  for (Index i = 0; i < x.size(); ++i) x.data()[i] += 0.001 * static_cast<Scalar>(i);
  Tensor r = random_tensor({3}, rng);
  auto mean_res = gradcheck({x}, [&]() { return sum_all(mul(pool_global_mean(x), r)); });
  CHECK(mean_res.max_rel_err < 1e-6);
  auto max_res = gradcheck({x}, [&]() { return sum_all(mul(pool_global_max(x), r)); });
  CHECK(max_res.max_rel_err < 1e-6);
}

TEST_CASE("row normalization produces unit rows and leaves zero rows at zero") {
  Rng rng(43);
  Tensor x = random_tensor({5, 6}, rng);
  for (Index j = 0; j < 6; ++j) x.at2(2, j) = 0.0;
  Tensor y = l2_normalize_rows(x);
  for (Index i = 0; i < 5; ++i) {
    Scalar norm = 0.0;
    for (Index j = 0; j < 6; ++j) norm += y.at2(i, j) * y.at2(i, j);
    if (i == 2) {
      CHECK(norm == 0.0);
    } else {
      CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  // Gradient check on rows bounded away from zero (the op is not
  // differentiable at the zero row, where the implementation uses 0).
  Tensor xs = random_away_from_zero({5, 6}, rng, 0.2);
  Tensor r = random_tensor({5, 6}, rng);
  auto res = gradcheck({xs}, [&]() { return sum_all(mul(l2_normalize_rows(xs), r)); });
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("division by a scalar tensor is differentiable in both arguments") {
  Rng rng(47);
  Tensor x = random_tensor({3, 4}, rng);
  Tensor t = Tensor::scalar(0.7);
  Tensor y = div_by_scalar(x, t);
  CHECK(y.at2(1, 2) == doctest::Approx(x.at2(1, 2) / 0.7));
  CHECK_THROWS_AS(div_by_scalar(x, Tensor::scalar(0.0)), NumericError);
  Tensor r = random_tensor({3, 4}, rng);
  auto res = gradcheck({x, t}, [&]() { return sum_all(mul(div_by_scalar(x, t), r)); });
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("elementwise ops and bias addition match finite differences") {
  Rng rng(53);
  Tensor a = random_away_from_zero({3, 5}, rng);
  Tensor b = random_away_from_zero({3, 5}, rng);
  Tensor bias = random_tensor({5}, rng);
  Tensor r = random_tensor({3, 5}, rng);
  auto res = gradcheck({a, b, bias}, [&]() {
    Tensor s = add(mul(a, b), sub(a, b));
    s = add_channel_bias(s, bias);
    s = add_const(mul_const(s, 1.3), 0.2);
    s = mul(abs_op(s), leaky_relu(s, 0.2));
    s = add(sigmoid(s), tanh_op(relu(s)));
    return sum_all(mul(s, r));
  });
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("concat, index, upsample, crop and clamp behave and differentiate") {
  Rng rng(59);
  Tensor a = random_tensor({2, 3, 2}, rng);
  Tensor b = random_tensor({2, 3, 1}, rng);
  Tensor cat = concat_channels(a, b);
  REQUIRE(cat.shape() == Shape{2, 3, 3});
  CHECK(cat.at3(1, 2, 0) == a.at3(1, 2, 0));
  CHECK(cat.at3(1, 2, 2) == b.at3(1, 2, 0));

  Tensor v1 = random_tensor({3}, rng);
  Tensor v2 = random_tensor({2}, rng);
  Tensor vc = concat_vec(v1, v2);
  CHECK(vc.data()[4] == v2.data()[1]);
  CHECK(index_vec(vc, 1).value() == v1.data()[1]);
  CHECK_THROWS_AS(index_vec(vc, 9), ShapeError);

  Tensor up = upsample_nearest2(a);
  REQUIRE(up.shape() == Shape{4, 6, 2});
  CHECK(up.at3(3, 5, 1) == a.at3(1, 2, 1));

  Tensor cr = crop(up, 1, 2, 2, 3);
  REQUIRE(cr.shape() == Shape{2, 3, 2});
  CHECK(cr.at3(0, 0, 0) == up.at3(1, 2, 0));
  CHECK_THROWS_AS(crop(up, 3, 4, 4, 4), ShapeError);

  Tensor r3 = random_tensor({4, 6, 3}, rng);
  auto res = gradcheck({a, b, v1, v2}, [&]() {
    Tensor big = upsample_nearest2(concat_channels(a, mul_const(b, 2.0)));
    Tensor c = crop(big, 0, 0, 4, 6);
    Tensor head = mul(clamp_max_const(c, 0.5), r3);
    Tensor tailv = mul(concat_vec(v1, v2), concat_vec(v1, v2));
    return add(mean_all(head), sum_all(tailv));
  });
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("clamp_max_const caps values and kills gradient beyond the cap") {
  Tensor x = Tensor::from({3}, {0.5, 2.0, -1.0});
  x.set_requires_grad();
  Tape tape;
  Tensor y = clamp_max_const(x, 1.0);
  CHECK(y.data()[0] == 0.5);
  CHECK(y.data()[1] == 1.0);
  CHECK(y.data()[2] == -1.0);
  tape.backward(sum_all(y));
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 1.0);
}

TEST_CASE("clamp_min_const floors values and kills gradient below the floor") {
  Tensor x = Tensor::from({3}, {0.5, 2.0, -1.0});
  x.set_requires_grad();
  Tape tape;
  Tensor y = clamp_min_const(x, 1.0);
  CHECK(y.data()[0] == 1.0);
  CHECK(y.data()[1] == 2.0);
  CHECK(y.data()[2] == 1.0);
  tape.backward(sum_all(y));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
  CHECK(x.grad()[2] == 0.0);
}

TEST_CASE("detach stops gradient flow") {
  Tensor a = Tensor::scalar(2.0, true);
  Tape tape;
  Tensor y = mul(a, a.detach());
  tape.backward(y);
  CHECK(a.grad()[0] == doctest::Approx(2.0));  // only the live branch contributes
}

TEST_CASE("string formatting of shapes") {
  CHECK(shape_to_string({2, 3, 4}) == "[2,3,4]");
}
