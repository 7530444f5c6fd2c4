#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "misc/diffop.hpp"
#include "misc/mten.hpp"
#include "misc/ops.hpp"
#include "misc/verify/oracles.hpp"

using namespace misc;
using misc::test::random_tensor;

TEST_CASE("tensor rejects data whose length disagrees with the shape") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5)), ConfigError);
  CHECK_THROWS_AS(Tensor({2, -1}), ConfigError);
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK_THROWS_AS(t += Tensor({2, 3, 5}), ConfigError);
}

TEST_CASE("conv2d: identity 1x1, constant image under a box, nested-loop oracle") {
  auto rng = make_rng(3, "conv");
  const auto x = random_tensor<float>(rng, {3, 6, 5});
  Tensor w({3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) w[static_cast<std::size_t>(c * 3 + c)] = 1;
  CHECK(conv2d(x, w, Tensor({3})) == x);

  const Tensor flat({1, 5, 5}, 0.3f);
  const auto boxed = conv2d(flat, Tensor({1, 1, 3, 3}, 1.0f), Tensor({1}));
  for (float v : boxed.data()) CHECK(v == doctest::Approx(2.7).epsilon(1e-6));

  const auto x64 = random_tensor<double>(rng, {4, 5, 5});
  const auto w64 = random_tensor<double>(rng, {2, 4, 3, 3});
  const auto b64 = random_tensor<double>(rng, {2});
  const auto ref = verify::conv2d_oracle(x64, w64, b64);
  const auto got = conv2d(x64.cast<float>(), w64.cast<float>(), b64.cast<float>());
  CHECK(max_abs_diff(got.cast<double>(), ref) <= 1e-5);
  CHECK(max_abs_diff(conv2d(x64, w64, b64), ref) <= 1e-12);
}

TEST_CASE("conv2d rejects mismatched channels and even kernels") {
  const Tensor x({3, 4, 4});
  CHECK_THROWS_AS(conv2d(x, Tensor({2, 2, 3, 3}), Tensor({2})), ConfigError);
  CHECK_THROWS_AS(conv2d(x, Tensor({2, 3, 2, 2}), Tensor({2})), ConfigError);
  CHECK_THROWS_AS(conv2d(x, Tensor({2, 3, 3, 3}), Tensor({3})), ConfigError);
}

TEST_CASE("sigmoid values and saturation") {
  const Tensor64 x({1, 1, 3}, std::vector<double>{0, 100, -100});
  const auto y = sigmoid(x);
  CHECK(y[0] == 0.5);
  CHECK(std::abs(y[1] - 1.0) <= 1e-9);
  CHECK(y[2] > 0);
  const auto g = sigmoid_backward(y, Tensor64({1, 1, 3}, 1.0));
  CHECK(g[0] == doctest::Approx(0.25).epsilon(1e-12));
  const double h = 1e-5;
  const double fd = (1 / (1 + std::exp(-h)) - 1 / (1 + std::exp(h))) / (2 * h);
  CHECK(std::abs(fd - g[0]) <= 1e-9);
}

TEST_CASE("channel_softmax: uniform, saturated, normalized, shift invariant") {
  const auto u = channel_softmax(Tensor({4, 2, 2}));
  for (float v : u.data()) CHECK(v == doctest::Approx(0.25));

  Tensor sat({4, 1, 1});
  sat[0] = 10;
  // e^10 / (e^10 + 3) = 0.99986: saturated, though not past 0.9999.
  CHECK(channel_softmax(sat)[0] == doctest::Approx(1 / (1 + 3 * std::exp(-10.0))).epsilon(1e-6));
  CHECK(channel_softmax(sat)[0] > 0.9998f);

  auto rng = make_rng(5, "softmax");
  const auto logits = random_tensor<float>(rng, {9, 4, 4}, -5, 5);
  const auto p = channel_softmax(logits);
  Tensor shifted = logits;
  for (int c = 0; c < 9; ++c)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) shifted(c, y, x) += static_cast<float>(y * 3 - x);
  const auto q = channel_softmax(shifted);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      double s = 0;
      for (int c = 0; c < 9; ++c) s += p(c, y, x);
      CHECK(std::abs(s - 1) <= 1e-6);
    }
  CHECK(max_abs_diff(p, q) <= 1e-6);
}

TEST_CASE("bilinear_sample: integer points, midpoints, clamping") {
  Tensor64 img({2, 2, 3});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i * i);
  CHECK(bilinear_sample(img, 2.0, 1.0)[0] == img(0, 1, 2));
  CHECK(bilinear_sample(img, 2.0, 1.0)[1] == img(1, 1, 2));
  CHECK(bilinear_sample(img, 0.5, 0.0)[0] == doctest::Approx((img(0, 0, 0) + img(0, 0, 1)) / 2));
  CHECK(bilinear_sample(img, 1.0, 0.5)[1] == doctest::Approx((img(1, 0, 1) + img(1, 1, 1)) / 2));
  CHECK(bilinear_sample(img, -4.0, 7.0)[0] == img(0, 1, 0));
  // Outside the image the coordinate gradient vanishes.
  const auto g = bilinear_sample_backward(img, -4.0, 0.5, {1.0, 1.0});
  CHECK(g.x == 0.0);
  CHECK(g.y != 0.0);
}

TEST_CASE("concat: empty operand, channel placement, gradient split") {
  auto rng = make_rng(1, "concat");
  const auto a = random_tensor<float>(rng, {2, 3, 3});
  const auto b = random_tensor<float>(rng, {3, 3, 3});
  CHECK(concat(a, Tensor({0, 3, 3})) == a);
  const auto ab = concat(a, b);
  CHECK(ab.channels() == 5);
  CHECK(ab(2, 1, 1) == b(0, 1, 1));
  const auto [ga, gb] = concat_backward(2, ab);
  CHECK(ga == a);
  CHECK(gb == b);
  CHECK_THROWS_AS(concat(a, Tensor({1, 3, 4})), ConfigError);
}

TEST_CASE("pooling and nearest upsampling are adjoint-consistent") {
  auto rng = make_rng(2, "pool");
  const auto x = random_tensor<double>(rng, {2, 4, 6});
  const auto y = random_tensor<double>(rng, {2, 2, 3});
  // <pool(x), y> == <x, pool_backward(y)>
  const auto px = avg_pool2(x);
  const auto bt = avg_pool2_backward(y);
  double l = 0, r = 0;
  for (std::size_t i = 0; i < y.size(); ++i) l += px[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) r += x[i] * bt[i];
  CHECK(std::abs(l - r) <= 1e-12);
  CHECK(avg_pool2(upsample_nearest2(y)) == y);
  CHECK_THROWS(avg_pool2(Tensor64({1, 3, 4})));
}

TEST_CASE("gradcheck: linear op is exact, sigmoid within 1e-6, wrong backward is caught") {
  auto rng = make_rng(4, "gc");
  DiffOp<double> cat{"concat",
                     [](const auto& in) { return concat(in[0], in[1]); },
                     [](const auto& in, const Tensor64& g) {
                       auto [a, b] = concat_backward(in[0].channels(), g);
                       return std::vector<Tensor64>{a, b};
                     }};
  const auto rep = gradcheck(cat, {random_tensor<double>(rng, {2, 3, 3}), random_tensor<double>(rng, {1, 3, 3})});
  CHECK(rep.passed);
  CHECK(rep.max_relative <= 1e-8);

  DiffOp<double> sig{"sigmoid", [](const auto& in) { return sigmoid(in[0]); },
                     [](const auto& in, const Tensor64& g) { return std::vector<Tensor64>{sigmoid_backward(sigmoid(in[0]), g)}; }};
  CHECK(gradcheck(sig, {random_tensor<double>(rng, {2, 4, 4}, -3, 3)}).max_relative <= 1e-6);

  DiffOp<double> bad = sig;
  bad.backward = [](const auto& in, const Tensor64& g) { return std::vector<Tensor64>{sigmoid_backward(in[0], g)}; };
  CHECK_FALSE(gradcheck(bad, {random_tensor<double>(rng, {2, 4, 4}, -3, 3)}).passed);

  DiffOp<double> misshaped = sig;
  misshaped.backward = [](const auto&, const Tensor64&) { return std::vector<Tensor64>{Tensor64({1})}; };
  CHECK_THROWS_AS(gradcheck(misshaped, {random_tensor<double>(rng, {2, 4, 4})}), NumericError);

  DiffOp<double> nan_op = sig;
  nan_op.forward = [](const auto& in) { return in[0] * std::nan(""); };
  CHECK_THROWS_AS(gradcheck(nan_op, {random_tensor<double>(rng, {1, 2, 2})}), NumericError);
}

TEST_CASE("MTEN round trip, dtype conversion and corruption reporting") {
  auto rng = make_rng(6, "mten");
  const auto t = random_tensor<float>(rng, {3, 5, 7});
  const auto bytes = encode_mten(t);
  CHECK(bytes.size() == 4 + 3 + 3 * 4 + t.size() * 4);
  CHECK(decode_mten<float>(bytes) == t);
  CHECK(decode_mten<double>(bytes) == t.cast<double>());
  const auto t64 = random_tensor<double>(rng, {4});
  CHECK(decode_mten<double>(encode_mten(t64)) == t64);
  CHECK(bytes[4] == kMtenVersion);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 3);
  CHECK(bytes[7] == 3);  // dims[0], little-endian
  CHECK(bytes[8] == 0);

  auto bad_magic = bytes;
  bad_magic[1] = 'X';
  CHECK_THROWS_AS(decode_mten<float>(bad_magic), IoError);
  const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 3);
  try {
    decode_mten<float>(truncated, 100);
    FAIL("truncated payload accepted");
  } catch (const IoError& e) {
    CHECK(e.offset() >= 100);
  }
  auto bad_dtype = bytes;
  bad_dtype[5] = 9;
  CHECK_THROWS_AS(decode_mten<float>(bad_dtype), IoError);
}
