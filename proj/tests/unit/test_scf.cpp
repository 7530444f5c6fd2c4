#include <doctest.h>

#include "helpers.hpp"
#include "misc/scf.hpp"

using namespace misc;
using misc::test::random_tensor;

namespace {

scf::ScfParams<double> random_params(Rng& rng, int n, int h, int w, double max_offset) {
  scf::ScfParams<double> p;
  p.n = n;
  p.k_v = random_tensor<double>(rng, {n, h, w}, -1, 1);
  p.k_h = random_tensor<double>(rng, {n, h, w}, -1, 1);
  p.p_x = random_tensor<double>(rng, {n * n, h, w}, -max_offset, max_offset);
  p.p_y = random_tensor<double>(rng, {n * n, h, w}, -max_offset, max_offset);
  p.w = channel_softmax(random_tensor<double>(rng, {n * n, h, w}, -2, 2));
  return p;
}

}  // namespace

TEST_CASE("tap grid is centered and row-major") {
  const scf::TapGrid g(5);
  CHECK(g.taps() == 25);
  CHECK(g.base_dx(0) == -2);
  CHECK(g.base_dy(0) == -2);
  CHECK(g.base_dx(12) == 0);
  CHECK(g.base_dy(12) == 0);
  CHECK(g.base_dx(7) == 0);
  CHECK(g.base_dy(7) == -1);
}

TEST_CASE("outer_kernel: delta, uniform and rank one") {
  const auto d = scf::outer_kernel<double>({0, 1, 0}, {0, 1, 0});
  for (int i = 0; i < 9; ++i) CHECK(d[static_cast<std::size_t>(i)] == (i == 4 ? 1.0 : 0.0));
  const auto u = scf::outer_kernel<double>({0.2, 0.2, 0.2, 0.2, 0.2}, {0.2, 0.2, 0.2, 0.2, 0.2});
  for (double v : u.data()) CHECK(v == doctest::Approx(0.04));
  const auto r = scf::outer_kernel<double>({0.3, -1.2, 2.0}, {0.7, 0.1, -0.4});
  for (int i = 0; i + 1 < 3; ++i)
    for (int j = 0; j + 1 < 3; ++j) {
      const double minor = r[i * 3 + j] * r[(i + 1) * 3 + j + 1] - r[i * 3 + j + 1] * r[(i + 1) * 3 + j];
      CHECK(std::abs(minor) <= 1e-15);
    }
}

TEST_CASE("estimate_params shapes and zero-initialized estimators") {
  auto rng = make_rng(1, "estimate");
  const int n = 7;
  const auto f = random_tensor<float>(rng, {4, 8, 8});
  const auto fa = random_tensor<float>(rng, {4, 8, 8});
  const ConvParams<float> ek{random_tensor<float>(rng, {2 * n, 8, 1, 1}), Tensor({2 * n})};
  const ConvParams<float> eo{Tensor({2 * n * n, 8, 1, 1}), Tensor({2 * n * n})};
  const ConvParams<float> ew{Tensor({n * n, 8, 1, 1}), Tensor({n * n})};
  const auto p = scf::estimate_params(f, fa, scf::Estimators<float>{&ek, &eo, &ew}, n);
  CHECK(p.k_v.shape() == Shape{7, 8, 8});
  CHECK(p.k_h.shape() == Shape{7, 8, 8});
  CHECK(p.p_x.shape() == Shape{49, 8, 8});
  CHECK(p.w.shape() == Shape{49, 8, 8});
  for (float v : p.w.data()) CHECK(v == doctest::Approx(1.0 / 49));
  for (float v : p.p_x.data()) CHECK(v == 0.0f);
  for (float v : p.p_y.data()) CHECK(v == 0.0f);

  const ConvParams<float> wrong{Tensor({5, 8, 1, 1}), Tensor({5})};
  CHECK_THROWS_AS(scf::estimate_params(f, fa, scf::Estimators<float>{&wrong, nullptr, nullptr}, n), ConfigError);

  // Missing estimators fall back to fixed values.
  const auto fixed = scf::estimate_params(f, fa, scf::Estimators<float>{}, 3);
  for (float v : fixed.k_v.data()) CHECK(v == 1.0f);
  for (float v : fixed.w.data()) CHECK(v == doctest::Approx(1.0 / 9));
}

TEST_CASE("scf_filter matches the brute-force oracle for every odd n") {
  auto rng = make_rng(2, "sep");
  for (int n : {1, 3, 5, 7}) {
    for (int trial = 0; trial < 4; ++trial) {
      const auto img = random_tensor<double>(rng, {3, 16, 16}, 0, 1);
      const auto p = random_params(rng, n, 16, 16, 2.5);
      const auto ref = scf::scf_filter_bruteforce(img, p);
      CHECK(max_abs_diff(scf::scf_filter(img, p), ref) <= 1e-10);
      const auto f32 = scf::scf_filter(img.cast<float>(), p.cast<float>());
      CHECK(max_abs_diff(f32.cast<double>(), ref) <= 1e-5);
    }
  }
}

TEST_CASE("scf_filter closed forms: identity and constant image") {
  auto rng = make_rng(3, "closed");
  const auto img = random_tensor<float>(rng, {3, 9, 11}, 0, 1);
  for (int n : {1, 3, 5, 7}) CHECK(scf::scf_filter(img, scf::identity_params<float>(n, 9, 11)) == img);

  const int n = 5;
  scf::ScfParams<double> p{n, Tensor64({n, 6, 6}, 1.0 / n), Tensor64({n, 6, 6}, 1.0 / n), Tensor64({n * n, 6, 6}),
                           Tensor64({n * n, 6, 6}), Tensor64({n * n, 6, 6}, 1.0 / (n * n))};
  const auto out = scf::scf_filter(Tensor64({3, 6, 6}, 0.8), p);
  for (double v : out.data()) CHECK(v == doctest::Approx(0.8 / 25).epsilon(1e-12));
}

TEST_CASE("scf_filter is linear in the image and local") {
  auto rng = make_rng(4, "lin");
  const int n = 3;
  const auto p = random_params(rng, n, 12, 12, 1.0);
  const auto a = random_tensor<double>(rng, {3, 12, 12});
  const auto b = random_tensor<double>(rng, {3, 12, 12});
  const auto lhs = scf::scf_filter(a * 0.7 + b * -1.3, p);
  const auto rhs = scf::scf_filter(a, p) * 0.7 + scf::scf_filter(b, p) * -1.3;
  CHECK(max_abs_diff(lhs, rhs) <= 1e-12);

  // radius (n - 1) / 2 + max|p| + 1 = 3 around (6, 6); change pixels outside it.
  auto c = a;
  for (int ch = 0; ch < 3; ++ch)
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x)
        if (std::abs(x - 6) > 3 || std::abs(y - 6) > 3) c(ch, y, x) += 5.0;
  const auto fa = scf::scf_filter(a, p), fc = scf::scf_filter(c, p);
  for (int ch = 0; ch < 3; ++ch) CHECK(fa(ch, 6, 6) == fc(ch, 6, 6));
}

TEST_CASE("n = 1 degenerates to one weighted sample") {
  auto rng = make_rng(5, "n1");
  const auto img = random_tensor<double>(rng, {3, 5, 5});
  const auto p = random_params(rng, 1, 5, 5, 1.5);
  const auto out = scf::scf_filter(img, p);
  const double coef = p.w(0, 2, 3) * p.k_v(0, 2, 3) * p.k_h(0, 2, 3);
  const auto s = bilinear_sample(img, 3 + p.p_x(0, 2, 3), 2 + p.p_y(0, 2, 3));
  for (int c = 0; c < 3; ++c) CHECK(out(c, 2, 3) == doctest::Approx(coef * s[static_cast<std::size_t>(c)]).epsilon(1e-12));
}

TEST_CASE("scf rejects NaN parameters, even n and mismatched shapes") {
  auto p = scf::identity_params<float>(3, 4, 4);
  p.k_v[0] = std::nanf("");
  CHECK_THROWS_AS(scf::scf_filter(Tensor({3, 4, 4}), p), NumericError);
  auto even = scf::identity_params<float>(3, 4, 4);
  even.n = 4;
  CHECK_THROWS_AS(even.validate(), ConfigError);
  CHECK_THROWS_AS(scf::scf_filter(Tensor({3, 5, 4}), scf::identity_params<float>(3, 4, 4)), ConfigError);
}

TEST_CASE("taps_at reports grid plus residual and the product coefficient") {
  auto rng = make_rng(6, "taps");
  const auto p = random_params(rng, 3, 4, 4, 0.5);
  const auto taps = scf::taps_at(p, 1, 2);
  REQUIRE(taps.size() == 9);
  double total = 0;
  for (const auto& t : taps) {
    const int i = t.tap / 3, j = t.tap % 3;
    CHECK(t.dx == doctest::Approx(j - 1 + p.p_x(t.tap, 2, 1)));
    CHECK(t.dy == doctest::Approx(i - 1 + p.p_y(t.tap, 2, 1)));
    CHECK(t.coefficient == doctest::Approx(p.w(t.tap, 2, 1) * p.k_v(i, 2, 1) * p.k_h(j, 2, 1)));
    total += p.w(t.tap, 2, 1);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}
