#include "misc/verify/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "misc/blur.hpp"
#include "misc/metrics.hpp"
#include "misc/mga.hpp"
#include "misc/model.hpp"
#include "misc/model_io.hpp"
#include "misc/rng.hpp"
#include "misc/scf.hpp"
#include "misc/train.hpp"
#include "misc/verify/gradcheck_suite.hpp"
#include "misc/verify/oracles.hpp"

namespace misc::verify {

namespace {

template <typename T = float>
BasicTensor<T> random(Rng& rng, Shape shape, double lo = -1, double hi = 1) {
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(uniform(rng, lo, hi));
  return t;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Check make(std::string name, bool passed, std::string detail) { return {std::move(name), passed, std::move(detail)}; }

template <typename T>
scf::ScfParams<T> random_params(Rng& rng, int n, int H, int W, double max_offset) {
  const int taps = n * n;
  return {n,
          random<T>(rng, {n, H, W}),
          random<T>(rng, {n, H, W}),
          random<T>(rng, {taps, H, W}, -max_offset, max_offset),
          random<T>(rng, {taps, H, W}, -max_offset, max_offset),
          channel_softmax(random<T>(rng, {taps, H, W}, -2, 2))};
}

}  // namespace

Check check_separability(std::uint64_t seed) {
  auto rng = make_rng(seed, "separability");
  double worst = 0;
  for (int n : {1, 3, 5, 7}) {
    for (int i = 0; i < 50; ++i) {
      const auto image = random<float>(rng, {3, 16, 16}, 0, 1);
      const auto p = random_params<float>(rng, n, 16, 16, 3.0);
      const auto fast = scf::scf_filter(image, p);
      const auto ref = scf::scf_filter_bruteforce(image.cast<double>(), p.cast<double>());
      worst = std::max(worst, max_abs_diff(fast.cast<double>(), ref));
    }
  }
  return make("scf separability vs brute force (32-bit, n=1,3,5,7)", worst <= 1e-5, "max_abs=" + num(worst));
}

Check check_identity_configuration(std::uint64_t seed) {
  auto rng = make_rng(seed, "identity");
  double worst = 0;
  for (int n : {1, 3, 5, 7}) {
    const auto image = random<float>(rng, {3, 16, 16}, 0, 1);
    auto p = scf::identity_params<float>(n, 16, 16);
    Tensor logits({n * n, 16, 16});
    const int center = (n / 2) * n + n / 2;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) logits(center, y, x) = 200.0f;
    p.w = channel_softmax(logits);
    worst = std::max(worst, max_abs_diff(scf::scf_filter(image, p), image));
  }
  return make("identity configuration reproduces input", worst <= 1e-7, "max_abs=" + num(worst));
}

Check check_zero_flow(std::uint64_t seed) {
  auto rng = make_rng(seed, "zero-flow");
  int exact = 0;
  for (int i = 0; i < 20; ++i) {
    const auto image = random<float>(rng, {3, 12, 10}, 0, 1);
    const auto feature = random<float>(rng, {5, 12, 10});
    const mga::MotionField<float> flow{Tensor({2, 12, 10})};
    const mga::BlendMask<float> mask{random<float>(rng, {1, 12, 10}, 0, 1)};
    const auto r = mga::align_with(flow, mask, image, feature);
    exact += (r.image == image && r.feature == feature) ? 1 : 0;
  }
  return make("zero-flow alignment is exact", exact == 20, std::to_string(exact) + "/20 bit-exact");
}

Check check_gradients(std::uint64_t seed, const std::function<void(const Check&)>& on_case) {
  bool all = true;
  double worst = 0;
  std::string failed;
  auto cases = op_cases();
  cases.push_back(model_case());
  for (const auto& c : cases) {
    const auto r = run_case(c, 3, seed);
    all = all && r.passed;
    if (!r.passed) failed += " " + r.name;
    if (c.tolerance <= 1e-3) worst = std::max(worst, r.worst_relative);
    if (on_case) {
      on_case(make("gradcheck " + r.name, r.passed,
                   "max_rel=" + num(r.worst_relative) + " tol=" + num(c.tolerance) +
                       (r.error.empty() ? "" : " error=" + r.error)));
    }
  }
  return make("gradient suite (64-bit central differences)", all,
              "worst op max_rel=" + num(worst) + (failed.empty() ? "" : " failed:" + failed));
}

Check check_normalization(std::uint64_t seed) {
  auto rng = make_rng(seed, "normalization");
  double worst_w = 0;
  for (int n : {1, 3, 5, 7}) {
    const auto feature = random<float>(rng, {4, 8, 8});
    const ConvParams<float> ew{random<float>(rng, {n * n, 8, 1, 1}, -3, 3), random<float>(rng, {n * n})};
    const auto p = scf::estimate_params(feature, feature, scf::Estimators<float>{nullptr, nullptr, &ew}, n);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        double s = 0;
        for (int t = 0; t < n * n; ++t) s += p.w(t, y, x);
        worst_w = std::max(worst_w, std::abs(s - 1));
      }
    }
  }
  double worst_k = 0;
  int kernels = 0;
  for (double length = 1; length <= blur::kDefaultMaxLength; length += 0.75) {
    for (int a = 0; a < 24; ++a) {
      const auto k = blur::motion_kernel(length, uniform(rng, 0, 2 * std::numbers::pi));
      double s = 0;
      bool nonneg = true;
      for (double v : k.data()) {
        s += v;
        nonneg = nonneg && v >= 0;
      }
      worst_k = std::max(worst_k, nonneg ? std::abs(s - 1) : 1.0);
      ++kernels;
    }
  }
  return make("tap weights and PSFs are normalized", worst_w <= 1e-6 && worst_k <= 1e-6,
              "tap_sum_err=" + num(worst_w) + " psf_sum_err=" + num(worst_k) + " over " + std::to_string(kernels) +
                  " PSFs");
}

Check check_metric_oracles(std::uint64_t seed) {
  auto rng = make_rng(seed, "metrics");
  const auto a = random<float>(rng, {3, 32, 32}, 0, 0.9);
  Tensor b = a;
  for (auto& v : b.data()) v += 0.1f;
  // Uniform offsets of 0.1 in float are only 0.1 to ~1e-8; the tolerance
  // absorbs that.
  const double p = metrics::psnr(a, b);
  const double s_same = metrics::ssim(a, a);
  double worst_const = 0;
  for (double c : {0.1, 0.3, 0.5}) {
    for (double d : {0.0, 0.05, 0.2}) {
      const Tensor x({3, 16, 16}, static_cast<float>(c));
      const Tensor y({3, 16, 16}, static_cast<float>(c + d));
      // Luma of a gray float pixel is c up to float rounding of c itself.
      const double cx = static_cast<float>(c), cy = static_cast<float>(c + d);
      worst_const = std::max(worst_const, std::abs(metrics::ssim(x, y) - ssim_constant_closed_form(cx, cy - cx)));
    }
  }
  const bool ok = std::abs(p - 20.0) <= 1e-4 && std::abs(s_same - 1.0) <= 1e-9 && worst_const <= 1e-6;
  return make("PSNR/SSIM closed forms", ok,
              "psnr_uniform_0.1=" + metrics::format_metric(p, 6) + " ssim_self=" + metrics::format_metric(s_same, 12) +
                  " const_err=" + num(worst_const));
}

namespace {

using CheckFn = std::function<Check(std::uint64_t)>;

Check conv_oracle(std::uint64_t seed) {
  auto rng = make_rng(seed, "conv-oracle");
  double worst = 0;
  for (int k : {1, 3, 5}) {
    const auto x = random<double>(rng, {3, 5, 5});
    const auto w = random<double>(rng, {4, 3, k, k});
    const auto b = random<double>(rng, {4});
    worst = std::max(worst, max_abs_diff(conv2d(x, w, b), conv2d_oracle(x, w, b)));
    worst = std::max(worst, max_abs_diff(conv2d(x.cast<float>(), w.cast<float>(), b.cast<float>()).cast<double>(),
                                         conv2d_oracle(x, w, b)));
  }
  return make("conv2d matches nested-loop oracle", worst <= 1e-5, "max_abs=" + num(worst));
}

Check linearity(std::uint64_t seed) {
  auto rng = make_rng(seed, "linearity");
  const double al = 0.7, be = -1.3;
  const auto A = random<double>(rng, {3, 6, 6}), B = random<double>(rng, {3, 6, 6});
  const auto mix = A * al + B * be;
  const auto w = random<double>(rng, {2, 3, 3, 3});
  const Tensor64 zero_b({2});
  double worst = max_abs_diff(conv2d(mix, w, zero_b), conv2d(A, w, zero_b) * al + conv2d(B, w, zero_b) * be);
  const auto sa = bilinear_sample(A, 2.3, 3.7), sb = bilinear_sample(B, 2.3, 3.7), sm = bilinear_sample(mix, 2.3, 3.7);
  for (std::size_t c = 0; c < sa.size(); ++c) worst = std::max(worst, std::abs(sm[c] - (al * sa[c] + be * sb[c])));
  worst = std::max(worst, max_abs_diff(concat(mix, mix), concat(A, A) * al + concat(B, B) * be));
  const auto p = random_params<double>(rng, 5, 6, 6, 2.0);
  worst = std::max(worst, max_abs_diff(scf::scf_filter(mix, p), scf::scf_filter(A, p) * al + scf::scf_filter(B, p) * be));
  return make("linearity of conv2d, bilinear_sample, concat, scf_filter", worst <= 1e-12, "max_abs=" + num(worst));
}

Check softmax_properties(std::uint64_t seed) {
  auto rng = make_rng(seed, "softmax");
  const auto logits = random<float>(rng, {9, 5, 5}, -5, 5);
  const auto s = channel_softmax(logits);
  Tensor shifted = logits;
  auto shift = random<float>(rng, {1, 5, 5}, -20, 20);
  for (int c = 0; c < 9; ++c)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) shifted(c, y, x) += shift(0, y, x);
  double sum_err = 0;
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) {
      double acc = 0;
      for (int c = 0; c < 9; ++c) acc += s(c, y, x);
      sum_err = std::max(sum_err, std::abs(acc - 1));
    }
  }
  const double shift_err = max_abs_diff(s, channel_softmax(shifted));
  return make("channel_softmax sums to one and ignores per-pixel shifts", sum_err <= 1e-6 && shift_err <= 1e-6,
              "sum_err=" + num(sum_err) + " shift_err=" + num(shift_err));
}

Check zero_upstream(std::uint64_t seed) {
  std::string bad;
  for (const auto& c : op_cases()) {
    auto rng = make_rng(seed, "zero-upstream:" + c.op.name);
    const auto in = c.make_inputs(rng);
    const auto out = c.op.forward(in);
    const auto grads = c.op.backward(in, Tensor64(out.shape()));
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (grads[i].shape() != in[i].shape()) bad += " " + c.op.name + "(shape)";
      for (double v : grads[i].data()) {
        if (v != 0) {
          bad += " " + c.op.name;
          break;
        }
      }
    }
  }
  return make("zero upstream gradient gives zero input gradients", bad.empty(), bad.empty() ? "all ops" : bad);
}

Check warp_properties(std::uint64_t seed) {
  auto rng = make_rng(seed, "warp");
  const int H = 6, W = 7;
  Tensor ramp({1, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) ramp(0, y, x) = static_cast<float>(x);
  Tensor shift({2, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) shift(0, y, x) = 1;
  const auto shifted = mga::warp(mga::MotionField<float>{shift}, ramp);
  bool ramp_ok = true;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) ramp_ok = ramp_ok && shifted(0, y, x) == static_cast<float>(std::min(x + 1, W - 1));

  const auto x64 = random<double>(rng, {3, H, W});
  const auto flow = random<double>(rng, {2, H, W}, -2, 2);
  const auto mask = random<double>(rng, {1, H, W}, 0, 1);
  const double warp_err = max_abs_diff(mga::warp(mga::MotionField<double>{flow}, x64), warp_oracle(flow, x64, 1));
  const double align_err = max_abs_diff(
      mga::bidirectional_warp(mga::MotionField<double>{flow}, mga::BlendMask<double>{mask}, x64),
      align_oracle(flow, mask, x64));

  Tensor64 neg = flow;
  neg *= -1.0;
  const bool round_trip = mga::warp(mga::MotionField<double>{neg}, x64, -1) == mga::warp(mga::MotionField<double>{flow}, x64, 1);

  const auto wp = mga::warp(mga::MotionField<double>{flow}, x64, 1);
  const auto wm = mga::warp(mga::MotionField<double>{flow}, x64, -1);
  const auto blended = mga::bidirectional_warp(mga::MotionField<double>{flow}, mga::BlendMask<double>{mask}, x64);
  bool convex = true;
  for (std::size_t i = 0; i < blended.size(); ++i) {
    convex = convex && blended[i] >= std::min(wp[i], wm[i]) - 1e-15 && blended[i] <= std::max(wp[i], wm[i]) + 1e-15;
  }
  const mga::MotionField<double> ones{Tensor64({2, H, W})};
  const auto saturated = mga::bidirectional_warp(mga::MotionField<double>{flow}, mga::BlendMask<double>{Tensor64({1, H, W}, 1.0)}, x64);
  (void)ones;
  const bool one_sided = saturated == wp;

  const bool ok = ramp_ok && warp_err <= 1e-12 && align_err <= 1e-12 && round_trip && convex && one_sided;
  return make("warp: ramp shift, oracle, sign round trip, convex blend, saturated mask", ok,
              "ramp=" + std::to_string(ramp_ok) + " warp_err=" + num(warp_err) + " align_err=" + num(align_err) +
                  " round_trip=" + std::to_string(round_trip) + " convex=" + std::to_string(convex) +
                  " one_sided=" + std::to_string(one_sided));
}

Check scf_properties(std::uint64_t seed) {
  auto rng = make_rng(seed, "scf");
  // Double-precision agreement with the brute-force filter.
  double err64 = 0;
  for (int n : {1, 3, 5, 7}) {
    const auto image = random<double>(rng, {3, 12, 12}, 0, 1);
    const auto p = random_params<double>(rng, n, 12, 12, 3.0);
    err64 = std::max(err64, max_abs_diff(scf::scf_filter(image, p), scf::scf_filter_bruteforce(image, p)));
  }
  // Uniform kernels and weights on a constant image.
  const int n = 5;
  const double c = 0.37;
  scf::ScfParams<double> u{n,
                           Tensor64({n, 6, 6}, 1.0 / n),
                           Tensor64({n, 6, 6}, 1.0 / n),
                           Tensor64({n * n, 6, 6}),
                           Tensor64({n * n, 6, 6}),
                           Tensor64({n * n, 6, 6}, 1.0 / (n * n))};
  const double const_err =
      max_abs_diff(scf::scf_filter(Tensor64({3, 6, 6}, c), u), Tensor64({3, 6, 6}, c / (n * n)));
  // Locality: perturbing pixels beyond the radius leaves the output unchanged.
  const auto p = random_params<double>(rng, 3, 16, 16, 1.5);
  const auto base = random<double>(rng, {3, 16, 16});
  Tensor64 far = base;
  const int a = 8, b = 8;
  const double radius = 1 + 1.5 + 1;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (std::abs(x - a) > radius || std::abs(y - b) > radius)
        for (int ch = 0; ch < 3; ++ch) far(ch, y, x) += 5;
  const auto o1 = scf::scf_filter(base, p), o2 = scf::scf_filter(far, p);
  double local_err = 0;
  for (int ch = 0; ch < 3; ++ch) local_err = std::max(local_err, std::abs(o1(ch, b, a) - o2(ch, b, a)));
  // Rank-1 outer kernels.
  std::vector<double> kv(5), kh(5);
  for (auto& v : kv) v = uniform(rng, -1, 1);
  for (auto& v : kh) v = uniform(rng, -1, 1);
  const auto k = scf::outer_kernel(kv, kh);
  double minor = 0;
  for (int i = 0; i + 1 < 5; ++i)
    for (int j = 0; j + 1 < 5; ++j)
      minor = std::max(minor, std::abs(k[i * 5 + j] * k[(i + 1) * 5 + j + 1] - k[i * 5 + j + 1] * k[(i + 1) * 5 + j]));
  const bool ok = err64 <= 1e-10 && const_err <= 1e-12 && local_err == 0 && minor <= 1e-15;
  return make("scf: 64-bit oracle, constant closed form, locality, rank-1 kernel", ok,
              "err64=" + num(err64) + " const_err=" + num(const_err) + " local_err=" + num(local_err) +
                  " minor=" + num(minor));
}

Check blur_properties(std::uint64_t seed) {
  auto rng = make_rng(seed, "blur");
  const auto delta = blur::motion_kernel(1, 0.7);
  const auto row = blur::motion_kernel(5, 0);
  const auto col = blur::motion_kernel(5, std::numbers::pi / 2);
  bool row_ok = row.dim(0) == 5;
  double transpose_err = 0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      row_ok = row_ok && std::abs(row[i * 5 + j] - (i == 2 ? 0.2 : 0.0)) <= 1e-12;
      transpose_err = std::max(transpose_err, std::abs(row[i * 5 + j] - col[j * 5 + i]));
    }
  }
  const bool delta_ok = delta.dim(0) == 1 && delta[0] == 1.0;

  const auto sharp = random<float>(rng, {3, 40, 40}, 0, 1);
  blur::BlurSpec spec;
  spec.motion = {7.3, 0.4};
  const auto blurred = blur::apply_blur(sharp, spec, 1, false);
  const double oracle_err =
      max_abs_diff(blurred.cast<double>(), blur_oracle(sharp.cast<double>(), blur::motion_kernel(7.3, 0.4)));
  // Mass is conserved when the support stays clear of the border.
  Tensor island({3, 40, 40});
  for (int ch = 0; ch < 3; ++ch)
    for (int y = 15; y < 25; ++y)
      for (int x = 15; x < 25; ++x) island(ch, y, x) = sharp(ch, y, x);
  const auto island_blurred = blur::apply_blur(island, spec, 1, false);
  double ms = 0, mb = 0;
  for (std::size_t i = 0; i < island.size(); ++i) {
    ms += island[i];
    mb += island_blurred[i];
  }
  const double energy_err = std::abs(ms - mb) / ms;

  blur::BlurSpec noise;
  noise.kind = blur::Kind::None;
  noise.noise_sigma = 0.05;
  const Tensor flat({3, 64, 64}, 0.5f);
  const auto noisy = blur::apply_blur(flat, noise, 9, false);
  double mean = 0, var = 0;
  for (std::size_t i = 0; i < noisy.size(); ++i) mean += noisy[i] - 0.5;
  mean /= noisy.size();
  for (std::size_t i = 0; i < noisy.size(); ++i) var += std::pow(noisy[i] - 0.5 - mean, 2);
  var /= noisy.size() - 1;
  const double var_ratio = var / (0.05 * 0.05);

  blur::BlurSpec none;
  none.kind = blur::Kind::None;
  const bool none_ok = blur::apply_blur(sharp, none, 3) == sharp;
  const bool deterministic = blur::apply_blur(sharp, spec, 5) == blur::apply_blur(sharp, spec, 5);

  const bool ok = delta_ok && row_ok && transpose_err <= 1e-12 && oracle_err <= 1e-6 && energy_err <= 1e-4 &&
                  std::abs(var_ratio - 1) <= 0.1 && none_ok && deterministic;
  return make("blur: delta/row/transpose PSFs, convolution oracle, energy, noise variance", ok,
              "transpose_err=" + num(transpose_err) + " oracle_err=" + num(oracle_err) + " energy_err=" +
                  num(energy_err) + " var_ratio=" + num(var_ratio));
}

Check optimizer_properties(std::uint64_t) {
  train::TrainConfig cfg;
  cfg.steps = 1000;
  bool monotone = true;
  double prev = cosine_lr(0, cfg);
  for (int t = 1; t <= cfg.steps; ++t) {
    const double lr = cosine_lr(t, cfg);
    monotone = monotone && lr <= prev;
    prev = lr;
  }
  const bool ends = std::abs(cosine_lr(0, cfg) - 2e-4) <= 1e-18 && std::abs(cosine_lr(cfg.steps, cfg) - 1e-6) <= 1e-18;
  model::ParamMap<double> params{{"p", Tensor64({3}, 0.25)}};
  const auto before = params;
  train::AdamState st;
  train::adam_step(params, model::ParamMap<double>{{"p", Tensor64({3})}}, st, 1e-3, cfg);
  const bool zero_ok = params == before;
  return make("cosine schedule monotone with exact endpoints; Adam ignores zero gradients", monotone && ends && zero_ok,
              "monotone=" + std::to_string(monotone) + " endpoints=" + std::to_string(ends) +
                  " zero_grad=" + std::to_string(zero_ok));
}

Check metric_properties(std::uint64_t seed) {
  auto rng = make_rng(seed, "metric-props");
  const auto a = random<float>(rng, {3, 20, 20}, 0, 1), b = random<float>(rng, {3, 20, 20}, 0, 1);
  const double perr = std::abs(metrics::psnr(a, b) - psnr_oracle(a.cast<double>(), b.cast<double>()));
  const double sym = std::abs(metrics::ssim(a, b) - metrics::ssim(b, a));
  const bool inf = std::isinf(metrics::psnr(a, a)) && metrics::format_metric(metrics::psnr(a, a)) == "inf";
  return make("PSNR direct-formula oracle, SSIM symmetry, inf sentinel", perr <= 1e-9 && sym <= 1e-12 && inf,
              "psnr_err=" + num(perr) + " ssim_asym=" + num(sym));
}

Check model_properties(std::uint64_t seed) {
  auto rng = make_rng(seed, "model");
  model::NetworkConfig net;
  net.base_channels = 4;
  const auto input = random<float>(rng, {3, 64, 64}, 0, 1);
  bool finite = true;
  std::string bad;
  for (char g = 'a'; g <= 'j'; ++g) {
    try {
      const auto s = model::build_model(net, model::CouplingConfig::from_group(g), seed);
      const auto r = model::forward(s, input);
      if (!r.output.all_finite() || r.flow.shape() != Shape{2, 64, 64} || r.mask.shape() != Shape{1, 64, 64} ||
          r.residual.shape() != Shape{3, 64, 64}) {
        finite = false;
        bad += g;
      }
    } catch (const std::exception&) {
      finite = false;
      bad += g;
    }
  }
  const auto count = [&](model::Strategy s) { return model::build_model(net, {s, model::Order::FilterFirst}, 0).parameter_count(); };
  const bool ordering = count(model::Strategy::Shared) < count(model::Strategy::SemiShared) &&
                        count(model::Strategy::SemiShared) < count(model::Strategy::Parallel);

  const auto fresh = model::build_model(net, {}, seed);
  const auto r = model::forward(fresh, input);
  const bool aligned_identity = r.aligned == input;
  const bool deterministic = model::build_model(net, {}, seed).params == fresh.params &&
                             model::forward(fresh, input).output == r.output;

  const auto bytes = model::encode_model(fresh);
  const bool round_trip = model::encode_model(model::decode_model(bytes)) == bytes &&
                          model::decode_model(bytes).params == fresh.params;
  model::ModelState empty;
  const auto empty_bytes = model::encode_model(empty);
  const bool empty_ok = model::decode_model(empty_bytes).params.empty() &&
                        model::encode_model(model::decode_model(empty_bytes)) == empty_bytes;

  const bool ok = finite && ordering && aligned_identity && deterministic && round_trip && empty_ok;
  return make("model: ten couplings run, sharing shrinks parameters, identity alignment at init, save/load", ok,
              std::string("finite=") + (finite ? "1" : "0:" + bad) + " ordering=" + std::to_string(ordering) +
                  " identity_align=" + std::to_string(aligned_identity) + " deterministic=" +
                  std::to_string(deterministic) + " round_trip=" + std::to_string(round_trip) +
                  " empty=" + std::to_string(empty_ok));
}

}  // namespace

std::vector<Check> run_selftest(std::uint64_t seed, const std::function<void(const Check&)>& on_result) {
  std::vector<Check> out;
  const auto record = [&](Check c) {
    if (on_result) on_result(c);
    out.push_back(std::move(c));
  };
  const std::vector<CheckFn> checks = {
      check_separability, check_identity_configuration, check_zero_flow, check_normalization,
      check_metric_oracles, conv_oracle, linearity, softmax_properties, zero_upstream, warp_properties,
      scf_properties, blur_properties, optimizer_properties, metric_properties, model_properties,
  };
  for (const auto& fn : checks) {
    try {
      record(fn(seed));
    } catch (const std::exception& e) {
      record(make("exception", false, e.what()));
    }
  }
  record(check_gradients(seed, record));
  return out;
}

}  // namespace misc::verify
