#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "misc/ablate.hpp"
#include "misc/metrics.hpp"
#include "misc/verify/oracles.hpp"

using namespace misc;
using misc::test::random_tensor;

TEST_CASE("cosine schedule endpoints, midpoint and monotonicity") {
  train::TrainConfig cfg;
  cfg.steps = 500;
  CHECK(train::cosine_lr(0, cfg) == doctest::Approx(2e-4).epsilon(1e-15));
  CHECK(train::cosine_lr(500, cfg) == doctest::Approx(1e-6).epsilon(1e-15));
  CHECK(train::cosine_lr(250, cfg) == doctest::Approx((2e-4 + 1e-6) / 2).epsilon(1e-12));
  for (int t = 1; t <= 500; ++t) CHECK(train::cosine_lr(t, cfg) <= train::cosine_lr(t - 1, cfg));
}

TEST_CASE("train config validation") {
  train::TrainConfig cfg;
  cfg.lr_end = 1e-3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  CHECK(train::apply_train_key("lr_start", "5e-4", cfg));
  CHECK(cfg.lr_start == 5e-4);
  CHECK(train::apply_train_key("augment", "off", cfg));
  CHECK_FALSE(cfg.augment);
  CHECK_FALSE(train::apply_train_key("depth", "2", cfg));
  CHECK_THROWS_AS(train::apply_train_key("steps", "-", cfg), ConfigError);
}

TEST_CASE("Charbonnier: value at zero difference, symmetry, gradient") {
  auto rng = make_rng(1, "charb");
  const auto a = random_tensor<double>(rng, {3, 4, 4});
  const auto b = random_tensor<double>(rng, {3, 4, 4});
  CHECK(train::charbonnier(a, a, 1e-3) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(train::charbonnier(a, b, 1e-3) == train::charbonnier(b, a, 1e-3));
  Tensor64 g;
  train::charbonnier(a, b, 1e-3, &g);
  const double h = 1e-6;
  for (std::size_t i : {0u, 7u, 40u}) {
    auto ap = a, am = a;
    ap[i] += h;
    am[i] -= h;
    const double fd = (train::charbonnier(ap, b, 1e-3) - train::charbonnier(am, b, 1e-3)) / (2 * h);
    CHECK(std::abs(fd - g[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
  }
  CHECK_THROWS_AS(train::charbonnier(a, Tensor64({3, 4, 5}), 1e-3), ConfigError);
}

TEST_CASE("multiscale loss at pred = target equals eps times the weight sum") {
  const Tensor full({3, 8, 8}, 0.3f), half({3, 4, 4}, 0.3f);
  train::TrainConfig cfg;
  const auto l = train::multiscale_loss(full, half, full, half, cfg);
  CHECK(l.value == doctest::Approx(1.5e-3).epsilon(1e-6));
  CHECK(l.grad_full.shape() == full.shape());
  CHECK(l.grad_half.shape() == half.shape());
}

TEST_CASE("Adam: first-step closed form, two-step oracle, zero and non-finite gradients") {
  train::TrainConfig cfg;
  model::ParamMap<double> p{{"x", Tensor64({1}, 0.5)}};
  train::AdamState st;
  train::adam_step(p, {{"x", Tensor64({1}, 1.0)}}, st, 1e-2, cfg);
  CHECK(p.at("x")[0] == doctest::Approx(0.5 - 1e-2).epsilon(1e-9));

  // f(x) = (x - 3)^2 from x = 0, hand-rolled.
  model::ParamMap<double> q{{"x", Tensor64({1}, 0.0)}};
  train::AdamState sq;
  double x = 0, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    const double g = 2 * (x - 3);
    train::adam_step(q, {{"x", Tensor64({1}, g)}}, sq, 0.1, cfg);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  CHECK(std::abs(q.at("x")[0] - x) <= 1e-10);

  // Zero gradients on fresh moments move nothing.
  model::ParamMap<double> z{{"x", Tensor64({2}, 0.7)}};
  const auto z0 = z;
  train::AdamState sz;
  train::adam_step(z, {{"x", Tensor64({2})}}, sz, 0.1, cfg);
  CHECK(z == z0);

  // A non-finite gradient skips the step and leaves the moments alone.
  const auto before = q;
  const auto m_before = sq.m;
  CHECK_FALSE(train::adam_step(q, {{"x", Tensor64({1}, std::nan(""))}}, sq, 0.1, cfg));
  CHECK(q == before);
  CHECK(sq.m == m_before);
  CHECK(sq.skipped == 1);
  CHECK(sq.t == 2);
}

TEST_CASE("PSNR: identical inf, uniform 0.1 is 20 dB, direct formula oracle") {
  auto rng = make_rng(2, "psnr");
  const auto a = random_tensor<float>(rng, {3, 16, 16}, 0, 1);
  CHECK(std::isinf(metrics::psnr(a, a)));
  CHECK(metrics::format_metric(metrics::psnr(a, a)) == "inf");
  Tensor b = a;
  for (auto& v : b.data()) v += 0.1f;
  CHECK(std::abs(metrics::psnr(a, b) - 20.0) <= 1e-4);
  const auto c = random_tensor<float>(rng, {3, 16, 16}, 0, 1);
  CHECK(std::abs(metrics::psnr(a, c) - verify::psnr_oracle(a.cast<double>(), c.cast<double>())) <= 1e-9);
}

TEST_CASE("SSIM: self similarity, symmetry, constant closed form, size check") {
  auto rng = make_rng(3, "ssim");
  const auto a = random_tensor<float>(rng, {3, 20, 20}, 0, 1);
  const auto b = random_tensor<float>(rng, {3, 20, 20}, 0, 1);
  CHECK(std::abs(metrics::ssim(a, a) - 1) <= 1e-9);
  CHECK(std::abs(metrics::ssim(a, b) - metrics::ssim(b, a)) <= 1e-12);
  for (auto [c, d] : {std::pair{0.2, 0.1}, {0.5, -0.3}, {0.9, 0.05}}) {
    const Tensor x({3, 12, 12}, static_cast<float>(c)), y({3, 12, 12}, static_cast<float>(c + d));
    CHECK(std::abs(metrics::ssim(x, y) - verify::ssim_constant_closed_form(static_cast<float>(c),
                                                                           static_cast<float>(c + d) - static_cast<float>(c))) <= 1e-6);
  }
  CHECK_THROWS_AS(metrics::ssim(Tensor({3, 10, 12}), Tensor({3, 10, 12})), InputError);
}

namespace {

data::Dataset tiny_dataset() {
  data::Dataset ds;
  auto rng = make_rng(4, "tiny");
  for (int i = 0; i < 6; ++i) {
    data::Sample s;
    s.id = std::to_string(i);
    s.sharp = blur::procedural_image(16, 16, static_cast<std::uint64_t>(i));
    blur::BlurSpec spec;
    spec.motion = {uniform(rng, 2, 5), uniform(rng, 0, 3)};
    s.blurred = blur::apply_blur(s.sharp, spec, static_cast<std::uint64_t>(i));
    (i < 4 ? ds.train : ds.validation).push_back(std::move(s));
  }
  return ds;
}

model::NetworkConfig tiny_net() {
  model::NetworkConfig net;
  net.base_channels = 4;
  net.depth = 1;
  net.kernel_size = 3;
  return net;
}

}  // namespace

TEST_CASE("training: zero steps leave the model unchanged; same seed gives identical logs and parameters") {
  const auto ds = tiny_dataset();
  train::TrainConfig cfg;
  cfg.steps = 0;
  auto state = model::build_model(tiny_net(), {}, 1);
  const auto before = state.params;
  train::train(state, ds, cfg);
  CHECK(state.params == before);

  cfg.steps = 6;
  cfg.batch = 2;
  cfg.lr_start = 1e-3;
  cfg.val_every = 3;
  std::vector<std::string> log_a, log_b;
  auto a = model::build_model(tiny_net(), {}, 1), b = a;
  const auto ra = train::train(a, ds, cfg, [&](const std::string& l) { log_a.push_back(l); });
  train::train(b, ds, cfg, [&](const std::string& l) { log_b.push_back(l); });
  CHECK(log_a == log_b);
  CHECK(a.params == b.params);
  CHECK_FALSE(a.params == before);
  CHECK(ra.losses.size() == 6);
  CHECK(log_a.front().rfind("step=1 lr=", 0) == 0);
  bool saw_val = false;
  for (const auto& l : log_a) saw_val = saw_val || l.find("val_psnr=") != std::string::npos;
  CHECK(saw_val);
}

TEST_CASE("training aborts on repeated non-finite losses and dumps intermediates") {
  misc::test::TempDir dir("nan");
  auto ds = tiny_dataset();
  for (auto& s : ds.train) s.sharp.fill(std::nanf(""));
  train::TrainConfig cfg;
  cfg.steps = 4;
  cfg.batch = 1;
  cfg.dump_dir = dir.path();
  auto state = model::build_model(tiny_net(), {}, 1);
  CHECK_THROWS_AS(train::train(state, ds, cfg), NumericError);
  CHECK(std::filesystem::exists(dir.path() / "input.mten"));
}

TEST_CASE("evaluation scores clamped outputs against the input baseline") {
  const auto ds = tiny_dataset();
  const auto state = model::build_model(tiny_net(), {}, 1);
  const auto s = train::evaluate(state, ds.validation);
  REQUIRE(s.rows.size() == ds.validation.size());
  CHECK(s.input_psnr == doctest::Approx((s.rows[0].input_psnr + s.rows[1].input_psnr) / 2));
  CHECK(std::isfinite(s.psnr));
}

TEST_CASE("smoothed quartile means of a decreasing sequence decrease") {
  std::vector<double> losses;
  for (int i = 0; i < 400; ++i) losses.push_back(1.0 / (1 + i) + 0.01 * ((i * 7) % 3));
  const auto q = train::smoothed_quartile_means(losses);
  REQUIRE(q.size() == 4);
  for (int i = 1; i < 4; ++i) CHECK(q[static_cast<std::size_t>(i)] <= q[static_cast<std::size_t>(i - 1)]);
}

TEST_CASE("ablation covers every coupling, component row and kernel size and survives failures") {
  const auto variants = ablate::default_variants(tiny_net(), {});
  int couplings = 0, components = 0, kernels = 0;
  for (const auto& v : variants) {
    couplings += v.table == "coupling";
    components += v.table == "component";
    kernels += v.table == "kernel";
  }
  CHECK(couplings == 10);
  CHECK(components == 7);
  CHECK(kernels == 3);
  // Full-scale context rows: (i) 32.83 vs (a) 32.53; base 32.40 vs full 32.83.
  CHECK(*variants[8].reference_psnr == 32.83);
  CHECK(variants[8].coupling.group() == 'i');
  CHECK(*variants[0].reference_psnr == 32.53);
  CHECK(*variants[10].reference_psnr == 32.40);
  CHECK(variants[10].net.components == model::Components{false, false, false, false});
  CHECK(*variants[16].reference_psnr == 32.83);
  CHECK(variants[16].net.components == model::Components{});

  std::vector<ablate::Variant> few{variants[0], variants[8]};
  few.push_back(variants[0]);
  few.back().label = "broken";
  few.back().net.kernel_size = 4;
  train::TrainConfig cfg;
  cfg.steps = 2;
  cfg.batch = 1;
  const auto report = ablate::run(few, tiny_dataset(), cfg);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].ok);
  CHECK_FALSE(report.rows[2].ok);
  CHECK_FALSE(report.rows[2].error.empty());
  CHECK(report.shared_filter_first_best.has_value());
  CHECK(ablate::format_report(report).find("broken") != std::string::npos);
}

TEST_CASE("key=value parsing") {
  const auto kv = parse_key_values("# comment\n a = 1 \n\nb=x y\na=2\n");
  CHECK(kv.at("a") == "2");
  CHECK(kv.at("b") == "x y");
  CHECK_THROWS_AS(parse_key_values("novalue\n"), ConfigError);
  CHECK(parse_bool("k", "on"));
  CHECK_FALSE(parse_bool("k", "0"));
  CHECK_THROWS_AS(parse_bool("k", "maybe"), ConfigError);
  CHECK_THROWS_AS(parse_int("k", "3.5"), ConfigError);
  for (double v : {0.1, 1e-6, 2.0 / 3, -7.25e12}) CHECK(parse_double("k", format_double(v)) == v);
}
