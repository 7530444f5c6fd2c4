// Acceptance harness: one PASS/FAIL line per criterion. Every tolerance and
// budget the verdicts depend on is pinned below.
//
//   acceptance [--work-dir DIR] [--only 1,4,7] [--toy-steps N]
//
// Criteria 7 and 9 share the two toy training runs; 8 trains the ablation
// grid at a reduced budget and never fails on ranking alone.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include "misc/ablate.hpp"
#include "misc/metrics.hpp"
#include "misc/mga.hpp"
#include "misc/scf.hpp"
#include "misc/threads.hpp"
#include "misc/verify/gradcheck_suite.hpp"
#include "misc/verify/oracles.hpp"

using namespace misc;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 1;

// 1
constexpr int kSepInstances = 50;
constexpr int kSepSize = 16;
constexpr double kSepTol = 1e-5;
constexpr double kSepMaxSeconds = 60;
// 2
constexpr double kIdentityTol = 1e-7;
constexpr float kSaturatedLogit = 200;
// 3
constexpr int kZeroFlowPairs = 20;
// 4
constexpr int kGradInstances = 3;
constexpr double kGradOpTol = 1e-3;
constexpr double kGradModelTol = 1e-2;
constexpr double kGradMaxSeconds = 300;
// 5
constexpr double kNormTol = 1e-6;
// 6
constexpr double kPsnrTol = 1e-4;
constexpr double kSsimSelfTol = 1e-9;
constexpr double kSsimConstTol = 1e-6;
// 7
constexpr int kToyCount = 200;
constexpr int kToyPatch = 64;
constexpr double kToyMaxLength = 9;
constexpr double kToySigma = 0.01;
constexpr int kToyMaxSteps = 20000;
constexpr int kToySteps = 6000;
constexpr int kToyBatch = 4;
constexpr double kToyLr = 2e-3;
constexpr double kToyMinGainDb = 2.0;
constexpr int kToySmoothWindow = 100;
constexpr double kToyMaxSeconds = 3600;
// 8
constexpr int kAblateBaseChannels = 8;
constexpr int kAblateSteps = 600;
constexpr int kAblateBatch = 4;

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Verdict {
  int id;
  bool pass;
  std::string detail;
};

// Verdict lines also go to <work-dir>/acceptance_summary.txt, since ctest
// hides the output of passing tests.
std::ofstream summary;

void report(const Verdict& v) {
  char head[64];
  std::snprintf(head, sizeof head, "criterion %d: %s  ", v.id, v.pass ? "PASS" : "FAIL");
  std::printf("%s%s\n", head, v.detail.c_str());
  std::fflush(stdout);
  if (summary.is_open()) summary << head << v.detail << "\n" << std::flush;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename T>
BasicTensor<T> random(Rng& rng, Shape shape, double lo = -1, double hi = 1) {
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(uniform(rng, lo, hi));
  return t;
}

Verdict separability() {
  const auto t0 = std::chrono::steady_clock::now();
  auto rng = make_rng(kSeed, "acceptance:separability");
  double worst = 0;
  for (int n : {1, 3, 5, 7}) {
    const int taps = n * n;
    for (int i = 0; i < kSepInstances; ++i) {
      const auto img = random<float>(rng, {3, kSepSize, kSepSize}, 0, 1);
      scf::ScfParams<float> p{n,
                              random<float>(rng, {n, kSepSize, kSepSize}),
                              random<float>(rng, {n, kSepSize, kSepSize}),
                              random<float>(rng, {taps, kSepSize, kSepSize}, -3, 3),
                              random<float>(rng, {taps, kSepSize, kSepSize}, -3, 3),
                              channel_softmax(random<float>(rng, {taps, kSepSize, kSepSize}, -2, 2))};
      const auto ref = scf::scf_filter_bruteforce(img.cast<double>(), p.cast<double>());
      worst = std::max(worst, max_abs_diff(scf::scf_filter(img, p).cast<double>(), ref));
    }
  }
  const double secs = seconds_since(t0);
  return {1, worst <= kSepTol && secs < kSepMaxSeconds,
          fmt("separability max_abs=%.3g", worst) + fmt(" (tol %.0e)", kSepTol) + fmt(" runtime=%.1fs", secs)};
}

Verdict identity() {
  auto rng = make_rng(kSeed, "acceptance:identity");
  double worst = 0;
  for (int n : {1, 3, 5, 7}) {
    const auto img = random<float>(rng, {3, 16, 16}, 0, 1);
    auto p = scf::identity_params<float>(n, 16, 16);
    Tensor logits({n * n, 16, 16});
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) logits((n / 2) * n + n / 2, y, x) = kSaturatedLogit;
    p.w = channel_softmax(logits);
    worst = std::max(worst, max_abs_diff(scf::scf_filter(img, p), img));
  }
  return {2, worst <= kIdentityTol, fmt("identity configuration max_abs=%.3g", worst) + fmt(" (tol %.0e)", kIdentityTol)};
}

Verdict zero_flow() {
  auto rng = make_rng(kSeed, "acceptance:zero-flow");
  int exact = 0;
  for (int i = 0; i < kZeroFlowPairs; ++i) {
    const auto img = random<float>(rng, {3, 16, 12}, 0, 1);
    const auto feat = random<float>(rng, {8, 16, 12});
    const mga::BlendMask<float> mask{random<float>(rng, {1, 16, 12}, 0, 1)};
    const auto r = mga::align_with(mga::MotionField<float>{Tensor({2, 16, 12})}, mask, img, feat);
    exact += r.image == img && r.feature == feat;
  }
  return {3, exact == kZeroFlowPairs,
          "zero-flow alignment " + std::to_string(exact) + "/" + std::to_string(kZeroFlowPairs) + " bit-exact"};
}

Verdict gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::set<std::string> required{"conv2d",  "sigmoid",  "channel_softmax", "bilinear_sample",
                                       "warp",    "mga_align", "scf_filter",     "multiscale_loss"};
  std::set<std::string> seen;
  bool ok = true;
  double worst_op = 0, model_err = 0;
  std::string failed;
  for (const auto& c : verify::op_cases()) {
    const auto r = verify::run_case(c, kGradInstances, kSeed);
    seen.insert(r.name);
    const bool pass = r.error.empty() && r.worst_relative <= kGradOpTol;
    worst_op = std::max(worst_op, r.worst_relative);
    if (!pass) failed += " " + r.name;
    ok = ok && pass;
  }
  const auto m = verify::run_case(verify::model_case(), kGradInstances, kSeed);
  model_err = m.worst_relative;
  if (!m.error.empty() || model_err > kGradModelTol) {
    ok = false;
    failed += " model";
  }
  for (const auto& name : required) {
    if (!seen.count(name)) {
      ok = false;
      failed += " missing:" + name;
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < kGradMaxSeconds;
  return {4, ok,
          std::to_string(seen.size()) + " ops" + fmt(" worst_rel=%.3g", worst_op) + fmt(" (tol %.0e)", kGradOpTol) +
              fmt(" model_rel=%.3g", model_err) + fmt(" (tol %.0e)", kGradModelTol) + fmt(" runtime=%.1fs", secs) +
              (failed.empty() ? "" : " failed:" + failed)};
}

Verdict normalization() {
  auto rng = make_rng(kSeed, "acceptance:normalization");
  double worst_w = 0;
  for (int n : {3, 5, 7}) {
    const auto f = random<float>(rng, {8, 16, 16});
    const ConvParams<float> ew{random<float>(rng, {n * n, 16, 1, 1}, -4, 4), random<float>(rng, {n * n}, -4, 4)};
    const auto p = scf::estimate_params(f, f, scf::Estimators<float>{nullptr, nullptr, &ew}, n);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        double s = 0;
        for (int t = 0; t < n * n; ++t) s += p.w(t, y, x);
        worst_w = std::max(worst_w, std::abs(s - 1));
      }
  }
  // Every PSF the toy dataset can draw, plus a sweep to the default maximum.
  double worst_k = 0;
  int count = 0;
  for (double len = 1; len <= blur::kDefaultMaxLength; len += 0.5) {
    for (int a = 0; a < 16; ++a) {
      const auto k = blur::motion_kernel(len, uniform(rng, 0, 2 * std::numbers::pi));
      double s = 0;
      for (double v : k.data()) s += v < 0 ? 1e9 : v;
      worst_k = std::max(worst_k, std::abs(s - 1));
      ++count;
    }
  }
  return {5, worst_w <= kNormTol && worst_k <= kNormTol,
          fmt("tap_weight_sum_err=%.3g", worst_w) + fmt(" psf_sum_err=%.3g", worst_k) + " over " +
              std::to_string(count) + " PSFs" + fmt(" (tol %.0e)", kNormTol)};
}

Verdict metric_oracles() {
  auto rng = make_rng(kSeed, "acceptance:metrics");
  const auto a = random<float>(rng, {3, 32, 32}, 0, 0.9);
  Tensor b = a;
  for (auto& v : b.data()) v += 0.1f;
  const double p = metrics::psnr(a, b);
  const double s = metrics::ssim(a, a);
  double worst = 0;
  for (double c : {0.1, 0.4, 0.7}) {
    for (double d : {0.02, 0.1, 0.25}) {
      const float cf = static_cast<float>(c), df = static_cast<float>(c + d);
      const double closed = verify::ssim_constant_closed_form(cf, static_cast<double>(df) - cf);
      worst = std::max(worst, std::abs(metrics::ssim(Tensor({3, 16, 16}, cf), Tensor({3, 16, 16}, df)) - closed));
    }
  }
  const bool ok = std::abs(p - 20.0) <= kPsnrTol && std::abs(s - 1.0) <= kSsimSelfTol && worst <= kSsimConstTol;
  return {6, ok, fmt("psnr_uniform_0.1=%.6f", p) + fmt(" ssim_self=%.12f", s) + fmt(" ssim_const_err=%.3g", worst)};
}

struct ToyRun {
  std::vector<std::string> log;
  train::TrainResult result;
  double seconds = 0;
};

train::TrainConfig toy_config(int steps) {
  train::TrainConfig cfg;
  cfg.steps = steps;
  cfg.batch = kToyBatch;
  cfg.lr_start = kToyLr;
  cfg.val_every = std::max(1, steps / 8);
  cfg.seed = kSeed;
  return cfg;
}

ToyRun toy_run(const data::Dataset& ds, int steps, const fs::path& log_path) {
  ToyRun run;
  auto state = model::build_model(model::NetworkConfig{}, model::CouplingConfig{}, kSeed);
  std::ofstream log_file(log_path);
  const auto t0 = std::chrono::steady_clock::now();
  run.result = train::train(state, ds, toy_config(steps), [&](const std::string& line) {
    run.log.push_back(line);
    log_file << line << "\n" << std::flush;
  });
  run.seconds = seconds_since(t0);
  return run;
}

Verdict toy_deblurring(const ToyRun& run, int steps) {
  const auto& ev = run.result.final_eval;
  const double gain = ev.psnr - ev.input_psnr;
  const auto q = train::smoothed_quartile_means(run.result.losses, kToySmoothWindow);
  const bool monotone = q[1] <= q[0] && q[2] <= q[1] && q[3] <= q[2];
  const bool ok = gain >= kToyMinGainDb && monotone && run.seconds <= kToyMaxSeconds && steps <= kToyMaxSteps;
  return {7, ok,
          fmt("val_psnr=%.4f", ev.psnr) + fmt(" input_psnr=%.4f", ev.input_psnr) + fmt(" gain=%+.3f dB", gain) +
              fmt(" (need %.1f)", kToyMinGainDb) + fmt(" loss_quartiles=%.5g", q[0]) + fmt("/%.5g", q[1]) +
              fmt("/%.5g", q[2]) + fmt("/%.5g", q[3]) + (monotone ? " non-increasing" : " NOT non-increasing") +
              " steps=" + std::to_string(steps) + fmt(" runtime=%.0fs", run.seconds)};
}

Verdict determinism(const ToyRun& a, const ToyRun& b) {
  std::size_t first_diff = std::min(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < std::min(a.log.size(), b.log.size()); ++i) {
    if (a.log[i] != b.log[i]) {
      first_diff = i;
      break;
    }
  }
  const bool same = a.log == b.log;
  return {9, same,
          std::to_string(a.log.size()) + " log lines, " +
              (same ? std::string("identical") : "first difference at line " + std::to_string(first_diff + 1))};
}

Verdict ablation(const data::Dataset& ds, const fs::path& out) {
  model::NetworkConfig net;
  net.base_channels = kAblateBaseChannels;
  const auto variants = ablate::default_variants(net, model::CouplingConfig{});
  train::TrainConfig cfg;
  cfg.steps = kAblateSteps;
  cfg.batch = kAblateBatch;
  cfg.lr_start = kToyLr;
  cfg.seed = kSeed;
  const auto rep = ablate::run(variants, ds, cfg);
  std::ofstream(out) << ablate::format_report(rep);
  std::set<char> groups;
  int components = 0, failed = 0;
  for (const auto& r : rep.rows) {
    if (!r.ok) ++failed;
    if (r.variant.table == "coupling" && r.ok) groups.insert(r.variant.coupling.group());
    if (r.variant.table == "component" && r.ok) ++components;
  }
  const bool complete = groups.size() == 10 && components == 7;
  std::string rank = !rep.shared_filter_first_best   ? "ranking unavailable"
                     : *rep.shared_filter_first_best ? "shared/filter-first ranks first"
                                                     : "shared/filter-first does NOT rank first";
  return {8, complete,
          std::to_string(groups.size()) + "/10 couplings, " + std::to_string(components) + "/7 component rows, " +
              std::to_string(failed) + " failed variants; " + rank + " (reported, not gated); table: " + out.string()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string work = (fs::temp_directory_path() / "misc_acceptance").string();
  std::string only;
  int toy_steps = kToySteps;
  app.add_option("--work-dir", work, "dataset, logs and the ablation table go here");
  app.add_option("--only", only, "comma list of criteria to run (default all)");
  app.add_option("--toy-steps", toy_steps, "override the toy training length (diagnostics only)");
  CLI11_PARSE(app, argc, argv);

  set_threads(1);
  fs::create_directories(work);
  summary.open(fs::path(work) / "acceptance_summary.txt");
  const auto wanted = [&](int id) { return only.empty() || ("," + only + ",").find("," + std::to_string(id) + ",") != std::string::npos; };
  std::vector<Verdict> verdicts;
  const auto run = [&](int id, const std::function<Verdict()>& fn) {
    if (!wanted(id)) return;
    try {
      verdicts.push_back(fn());
    } catch (const std::exception& e) {
      verdicts.push_back({id, false, std::string("exception: ") + e.what()});
    }
    report(verdicts.back());
  };

  run(1, separability);
  run(2, identity);
  run(3, zero_flow);
  run(4, gradients);
  run(5, normalization);
  run(6, metric_oracles);

  if (wanted(7) || wanted(8) || wanted(9)) {
    data::Dataset ds;
    try {
      data::SynthOptions so;
      so.count = kToyCount;
      so.patch = kToyPatch;
      so.min_length = 1;
      so.max_length = kToyMaxLength;
      so.min_sigma = so.max_sigma = kToySigma;
      so.seed = kSeed;
      so.out_dir = fs::path(work) / "toy_data";
      data::generate_dataset(so);
      ds = data::load_dataset(so.out_dir / "manifest.txt");
    } catch (const std::exception& e) {
      for (int id : {7, 8, 9})
        if (wanted(id)) {
          verdicts.push_back({id, false, std::string("dataset: ") + e.what()});
          report(verdicts.back());
        }
      return 1;
    }
    std::optional<ToyRun> first;
    if (wanted(7) || wanted(9)) {
      run(7, [&] {
        first = toy_run(ds, toy_steps, fs::path(work) / "toy_run1.log");
        return toy_deblurring(*first, toy_steps);
      });
    }
    run(8, [&] { return ablation(ds, fs::path(work) / "ablation.txt"); });
    run(9, [&] {
      if (!first) throw std::runtime_error("first toy run missing");
      const auto second = toy_run(ds, toy_steps, fs::path(work) / "toy_run2.log");
      return determinism(*first, second);
    });
  }

  int failed = 0;
  for (const auto& v : verdicts) failed += v.pass ? 0 : 1;
  std::printf("%zu criteria run, %d failed\n", verdicts.size(), failed);
  summary << verdicts.size() << " criteria run, " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}
