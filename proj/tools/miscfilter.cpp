// miscfilter: synthesis, training, inference, evaluation, ablation and
// verification from one binary.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
// 3 numeric failure (NaN abort, failed check).

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "misc/ablate.hpp"
#include "misc/dataset.hpp"
#include "misc/errors.hpp"
#include "misc/image_io.hpp"
#include "misc/metrics.hpp"
#include "misc/model_io.hpp"
#include "misc/mten.hpp"
#include "misc/threads.hpp"
#include "misc/train.hpp"
#include "misc/verify/gradcheck_suite.hpp"
#include "misc/verify/selftest.hpp"

namespace fs = std::filesystem;
using namespace misc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3 };

struct Key {
  const char* name;
  const char* help;
};

constexpr Key kNetworkKeys[] = {
    {"base_channels", "channels at full resolution (doubles per level)"},
    {"depth", "number of 2x downsamplings"},
    {"kernel_size", "SCF kernel size n (odd)"},
    {"max_flow", "flow magnitude bound in pixels"},
    {"align_kernel", "flow/mask estimator conv size"},
    {"filter_kernel", "kernel/offset/weight estimator conv size"},
    {"use_mga", "enable motion-guided alignment (0/1)"},
    {"use_kernel", "enable predicted 1D kernels (0/1)"},
    {"use_weight", "enable predicted tap weights (0/1)"},
    {"use_offset", "enable predicted tap offsets (0/1)"},
    {"strategy", "parallel | semi-parallel | serial | semi-shared | shared"},
    {"order", "filter-first | residual-first"},
    {"coupling", "coupling group letter a..j (sets strategy and order)"},
};

constexpr Key kTrainKeys[] = {
    {"lr_start", "initial learning rate"},
    {"lr_end", "final learning rate"},
    {"beta1", "Adam beta1"},
    {"beta2", "Adam beta2"},
    {"adam_eps", "Adam epsilon"},
    {"batch", "samples per step"},
    {"steps", "optimizer steps"},
    {"weight_full", "loss weight at full resolution"},
    {"weight_half", "loss weight at half resolution"},
    {"charbonnier_eps", "Charbonnier epsilon"},
    {"augment", "random flips/rotations during training (0/1)"},
    {"val_every", "validation interval in steps (0: end only)"},
    {"dump_dir", "where intermediates go on a NaN abort"},
};

// --config file plus one --flag per key; flags win over the file.
class KeyOptions {
 public:
  template <std::size_t N>
  void add(CLI::App* app, const Key (&keys)[N]) {
    for (const auto& k : keys) {
      std::string flag = std::string("--") + k.name;
      std::replace(flag.begin(), flag.end(), '_', '-');
      auto& slot = values_[k.name];
      options_[k.name] = app->add_option(flag, slot, k.help);
    }
  }
  void add_config(CLI::App* app) { app->add_option("--config", config_, "key=value configuration file"); }

  void apply(model::NetworkConfig& net, model::CouplingConfig& coupling, train::TrainConfig* cfg) const {
    KeyValues kv;
    if (!config_.empty()) kv = read_key_value_file(config_);
    for (const auto& [k, opt] : options_) {
      if (opt->count() > 0) kv[k] = values_.at(k);
    }
    // coupling first so explicit strategy/order keys can refine it.
    if (const auto it = kv.find("coupling"); it != kv.end()) model::apply_network_key(it->first, it->second, net, coupling);
    for (const auto& [k, v] : kv) {
      if (k == "coupling") continue;
      if (model::apply_network_key(k, v, net, coupling)) continue;
      if (cfg && k == "seed") continue;
      if (cfg && train::apply_train_key(k, v, *cfg)) continue;
      throw ConfigError("unknown configuration key '" + k + "'");
    }
    net.validate();
    if (cfg) cfg->validate();
  }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, CLI::Option*> options_;
  std::string config_;
};

struct Global {
  int threads = 1;
  std::uint64_t seed = 0;
};

// Line sink writing to stdout and optionally a file.
class Log {
 public:
  explicit Log(const std::string& path, bool quiet) : quiet_(quiet) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw IoError("cannot write log " + path);
    }
  }
  void operator()(const std::string& line) {
    if (!quiet_) std::cout << line << "\n" << std::flush;
    if (file_.is_open()) file_ << line << "\n" << std::flush;
  }

 private:
  bool quiet_;
  std::ofstream file_;
};

Tensor pad_to_multiple(const Tensor& img, int m) {
  const int H = img.height(), W = img.width();
  const int PH = (H + m - 1) / m * m, PW = (W + m - 1) / m * m;
  if (PH == H && PW == W) return img;
  Tensor out({img.channels(), PH, PW});
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < PH; ++y)
      for (int x = 0; x < PW; ++x) out(c, y, x) = img(c, std::min(y, H - 1), std::min(x, W - 1));
  return out;
}

Tensor crop_to(const Tensor& img, int H, int W) {
  if (img.height() == H && img.width() == W) return img;
  Tensor out({img.channels(), H, W});
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) out(c, y, x) = img(c, y, x);
  return out;
}

model::ModelState load_checked(const fs::path& path) {
  auto state = model::load_model(path);
  if (!state.params.empty()) model::check_model_shapes(state, state.net, state.coupling);
  return state;
}

int run_synth(const Global& g, const data::SynthOptions& base) {
  auto o = base;
  o.seed = g.seed;
  const auto report = data::generate_dataset(o);
  std::printf("count=%zu skipped_sources=%d manifest=%s\n", report.entries.size(), report.skipped_sources,
              (o.out_dir / "manifest.txt").string().c_str());
  if (report.skipped_sources > 0) {
    std::fprintf(stderr, "warning: skipped %d unreadable or undersized source images\n", report.skipped_sources);
  }
  return kOk;
}

int run_train(const Global& g, const KeyOptions& keys, const std::string& data_path, const std::string& out,
              const std::string& log_path, bool quiet) {
  model::NetworkConfig net;
  model::CouplingConfig coupling;
  train::TrainConfig cfg;
  keys.apply(net, coupling, &cfg);
  cfg.seed = g.seed;
  const auto ds = data::load_dataset(data_path);
  auto state = model::build_model(net, coupling, g.seed);
  Log log(log_path, quiet);
  log("train_samples=" + std::to_string(ds.train.size()) + " val_samples=" + std::to_string(ds.validation.size()) +
      " parameters=" + std::to_string(state.parameter_count()) + " coupling=" + coupling.group() +
      " components=" + net.components.name());
  const auto result = train::train(state, ds, cfg, std::ref(log));
  model::save_model(state, out);
  log("saved=" + out + " skipped_steps=" + std::to_string(result.skipped_steps));
  return kOk;
}

int run_apply(const std::string& model_path, const std::string& input, const std::string& output,
              const std::string& dump_dir, const std::string& dump_taps) {
  const auto state = load_checked(model_path);
  const auto img = read_png(input);
  const int m = 1 << state.net.depth;
  const auto padded = pad_to_multiple(img, m);
  const auto r = model::forward(state, padded);
  const int H = img.height(), W = img.width();
  write_png(output, crop_to(r.output, H, W));

  if (!dump_dir.empty()) {
    const fs::path d = dump_dir;
    fs::create_directories(d);
    const auto flow = crop_to(r.flow, H, W);
    const auto mask = crop_to(r.mask, H, W);
    const auto aligned = crop_to(r.aligned, H, W);
    const auto filtered = crop_to(r.filtered, H, W);
    const auto residual = crop_to(r.residual, H, W);
    save_mten(d / "flow.mten", flow);
    save_mten(d / "mask.mten", mask);
    save_mten(d / "aligned.mten", aligned);
    save_mten(d / "filtered.mten", filtered);
    save_mten(d / "residual.mten", residual);
    save_mten(d / "output.mten", crop_to(r.output, H, W));
    write_png(d / "flow.png", flow_to_rgb(flow));
    write_gray_png(d / "mask.png", mask);
    write_png(d / "aligned.png", aligned);
    write_png(d / "filtered.png", filtered);
    Tensor shown = residual;
    for (auto& v : shown.data()) v += 0.5f;
    write_png(d / "residual.png", shown);
  }

  if (!dump_taps.empty()) {
    int x = 0, y = 0;
    char tail = 0;
    if (std::sscanf(dump_taps.c_str(), "%d,%d%c", &x, &y, &tail) != 2) {
      throw ConfigError("--dump-taps expects x,y, got '" + dump_taps + "'");
    }
    if (!state.net.components.scf()) throw ConfigError("--dump-taps needs a model with the filtering stage enabled");
    if (x < 0 || y < 0 || x >= W || y >= H) throw InputError("--dump-taps position outside the image");
    std::printf("# taps at x=%d y=%d: displacement (grid + residual) and weight * k_v * k_h\n", x, y);
    for (const auto& t : scf::taps_at(r.scf_params, x, y)) {
      std::printf("tap=%d dx=%.6f dy=%.6f coefficient=%.9g\n", t.tap, t.dx, t.dy, t.coefficient);
    }
  }
  return kOk;
}

std::vector<std::pair<std::string, fs::path>> list_images(const fs::path& p) {
  std::vector<std::pair<std::string, fs::path>> out;
  if (fs::is_directory(p)) {
    for (const auto& de : fs::directory_iterator(p)) {
      if (de.is_regular_file() && de.path().extension() == ".png") out.emplace_back(de.path().filename().string(), de.path());
    }
    std::sort(out.begin(), out.end());
  } else {
    out.emplace_back(p.filename().string(), p);
  }
  return out;
}

int run_eval(const std::string& pred, const std::string& gt, const std::string& model_path,
             const std::string& data_path, const std::string& split) {
  if (!model_path.empty()) {
    if (data_path.empty()) throw ConfigError("eval --model needs --data");
    const auto state = load_checked(model_path);
    const auto ds = data::load_dataset(data_path);
    std::vector<data::Sample> samples;
    if (split == "val" || split == "all") samples.insert(samples.end(), ds.validation.begin(), ds.validation.end());
    if (split == "train" || split == "all") samples.insert(samples.end(), ds.train.begin(), ds.train.end());
    const auto s = train::evaluate(state, samples);
    std::printf("%-12s %10s %8s %11s %10s\n", "image", "psnr", "ssim", "input_psnr", "input_ssim");
    for (const auto& r : s.rows) {
      std::printf("%-12s %10s %8s %11s %10s\n", r.id.c_str(), metrics::format_metric(r.psnr).c_str(),
                  metrics::format_metric(r.ssim).c_str(), metrics::format_metric(r.input_psnr).c_str(),
                  metrics::format_metric(r.input_ssim).c_str());
    }
    std::printf("%-12s %10s %8s %11s %10s\n", "mean", metrics::format_metric(s.psnr).c_str(),
                metrics::format_metric(s.ssim).c_str(), metrics::format_metric(s.input_psnr).c_str(),
                metrics::format_metric(s.input_ssim).c_str());
    return kOk;
  }
  if (pred.empty() || gt.empty()) throw ConfigError("eval needs --pred and --gt, or --model and --data");
  const auto preds = list_images(pred);
  const bool gt_dir = fs::is_directory(gt);
  double sp = 0, ss = 0;
  std::printf("%-24s %10s %8s\n", "image", "psnr", "ssim");
  for (const auto& [name, path] : preds) {
    const auto a = read_png(path);
    const auto b = read_png(gt_dir ? fs::path(gt) / name : fs::path(gt));
    const double p = metrics::psnr(a, b), s = metrics::ssim(a, b);
    sp += p;
    ss += s;
    std::printf("%-24s %10s %8s\n", name.c_str(), metrics::format_metric(p).c_str(), metrics::format_metric(s).c_str());
  }
  const double n = static_cast<double>(preds.size());
  std::printf("%-24s %10s %8s\n", "mean", metrics::format_metric(sp / n).c_str(), metrics::format_metric(ss / n).c_str());
  return kOk;
}

int run_ablate(const Global& g, const KeyOptions& keys, const std::string& data_path, const std::string& tables,
               const std::string& out, bool quiet) {
  model::NetworkConfig net;
  model::CouplingConfig coupling;
  train::TrainConfig cfg;
  keys.apply(net, coupling, &cfg);
  cfg.seed = g.seed;
  const auto ds = data::load_dataset(data_path);
  auto variants = ablate::default_variants(net, coupling);
  if (!tables.empty()) {
    std::erase_if(variants, [&](const ablate::Variant& v) { return ("," + tables + ",").find("," + v.table + ",") == std::string::npos; });
  }
  Log log("", quiet);
  const auto report = ablate::run(variants, ds, cfg, std::ref(log));
  const auto text = ablate::format_report(report);
  std::cout << text;
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw IoError("cannot write " + out);
    f << text;
  }
  return kOk;
}

int run_gradcheck(const Global& g, const std::string& only, int instances) {
  auto cases = verify::op_cases();
  cases.push_back(verify::model_case());
  bool all = true;
  int ran = 0;
  for (const auto& c : cases) {
    if (!only.empty() && c.op.name != only) continue;
    ++ran;
    const auto r = verify::run_case(c, instances, g.seed);
    all = all && r.passed;
    std::printf("%s %-20s max_rel=%.3e tol=%.0e%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.worst_relative,
                c.tolerance, r.error.empty() ? "" : (" error=" + r.error).c_str());
  }
  if (ran == 0) throw ConfigError("no gradcheck case named '" + only + "'");
  return all ? kOk : kNumeric;
}

int run_selftest(const Global& g) {
  int failed = 0, total = 0;
  verify::run_selftest(g.seed, [&](const verify::Check& c) {
    ++total;
    failed += c.passed ? 0 : 1;
    std::printf("%s %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    std::fflush(stdout);
  });
  std::printf("%d/%d properties passed\n", total - failed, total);
  return failed == 0 ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MISC filter: motion-guided alignment + separable collaborative filtering for deblurring"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--threads", g.threads, "worker threads (1 is bit-reproducible)")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "root seed for every random stream");

  auto* synth = app.add_subcommand("synth", "generate blurred/sharp PNG pairs and a manifest");
  data::SynthOptions so;
  std::string synth_out, synth_src;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--source", synth_src, "directory of sharp PNGs (default: procedural images)");
  synth->add_option("--count", so.count, "number of pairs")->check(CLI::NonNegativeNumber);
  synth->add_option("--patch", so.patch, "patch size in pixels");
  synth->add_option("--min-length", so.min_length, "shortest blur in pixels");
  synth->add_option("--max-length", so.max_length, "longest blur in pixels");
  synth->add_option("--min-sigma", so.min_sigma, "smallest noise sigma");
  synth->add_option("--max-sigma", so.max_sigma, "largest noise sigma");

  auto* train_cmd = app.add_subcommand("train", "train a model on a generated dataset");
  KeyOptions train_keys;
  std::string train_data, train_out, train_log;
  bool train_quiet = false;
  train_cmd->add_option("--data", train_data, "manifest.txt")->required();
  train_cmd->add_option("--out", train_out, "model file to write (.mmdl)")->required();
  train_cmd->add_option("--log", train_log, "also write the key=value log here");
  train_cmd->add_flag("--quiet", train_quiet, "do not echo the log to stdout");
  train_keys.add_config(train_cmd);
  train_keys.add(train_cmd, kNetworkKeys);
  train_keys.add(train_cmd, kTrainKeys);

  auto* apply_cmd = app.add_subcommand("apply", "deblur one PNG with a trained model");
  std::string apply_model, apply_in, apply_out, apply_dump, apply_taps;
  apply_cmd->add_option("--model", apply_model, "model file")->required();
  apply_cmd->add_option("--input", apply_in, "blurred PNG")->required();
  apply_cmd->add_option("--output", apply_out, "deblurred PNG")->required();
  apply_cmd->add_option("--dump-dir", apply_dump, "write flow, mask, aligned, filtered and residual (MTEN + PNG)");
  apply_cmd->add_option("--dump-taps", apply_taps, "print the n*n taps at pixel x,y");

  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM per image plus the mean");
  std::string eval_pred, eval_gt, eval_model, eval_data, eval_split = "val";
  eval_cmd->add_option("--pred", eval_pred, "predicted PNG or directory");
  eval_cmd->add_option("--gt", eval_gt, "ground-truth PNG or directory (matched by file name)");
  eval_cmd->add_option("--model", eval_model, "evaluate this model on --data instead");
  eval_cmd->add_option("--data", eval_data, "manifest.txt");
  eval_cmd->add_option("--split", eval_split, "val | train | all")->check(CLI::IsMember({"val", "train", "all"}));

  auto* ablate_cmd = app.add_subcommand("ablate", "train every coupling, component and kernel-size variant");
  KeyOptions ablate_keys;
  std::string ablate_data, ablate_tables, ablate_out;
  bool ablate_quiet = false;
  ablate_cmd->add_option("--data", ablate_data, "manifest.txt")->required();
  ablate_cmd->add_option("--tables", ablate_tables, "comma list of coupling,component,kernel (default all)");
  ablate_cmd->add_option("--out", ablate_out, "also write the table here");
  ablate_cmd->add_flag("--quiet", ablate_quiet, "do not print per-variant records");
  ablate_keys.add_config(ablate_cmd);
  ablate_keys.add(ablate_cmd, kNetworkKeys);
  ablate_keys.add(ablate_cmd, kTrainKeys);

  auto* grad_cmd = app.add_subcommand("gradcheck", "central-difference check of every differentiable op");
  std::string grad_op;
  int grad_instances = 3;
  grad_cmd->add_option("--op", grad_op, "only this op");
  grad_cmd->add_option("--instances", grad_instances, "random instances per op")->check(CLI::PositiveNumber);

  auto* self_cmd = app.add_subcommand("selftest", "run the oracle and invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    set_threads(g.threads);
    if (*synth) {
      so.out_dir = synth_out;
      so.source_dir = synth_src;
      return run_synth(g, so);
    }
    if (*train_cmd) return run_train(g, train_keys, train_data, train_out, train_log, train_quiet);
    if (*apply_cmd) return run_apply(apply_model, apply_in, apply_out, apply_dump, apply_taps);
    if (*eval_cmd) return run_eval(eval_pred, eval_gt, eval_model, eval_data, eval_split);
    if (*ablate_cmd) return run_ablate(g, ablate_keys, ablate_data, ablate_tables, ablate_out, ablate_quiet);
    if (*grad_cmd) return run_gradcheck(g, grad_op, grad_instances);
    if (*self_cmd) return run_selftest(g);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumeric;
  }
  return kUsage;
}
