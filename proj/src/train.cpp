#include "misc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "misc/errors.hpp"
#include "misc/metrics.hpp"
#include "misc/mten.hpp"
#include "misc/rng.hpp"

namespace misc::train {

void TrainConfig::validate() const {
  if (!(lr_start > 0) || !(lr_end >= 0) || lr_end > lr_start) {
    throw ConfigError("learning rates must satisfy 0 <= lr_end <= lr_start, lr_start > 0");
  }
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(adam_eps > 0)) {
    throw ConfigError("Adam betas must lie in [0, 1) and eps must be positive");
  }
  if (!(weight_full >= 0) || !(weight_half >= 0) || !(charbonnier_eps > 0)) {
    throw ConfigError("loss weights must be >= 0 and the Charbonnier eps positive");
  }
  if (val_every < 0) throw ConfigError("val_every must be >= 0");
}

bool apply_train_key(const std::string& key, const std::string& value, TrainConfig& cfg) {
  if (key == "lr_start") {
    cfg.lr_start = parse_double(key, value);
  } else if (key == "lr_end") {
    cfg.lr_end = parse_double(key, value);
  } else if (key == "beta1") {
    cfg.beta1 = parse_double(key, value);
  } else if (key == "beta2") {
    cfg.beta2 = parse_double(key, value);
  } else if (key == "adam_eps") {
    cfg.adam_eps = parse_double(key, value);
  } else if (key == "batch") {
    cfg.batch = parse_int(key, value);
  } else if (key == "steps") {
    cfg.steps = parse_int(key, value);
  } else if (key == "weight_full") {
    cfg.weight_full = parse_double(key, value);
  } else if (key == "weight_half") {
    cfg.weight_half = parse_double(key, value);
  } else if (key == "charbonnier_eps") {
    cfg.charbonnier_eps = parse_double(key, value);
  } else if (key == "augment") {
    cfg.augment = parse_bool(key, value);
  } else if (key == "val_every") {
    cfg.val_every = parse_int(key, value);
  } else if (key == "seed") {
    cfg.seed = std::stoull(value);
  } else if (key == "dump_dir") {
    cfg.dump_dir = value;
  } else {
    return false;
  }
  return true;
}

double cosine_lr(int t, const TrainConfig& cfg) {
  if (cfg.steps <= 0) return cfg.lr_start;
  const double s = std::clamp(static_cast<double>(t) / cfg.steps, 0.0, 1.0);
  return cfg.lr_end + 0.5 * (cfg.lr_start - cfg.lr_end) * (1 + std::cos(std::numbers::pi * s));
}

namespace {

template <typename T>
double charbonnier_impl(const BasicTensor<T>& pred, const BasicTensor<T>& target, double eps,
                        BasicTensor<T>* grad) {
  pred.require_same_shape(target, "charbonnier");
  if (pred.empty()) throw InputError("charbonnier: empty tensors");
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  if (grad) *grad = BasicTensor<T>(pred.shape());
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    const double r = std::sqrt(d * d + eps * eps);
    sum += r;
    if (grad) (*grad)[i] = static_cast<T>(d / r * inv_n);
  }
  return sum * inv_n;
}

}  // namespace

double charbonnier(const Tensor& pred, const Tensor& target, double eps, Tensor* grad_pred) {
  return charbonnier_impl(pred, target, eps, grad_pred);
}
double charbonnier(const Tensor64& pred, const Tensor64& target, double eps, Tensor64* grad_pred) {
  return charbonnier_impl(pred, target, eps, grad_pred);
}

ScaleLoss multiscale_loss(const Tensor& pred_full, const Tensor& pred_half, const Tensor& target_full,
                          const Tensor& target_half, const TrainConfig& cfg) {
  ScaleLoss out;
  const double lf = charbonnier(pred_full, target_full, cfg.charbonnier_eps, &out.grad_full);
  const double lh = charbonnier(pred_half, target_half, cfg.charbonnier_eps, &out.grad_half);
  out.grad_full *= static_cast<float>(cfg.weight_full);
  out.grad_half *= static_cast<float>(cfg.weight_half);
  out.value = cfg.weight_full * lf + cfg.weight_half * lh;
  return out;
}

template <typename T>
bool adam_step(model::ParamMap<T>& params, const model::ParamMap<T>& grads, AdamState& state, double lr,
               const TrainConfig& cfg) {
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) {
      ++state.skipped;
      return false;
    }
    const auto it = params.find(name);
    if (it == params.end()) throw ConfigError("gradient for unknown parameter '" + name + "'");
    it->second.require_same_shape(g, name.c_str());
  }
  ++state.t;
  const double bc1 = 1 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (const auto& [name, g] : grads) {
    auto& p = params.at(name);
    auto& m = state.m.try_emplace(name, BasicTensor<double>(g.shape())).first->second;
    auto& v = state.v.try_emplace(name, BasicTensor<double>(g.shape())).first->second;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g[i];
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / bc1, vhat = v[i] / bc2;
      p[i] = static_cast<T>(p[i] - lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
  return true;
}

template bool adam_step(model::ParamMap<float>&, const model::ParamMap<float>&, AdamState&, double,
                        const TrainConfig&);
template bool adam_step(model::ParamMap<double>&, const model::ParamMap<double>&, AdamState&, double,
                        const TrainConfig&);

namespace {

Tensor clamp01(Tensor t) {
  for (auto& v : t.data()) v = std::clamp(v, 0.0f, 1.0f);
  return t;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void dump_intermediates(const std::filesystem::path& dir, const model::Intermediates<float>& r, const Tensor& input) {
  std::filesystem::create_directories(dir);
  save_mten(dir / "input.mten", input);
  save_mten(dir / "output.mten", r.output);
  save_mten(dir / "flow.mten", r.flow);
  save_mten(dir / "mask.mten", r.mask);
  save_mten(dir / "aligned.mten", r.aligned);
  save_mten(dir / "filtered.mten", r.filtered);
  save_mten(dir / "residual.mten", r.residual);
}

}  // namespace

EvalSummary evaluate(const model::ModelState& state, const std::vector<data::Sample>& samples) {
  EvalSummary s;
  for (const auto& smp : samples) {
    const auto out = clamp01(model::forward(state, smp.blurred).output);
    EvalRow row{smp.id, metrics::psnr(out, smp.sharp), metrics::ssim(out, smp.sharp),
                metrics::psnr(smp.blurred, smp.sharp), metrics::ssim(smp.blurred, smp.sharp)};
    s.psnr += row.psnr;
    s.ssim += row.ssim;
    s.input_psnr += row.input_psnr;
    s.input_ssim += row.input_ssim;
    s.rows.push_back(std::move(row));
  }
  if (!samples.empty()) {
    const double n = static_cast<double>(samples.size());
    s.psnr /= n;
    s.ssim /= n;
    s.input_psnr /= n;
    s.input_ssim /= n;
  }
  return s;
}

TrainResult train(model::ModelState& state, const data::Dataset& data, const TrainConfig& cfg, const LogSink& log) {
  cfg.validate();
  TrainResult result;
  if (cfg.steps > 0 && data.train.empty()) throw InputError("training set is empty");
  const auto emit = [&log](const std::string& line) {
    if (log) log(line);
  };
  const auto validate_now = [&](int step) {
    if (data.validation.empty()) return;
    result.final_eval = evaluate(state, data.validation);
    emit("step=" + std::to_string(step) + " val_psnr=" + metrics::format_metric(result.final_eval.psnr) +
         " val_ssim=" + metrics::format_metric(result.final_eval.ssim) +
         " input_psnr=" + metrics::format_metric(result.final_eval.input_psnr) +
         " input_ssim=" + metrics::format_metric(result.final_eval.input_ssim));
  };

  auto rng = make_rng(cfg.seed, "batches");
  AdamState adam;
  int non_finite_run = 0;
  const float inv_batch = 1.0f / static_cast<float>(cfg.batch);

  for (int step = 1; step <= cfg.steps; ++step) {
    const double lr = cosine_lr(step - 1, cfg);
    model::ParamMap<float> grads;
    double loss = 0;
    bool finite = true;
    for (int b = 0; b < cfg.batch && finite; ++b) {
      const auto& smp = data.train[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(data.train.size()) - 1))];
      const int code = cfg.augment ? uniform_int(rng, 0, 7) : 0;
      const bool square = smp.blurred.height() == smp.blurred.width();
      const int use = square ? code : (code & 3);
      const auto input = data::augment(smp.blurred, use);
      const auto target = data::augment(smp.sharp, use);
      model::ForwardPass<float> fp(state, input);
      const auto& r = fp.result();
      auto sl = multiscale_loss(r.output, r.output_half, target, avg_pool2(target), cfg);
      if (!std::isfinite(sl.value)) {
        finite = false;
        if (non_finite_run + 1 >= 2) {
          std::string where;
          if (!cfg.dump_dir.empty()) {
            dump_intermediates(cfg.dump_dir, r, input);
            where = "; intermediates written to " + cfg.dump_dir.string();
          }
          emit("step=" + std::to_string(step) + " abort=non_finite_loss");
          throw NumericError("loss is non-finite on two consecutive steps (step " + std::to_string(step) + ")" +
                             where);
        }
        break;
      }
      loss += sl.value / cfg.batch;
      sl.grad_full *= inv_batch;
      sl.grad_half *= inv_batch;
      fp.backward(sl.grad_full, sl.grad_half, grads);
    }
    if (!finite) {
      ++non_finite_run;
      ++adam.skipped;
      result.losses.push_back(std::nan(""));
      emit("step=" + std::to_string(step) + " lr=" + fmt("%.6e", lr) + " loss=nan skipped=1");
      continue;
    }
    non_finite_run = 0;
    const bool applied = adam_step(state.params, grads, adam, lr, cfg);
    result.losses.push_back(loss);
    emit("step=" + std::to_string(step) + " lr=" + fmt("%.6e", lr) + " loss=" + fmt("%.9g", loss) +
         (applied ? "" : " skipped=1"));
    if (cfg.val_every > 0 && step % cfg.val_every == 0 && step != cfg.steps) validate_now(step);
  }
  validate_now(cfg.steps);
  result.skipped_steps = adam.skipped;
  return result;
}

std::vector<double> smoothed_quartile_means(const std::vector<double>& losses, int window) {
  const std::size_t n = losses.size();
  if (n < 4) throw InputError("need at least four losses for quartiles");
  std::vector<double> smooth(n);
  double acc = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += losses[i];
    ++count;
    if (i >= static_cast<std::size_t>(window)) {
      acc -= losses[i - static_cast<std::size_t>(window)];
      --count;
    }
    smooth[i] = acc / static_cast<double>(count);
  }
  std::vector<double> q(4, 0.0);
  for (int k = 0; k < 4; ++k) {
    const std::size_t b = n * k / 4, e = n * (k + 1) / 4;
    for (std::size_t i = b; i < e; ++i) q[k] += smooth[i];
    q[k] /= static_cast<double>(e - b);
  }
  return q;
}

}  // namespace misc::train
