#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "misc/config.hpp"
#include "misc/dataset.hpp"
#include "misc/model.hpp"

namespace misc::train {

struct TrainConfig {
  double lr_start = 2e-4;
  double lr_end = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch = 8;
  int steps = 1000;
  double weight_full = 1.0;
  double weight_half = 0.5;
  double charbonnier_eps = 1e-3;
  bool augment = true;
  int val_every = 0;  // 0: only after the last step
  std::uint64_t seed = 0;
  std::filesystem::path dump_dir;  // intermediates dumped here on a NaN abort

  // Throws ConfigError.
  void validate() const;
};

// Same contract as apply_network_key.
bool apply_train_key(const std::string& key, const std::string& value, TrainConfig& cfg);

// lr_end + (lr_start - lr_end) (1 + cos(pi t / steps)) / 2.
double cosine_lr(int t, const TrainConfig& cfg);

// Charbonnier sqrt(d^2 + eps^2), averaged over elements. Symmetric in its
// arguments. Fills `grad_pred` (d loss / d pred) when non-null.
double charbonnier(const Tensor& pred, const Tensor& target, double eps, Tensor* grad_pred = nullptr);
double charbonnier(const Tensor64& pred, const Tensor64& target, double eps, Tensor64* grad_pred = nullptr);

struct ScaleLoss {
  double value = 0;
  Tensor grad_full;
  Tensor grad_half;
};

// weight_full * charbonnier(full) + weight_half * charbonnier(half).
ScaleLoss multiscale_loss(const Tensor& pred_full, const Tensor& pred_half, const Tensor& target_full,
                          const Tensor& target_half, const TrainConfig& cfg);

struct AdamState {
  model::ParamMap<double> m;
  model::ParamMap<double> v;
  long t = 0;        // applied steps
  long skipped = 0;  // steps dropped for non-finite gradients
};

// Bias-corrected Adam on every parameter that has a gradient. Returns false
// and leaves parameters untouched when any gradient is non-finite.
template <typename T>
bool adam_step(model::ParamMap<T>& params, const model::ParamMap<T>& grads, AdamState& state, double lr,
               const TrainConfig& cfg);

struct EvalRow {
  std::string id;
  double psnr = 0;
  double ssim = 0;
  double input_psnr = 0;  // blurred input vs sharp
  double input_ssim = 0;
};

struct EvalSummary {
  std::vector<EvalRow> rows;
  double psnr = 0;
  double ssim = 0;
  double input_psnr = 0;
  double input_ssim = 0;
};

// Model outputs are clamped to [0, 1] before scoring.
EvalSummary evaluate(const model::ModelState& state, const std::vector<data::Sample>& samples);

struct TrainResult {
  std::vector<double> losses;  // one per step; NaN for skipped steps
  long skipped_steps = 0;
  EvalSummary final_eval;
};

using LogSink = std::function<void(const std::string&)>;

// Deterministic given (state, data, cfg) when run single-threaded. Writes one
// key=value record per step and per validation pass. Throws NumericError when
// the loss is non-finite on two consecutive steps.
TrainResult train(model::ModelState& state, const data::Dataset& data, const TrainConfig& cfg,
                  const LogSink& log = {});

// Mean of the trailing moving average (window w) within each of four equal
// step ranges.
std::vector<double> smoothed_quartile_means(const std::vector<double>& losses, int window = 100);

}  // namespace misc::train
