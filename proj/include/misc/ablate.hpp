#pragma once

// Toy-scale ablation: every variant is built and trained from the same seed
// on the same data, then scored on the validation split.

#include <optional>
#include <string>
#include <vector>

#include "misc/train.hpp"

namespace misc::ablate {

struct Variant {
  std::string table;  // "coupling", "component" or "kernel"
  std::string label;
  model::NetworkConfig net;
  model::CouplingConfig coupling;
  // Published full-scale PSNR of the same row, shown for context only; toy
  // numbers are not expected to match it.
  std::optional<double> reference_psnr;
};

// Ten couplings (a..j), seven component rows (base, +mga, +mga+kernel,
// +mga+kernel+weight, +mga+kernel+offset, +kernel+weight+offset, full) and
// kernel sizes 3, 5, 7, all derived from `base` and `coupling`.
std::vector<Variant> default_variants(const model::NetworkConfig& base, const model::CouplingConfig& coupling);

struct Row {
  Variant variant;
  bool ok = false;
  std::string error;
  std::size_t parameters = 0;
  double psnr = 0;
  double ssim = 0;
  double input_psnr = 0;
};

struct Report {
  std::vector<Row> rows;
  // Whether (shared, filter-first) has the best PSNR among the coupling rows;
  // empty when that row failed or there are no coupling rows.
  std::optional<bool> shared_filter_first_best;
};

// A failing variant is recorded and the run continues.
Report run(const std::vector<Variant>& variants, const data::Dataset& data, const train::TrainConfig& cfg,
           const train::LogSink& log = {});

std::string format_report(const Report& report);

}  // namespace misc::ablate
