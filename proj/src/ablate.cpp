#include "misc/ablate.hpp"

#include <cstdio>

#include "misc/metrics.hpp"

namespace misc::ablate {

std::vector<Variant> default_variants(const model::NetworkConfig& base, const model::CouplingConfig& coupling) {
  constexpr double kCouplingRef[] = {32.53, 32.42, 32.56, 32.38, 32.63, 32.59, 32.55, 32.46, 32.83, 32.39};
  constexpr double kComponentRef[] = {32.40, 32.51, 32.55, 32.67, 32.71, 32.67, 32.83};
  constexpr double kKernelRef[] = {32.60, 32.76, 32.83};
  std::vector<Variant> out;
  for (char g = 'a'; g <= 'j'; ++g) {
    const auto c = model::CouplingConfig::from_group(g);
    out.push_back({"coupling", c.name(), base, c, kCouplingRef[g - 'a']});
  }
  const model::Components rows[] = {
      {false, false, false, false}, {true, false, false, false}, {true, true, false, false},
      {true, true, true, false},    {true, true, false, true},   {false, true, true, true},
      {true, true, true, true},
  };
  for (std::size_t i = 0; i < std::size(rows); ++i) {
    auto net = base;
    net.components = rows[i];
    out.push_back({"component", rows[i].name(), net, coupling, kComponentRef[i]});
  }
  for (int i = 0; i < 3; ++i) {
    auto net = base;
    net.kernel_size = 3 + 2 * i;
    out.push_back({"kernel", "n=" + std::to_string(net.kernel_size), net, coupling, kKernelRef[i]});
  }
  return out;
}

Report run(const std::vector<Variant>& variants, const data::Dataset& data, const train::TrainConfig& cfg,
           const train::LogSink& log) {
  Report report;
  for (const auto& v : variants) {
    Row row;
    row.variant = v;
    try {
      auto state = model::build_model(v.net, v.coupling, cfg.seed);
      row.parameters = state.parameter_count();
      const auto result = train::train(state, data, cfg);
      row.psnr = result.final_eval.psnr;
      row.ssim = result.final_eval.ssim;
      row.input_psnr = result.final_eval.input_psnr;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    if (log) {
      log("table=" + v.table + " variant=\"" + v.label + "\" ok=" + (row.ok ? "1" : "0") +
          " psnr=" + metrics::format_metric(row.psnr) + " ssim=" + metrics::format_metric(row.ssim) +
          (row.ok ? "" : " error=\"" + row.error + "\""));
    }
    report.rows.push_back(std::move(row));
  }

  const Row* best = nullptr;
  const Row* target = nullptr;
  for (const auto& r : report.rows) {
    if (r.variant.table != "coupling" || !r.ok) continue;
    if (!best || r.psnr > best->psnr) best = &r;
    if (r.variant.coupling == model::CouplingConfig{model::Strategy::Shared, model::Order::FilterFirst}) target = &r;
  }
  if (best && target) report.shared_filter_first_best = best == target || best->psnr == target->psnr;
  return report;
}

std::string format_report(const Report& report) {
  std::string out;
  std::string table;
  char buf[256];
  for (const auto& r : report.rows) {
    if (r.variant.table != table) {
      table = r.variant.table;
      out += "\n[" + table + "]\n";
      std::snprintf(buf, sizeof buf, "%-34s %10s %9s %8s %10s %13s\n", "variant", "params", "PSNR", "SSIM",
                    "input PSNR", "full-scale ref");
      out += buf;
    }
    if (r.ok) {
      const std::string ref = r.variant.reference_psnr ? metrics::format_metric(*r.variant.reference_psnr, 2) : "-";
      std::snprintf(buf, sizeof buf, "%-34s %10zu %9s %8s %10s %13s\n", r.variant.label.c_str(), r.parameters,
                    metrics::format_metric(r.psnr, 3).c_str(), metrics::format_metric(r.ssim, 4).c_str(),
                    metrics::format_metric(r.input_psnr, 3).c_str(), ref.c_str());
    } else {
      std::snprintf(buf, sizeof buf, "%-34s FAILED: ", r.variant.label.c_str());
      out += buf + r.error + "\n";
      continue;
    }
    out += buf;
  }
  out += "\nshared/filter-first ranks first among couplings: ";
  if (!report.shared_filter_first_best) {
    out += "undetermined\n";
  } else {
    out += *report.shared_filter_first_best ? "yes\n" : "no\n";
  }
  return out;
}

}  // namespace misc::ablate
