#include "misc/diffop.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace misc {

namespace {

double project(const Tensor64& out, const Tensor64& r) {
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * r[i];
  return s;
}

}  // namespace

GradcheckReport gradcheck(const DiffOp<double>& op, const std::vector<Tensor64>& inputs,
                          const GradcheckOptions& options) {
  for (std::size_t i = 0; i < inputs.size(); ++i) require_finite(inputs[i], op.name + " input " + std::to_string(i));
  const Tensor64 out = op.forward(inputs);
  require_finite(out, op.name + " forward output");

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor64 r(out.shape());
  for (auto& v : r.data()) v = dist(rng);

  const auto analytic = op.backward(inputs, r);
  if (analytic.size() != inputs.size()) {
    throw NumericError(op.name + ": backward returned " + std::to_string(analytic.size()) + " gradients for " +
                       std::to_string(inputs.size()) + " inputs");
  }

  GradcheckReport report;
  report.op = op.name;
  report.passed = true;
  auto probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (std::find(options.skip_inputs.begin(), options.skip_inputs.end(), static_cast<int>(i)) !=
        options.skip_inputs.end()) {
      continue;
    }
    if (analytic[i].shape() != inputs[i].shape()) {
      throw NumericError(op.name + ": gradient " + std::to_string(i) + " has shape " +
                         shape_str(analytic[i].shape()) + ", input has " + shape_str(inputs[i].shape()));
    }
    require_finite(analytic[i], op.name + " analytic gradient " + std::to_string(i));

    double diff2 = 0, a2 = 0, n2 = 0, max_abs = 0;
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double saved = probe[i][j];
      probe[i][j] = saved + options.step;
      const double plus = project(op.forward(probe), r);
      probe[i][j] = saved - options.step;
      const double minus = project(op.forward(probe), r);
      probe[i][j] = saved;
      const double numeric = (plus - minus) / (2 * options.step);
      if (!std::isfinite(numeric)) throw NumericError(op.name + ": non-finite finite-difference estimate");
      const double d = analytic[i][j] - numeric;
      diff2 += d * d;
      a2 += analytic[i][j] * analytic[i][j];
      n2 += numeric * numeric;
      max_abs = std::max(max_abs, std::abs(d));
    }
    InputGradError e;
    e.input = static_cast<int>(i);
    const double scale = std::max(std::sqrt(a2), std::sqrt(n2));
    e.relative = scale > 0 ? std::sqrt(diff2) / scale : 0.0;
    e.max_abs = max_abs;
    e.numeric_norm = std::sqrt(n2);
    report.max_relative = std::max(report.max_relative, e.relative);
    if (!(e.relative <= options.tolerance)) report.passed = false;
    report.inputs.push_back(e);
  }
  return report;
}

}  // namespace misc
