#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "misc/tensor.hpp"

namespace misc {

// A differentiable operation: forward maps inputs to one output tensor,
// backward maps (inputs, upstream gradient) to one gradient per input with
// matching shapes.
template <typename T>
struct DiffOp {
  using Inputs = std::vector<BasicTensor<T>>;
  std::string name;
  std::function<BasicTensor<T>(const Inputs&)> forward;
  std::function<Inputs(const Inputs&, const BasicTensor<T>&)> backward;
};

struct GradcheckOptions {
  double tolerance = 1e-3;
  double step = 1e-6;
  std::uint64_t seed = 1;
  // Inputs whose gradient is not checked (e.g. integer-like configuration).
  std::vector<int> skip_inputs;
};

struct InputGradError {
  int input = 0;
  double relative = 0;    // ||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2)
  double max_abs = 0;     // worst single-entry absolute difference
  double numeric_norm = 0;
};

struct GradcheckReport {
  std::string op;
  std::vector<InputGradError> inputs;
  double max_relative = 0;
  bool passed = false;
};

// Compares backward() against central differences of the scalar projection
// <r, forward(inputs)> for a fixed random r. Runs in 64-bit only. Throws
// NumericError when forward or backward produce non-finite values, or when
// backward returns a gradient whose shape differs from its input.
GradcheckReport gradcheck(const DiffOp<double>& op, const std::vector<Tensor64>& inputs,
                          const GradcheckOptions& options = {});

}  // namespace misc
