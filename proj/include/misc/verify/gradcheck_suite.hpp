#pragma once

// Every differentiable operation wrapped as a DiffOp<double> together with a
// random-instance generator, for gradient checking.

#include <functional>
#include <string>
#include <vector>

#include "misc/diffop.hpp"
#include "misc/rng.hpp"

namespace misc::verify {

struct GradcheckCase {
  DiffOp<double> op;
  std::function<std::vector<Tensor64>(Rng&)> make_inputs;
  std::vector<int> skip_inputs;
  double tolerance = 1e-3;
};

// conv2d, sigmoid, tanh_clamp, leaky_relu, channel_softmax, concat, avg_pool2,
// upsample_nearest2, bilinear_sample, warp, bidirectional_warp, mga_align,
// estimate_params, scf_filter and the multi-scale loss.
std::vector<GradcheckCase> op_cases();

// Loss of the full network w.r.t. every parameter; 8x8 input, n = 3,
// depth 1, tolerance 1e-2.
GradcheckCase model_case();

struct CaseResult {
  std::string name;
  double worst_relative = 0;
  bool passed = false;
  std::string error;  // set when gradcheck threw
};

// Runs `instances` random instances of `c`, seeds derived from `seed`.
CaseResult run_case(const GradcheckCase& c, int instances, std::uint64_t seed);

}  // namespace misc::verify
