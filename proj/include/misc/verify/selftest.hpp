#pragma once

// Oracle and invariant checks over every module. Each check is deterministic
// in the seed and fast enough to run on every build.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace misc::verify {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

// scf_filter vs the brute-force filter, 50 random 16x16 instances for each
// n in {1, 3, 5, 7}, 32-bit, max-abs <= 1e-5.
Check check_separability(std::uint64_t seed);
// One-hot kernels, zero offsets, softmax-saturated center weight; |out - in| <= 1e-7.
Check check_identity_configuration(std::uint64_t seed);
// Zero flow returns image and feature bit-exactly for 20 random mask pairs.
Check check_zero_flow(std::uint64_t seed);
// Every DiffOp on 3 random instances at 1e-3, plus the end-to-end model at 1e-2.
// `on_case` receives one line per case.
Check check_gradients(std::uint64_t seed, const std::function<void(const Check&)>& on_case = {});
// Predicted tap weights and synthesized PSFs sum to 1 within 1e-6.
Check check_normalization(std::uint64_t seed);
// PSNR and SSIM against closed forms.
Check check_metric_oracles(std::uint64_t seed);

// Everything above plus the per-module invariants. `on_result` sees each
// check as it finishes.
std::vector<Check> run_selftest(std::uint64_t seed, const std::function<void(const Check&)>& on_result = {});

}  // namespace misc::verify
