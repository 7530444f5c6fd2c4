#pragma once

#include <limits>
#include <string>

#include "misc/tensor.hpp"

namespace misc::metrics {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

// 10 log10(max_val^2 / MSE); identical inputs give +inf.
double psnr(const Tensor& a, const Tensor& b, double max_val = 1.0);

// Mean SSIM over every valid 11x11 window (no padding) of the ITU-R 601 luma
// of 3-channel inputs, or of channel 0 for 1-channel inputs. Gaussian window
// sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1. Throws InputError below 11x11.
double ssim(const Tensor& a, const Tensor& b);

// "inf" for the identical-image sentinel, fixed precision otherwise.
std::string format_metric(double v, int precision = 4);

}  // namespace misc::metrics
