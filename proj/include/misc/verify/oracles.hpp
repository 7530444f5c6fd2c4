#pragma once

// Reference implementations that share no code path with the production ops.
// All run in 64-bit with plain nested loops.

#include "misc/tensor.hpp"

namespace misc::verify {

// Cross-correlation with replicate border.
Tensor64 conv2d_oracle(const Tensor64& input, const Tensor64& weight, const Tensor64& bias);

// Per-pixel warp built from bilinear_sample.
Tensor64 warp_oracle(const Tensor64& flow, const Tensor64& x, int sign);

// m * warp(+o) + (1 - m) * warp(-o), pixel by pixel.
Tensor64 align_oracle(const Tensor64& flow, const Tensor64& mask, const Tensor64& x);

// out(y, x) = sum_{i,j} k(i, j) * in(y - (i - r), x - (j - r)), replicate border.
Tensor64 blur_oracle(const Tensor64& image, const Tensor64& kernel);

double psnr_oracle(const Tensor64& a, const Tensor64& b);

// SSIM of constant image c against constant c + d: the variances vanish, so
// only the luminance term remains.
double ssim_constant_closed_form(double c, double d);

}  // namespace misc::verify
