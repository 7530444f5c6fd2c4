#pragma once

// Synthetic degradation: blurred = clamp(k * sharp + n), with k a linear
// motion PSF (optionally varying over a coarse grid of regions) and n
// Gaussian noise from a seeded stream.

#include <cstdint>
#include <vector>

#include "misc/tensor.hpp"

namespace misc::blur {

inline constexpr double kDefaultMaxLength = 31.0;

enum class Kind { None, Linear };

struct LinearMotion {
  double length = 1;  // pixels
  double angle = 0;   // radians, counter-clockwise from +x with y pointing down the rows
};

struct BlurSpec {
  Kind kind = Kind::Linear;
  LinearMotion motion;
  double noise_sigma = 0;
  // Spatially variant field: grid_rows x grid_cols region motions, row-major.
  // Empty means the single `motion` applies everywhere.
  int grid_rows = 0;
  int grid_cols = 0;
  std::vector<LinearMotion> regions;

  bool variant() const { return !regions.empty(); }
  // Throws ConfigError.
  void validate(double max_length = kDefaultMaxLength) const;
};

// Square, odd-sized, non-negative PSF summing to 1. Each cell holds the exact
// area of a width-1 segment of the given length and angle, centered on the
// kernel, that falls inside the cell. Side = smallest odd integer covering
// the segment's projection on the dominant axis.
// Throws ConfigError when length < 1 or length > max_length.
Tensor64 motion_kernel(double length, double angle, double max_length = kDefaultMaxLength);

// Plain 2D convolution of every channel with `kernel` (k x k, odd), replicate
// border: out(y, x) = sum_{i,j} k(i, j) * in(y - (i - r), x - (j - r)).
Tensor convolve(const Tensor& image, const Tensor64& kernel);

// Region-variant outputs are blended bilinearly between region centers, which
// equals filtering each pixel with the bilinearly blended kernel.
// clamp_output = false exposes the pre-clamp signal for noise statistics.
Tensor apply_blur(const Tensor& sharp, const BlurSpec& spec, std::uint64_t seed, bool clamp_output = true);

// Self-contained sharp source: smooth background, filled shapes, stripes and
// checker patches. Values in [0, 1].
Tensor procedural_image(int height, int width, std::uint64_t seed);

}  // namespace misc::blur
