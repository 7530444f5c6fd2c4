#pragma once

// 8-bit PNG in/out. Images are 3 x H x W floats in [0, 1]; values are clamped
// and rounded on write. Grayscale, palette and alpha inputs are converted to
// RGB (alpha is composited over black).

#include <filesystem>

#include "misc/tensor.hpp"

namespace misc {

// Throws IoError.
Tensor read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Tensor& image);

// Channel 0 of a 1 x H x W map in [0, 1] as a grayscale PNG.
void write_gray_png(const std::filesystem::path& path, const Tensor& map);

// Flow 2 x H x W as color: hue = direction, value = magnitude / max_magnitude.
// max_magnitude <= 0 normalizes by the largest magnitude present.
Tensor flow_to_rgb(const Tensor& flow, double max_magnitude = 0);

std::uint8_t to_byte(float v);

}  // namespace misc
