#include "misc/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "misc/errors.hpp"

namespace misc {

std::uint8_t to_byte(float v) {
  const float c = std::clamp(std::isnan(v) ? 0.0f : v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

Tensor read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  png_color black{0, 0, 0};
  if (!png_image_finish_read(&img, &black, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const int H = static_cast<int>(img.height), W = static_cast<int>(img.width);
  Tensor out({3, H, W});
  const std::size_t hw = out.plane();
  for (std::size_t p = 0; p < hw; ++p) {
    for (int c = 0; c < 3; ++c) out[c * hw + p] = static_cast<float>(buf[3 * p + c]) / 255.0f;
  }
  return out;
}

namespace {

void write_raw(const std::filesystem::path& path, const std::vector<std::uint8_t>& buf, int H, int W,
               png_uint_32 format) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(W);
  img.height = static_cast<png_uint_32>(H);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot write PNG " + path.string() + ": " + msg);
  }
}

}  // namespace

void write_png(const std::filesystem::path& path, const Tensor& image) {
  if (image.ndim() != 3 || image.channels() != 3) {
    throw ConfigError("write_png: expected 3 x H x W, got " + shape_str(image.shape()));
  }
  const std::size_t hw = image.plane();
  std::vector<std::uint8_t> buf(3 * hw);
  for (std::size_t p = 0; p < hw; ++p) {
    for (int c = 0; c < 3; ++c) buf[3 * p + c] = to_byte(image[c * hw + p]);
  }
  write_raw(path, buf, image.height(), image.width(), PNG_FORMAT_RGB);
}

void write_gray_png(const std::filesystem::path& path, const Tensor& map) {
  if (map.ndim() != 3) throw ConfigError("write_gray_png: expected C x H x W, got " + shape_str(map.shape()));
  std::vector<std::uint8_t> buf(map.plane());
  for (std::size_t p = 0; p < buf.size(); ++p) buf[p] = to_byte(map[p]);
  write_raw(path, buf, map.height(), map.width(), PNG_FORMAT_GRAY);
}

Tensor flow_to_rgb(const Tensor& flow, double max_magnitude) {
  if (flow.ndim() != 3 || flow.channels() != 2) {
    throw ConfigError("flow_to_rgb: expected 2 x H x W, got " + shape_str(flow.shape()));
  }
  const std::size_t hw = flow.plane();
  double peak = max_magnitude;
  if (peak <= 0) {
    for (std::size_t p = 0; p < hw; ++p) peak = std::max(peak, std::hypot(double(flow[p]), double(flow[hw + p])));
  }
  Tensor rgb({3, flow.height(), flow.width()});
  for (std::size_t p = 0; p < hw; ++p) {
    const double fx = flow[p], fy = flow[hw + p];
    const double v = peak > 0 ? std::min(1.0, std::hypot(fx, fy) / peak) : 0.0;
    double h = std::atan2(fy, fx) / (2 * std::numbers::pi);
    if (h < 0) h += 1;
    // HSV with full saturation.
    const double h6 = h * 6;
    const int sector = static_cast<int>(h6) % 6;
    const double f = h6 - std::floor(h6);
    const double q = v * (1 - f), t = v * f;
    double r = 0, g = 0, b = 0;
    switch (sector) {
      case 0: r = v, g = t, b = 0; break;
      case 1: r = q, g = v, b = 0; break;
      case 2: r = 0, g = v, b = t; break;
      case 3: r = 0, g = q, b = v; break;
      case 4: r = t, g = 0, b = v; break;
      default: r = v, g = 0, b = q; break;
    }
    rgb[p] = static_cast<float>(r);
    rgb[hw + p] = static_cast<float>(g);
    rgb[2 * hw + p] = static_cast<float>(b);
  }
  return rgb;
}

}  // namespace misc
