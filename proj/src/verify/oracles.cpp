#include "misc/verify/oracles.hpp"

#include <algorithm>
#include <cmath>

#include "misc/ops.hpp"

namespace misc::verify {

Tensor64 conv2d_oracle(const Tensor64& input, const Tensor64& weight, const Tensor64& bias) {
  const int C = input.channels(), H = input.height(), W = input.width();
  const int O = weight.dim(0), k = weight.dim(2), r = k / 2;
  Tensor64 out({O, H, W});
  for (int o = 0; o < O; ++o) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = bias[static_cast<std::size_t>(o)];
        for (int c = 0; c < C; ++c) {
          for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
              const int yy = std::min(std::max(y + i - r, 0), H - 1);
              const int xx = std::min(std::max(x + j - r, 0), W - 1);
              acc += weight[((static_cast<std::size_t>(o) * C + c) * k + i) * k + j] * input(c, yy, xx);
            }
          }
        }
        out(o, y, x) = acc;
      }
    }
  }
  return out;
}

Tensor64 warp_oracle(const Tensor64& flow, const Tensor64& x, int sign) {
  Tensor64 out(x.shape());
  for (int yy = 0; yy < x.height(); ++yy) {
    for (int xx = 0; xx < x.width(); ++xx) {
      const auto v = bilinear_sample(x, xx + sign * flow(0, yy, xx), yy + sign * flow(1, yy, xx));
      for (int c = 0; c < x.channels(); ++c) out(c, yy, xx) = v[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

Tensor64 align_oracle(const Tensor64& flow, const Tensor64& mask, const Tensor64& x) {
  const auto fwd = warp_oracle(flow, x, +1);
  const auto bwd = warp_oracle(flow, x, -1);
  Tensor64 out(x.shape());
  for (int c = 0; c < x.channels(); ++c) {
    for (int yy = 0; yy < x.height(); ++yy) {
      for (int xx = 0; xx < x.width(); ++xx) {
        const double m = mask(0, yy, xx);
        out(c, yy, xx) = m * fwd(c, yy, xx) + (1 - m) * bwd(c, yy, xx);
      }
    }
  }
  return out;
}

Tensor64 blur_oracle(const Tensor64& image, const Tensor64& kernel) {
  const int n = kernel.dim(0), r = n / 2;
  const int H = image.height(), W = image.width();
  Tensor64 out(image.shape());
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = 0;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            const int yy = std::clamp(y - i + r, 0, H - 1);
            const int xx = std::clamp(x - j + r, 0, W - 1);
            acc += kernel[static_cast<std::size_t>(i) * n + j] * image(c, yy, xx);
          }
        }
        out(c, y, x) = acc;
      }
    }
  }
  return out;
}

double psnr_oracle(const Tensor64& a, const Tensor64& b) {
  long double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (static_cast<long double>(a[i]) - b[i]) * (a[i] - b[i]);
  const long double mse = se / a.size();
  return static_cast<double>(-10.0L * std::log10(mse));
}

double ssim_constant_closed_form(double c, double d) {
  const double C1 = 0.0001;
  return (2 * c * (c + d) + C1) / (c * c + (c + d) * (c + d) + C1);
}

}  // namespace misc::verify
