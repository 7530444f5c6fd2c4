#include "misc/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "misc/errors.hpp"

namespace misc::metrics {

double psnr(const Tensor& a, const Tensor& b, double max_val) {
  a.require_same_shape(b, "psnr");
  if (a.empty()) throw InputError("psnr: empty images");
  double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0) return kInfinitePsnr;
  return 10 * std::log10(max_val * max_val / mse);
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> luma(const Tensor& t) {
  const std::size_t hw = t.plane();
  std::vector<double> y(hw);
  if (t.channels() == 3) {
    for (std::size_t p = 0; p < hw; ++p) y[p] = 0.299 * t[p] + 0.587 * t[hw + p] + 0.114 * t[2 * hw + p];
  } else {
    for (std::size_t p = 0; p < hw; ++p) y[p] = t[p];
  }
  return y;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  a.require_same_shape(b, "ssim");
  if (a.ndim() != 3 || (a.channels() != 3 && a.channels() != 1)) {
    throw InputError("ssim: expected 1 or 3 x H x W, got " + shape_str(a.shape()));
  }
  const int H = a.height(), W = a.width();
  if (H < kWindow || W < kWindow) throw InputError("ssim: image smaller than 11x11");

  double g[kWindow];
  double gsum = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;

  const auto x = luma(a), y = luma(b);
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  double total = 0;
  const int oh = H - kWindow + 1, ow = W - kWindow + 1;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < kWindow; ++i) {
        for (int j = 0; j < kWindow; ++j) {
          const double wgt = g[i] * g[j];
          const std::size_t p = static_cast<std::size_t>(oy + i) * W + (ox + j);
          mx += wgt * x[p];
          my += wgt * y[p];
          sxx += wgt * x[p] * x[p];
          syy += wgt * y[p] * y[p];
          sxy += wgt * x[p] * y[p];
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2 * mx * my + C1) * (2 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
    }
  }
  return total / (static_cast<double>(oh) * ow);
}

std::string format_metric(double v, int precision) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace misc::metrics
