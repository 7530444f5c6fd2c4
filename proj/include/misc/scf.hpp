#pragma once

// Separable collaborative filtering. Each output pixel is a weighted sum over
// n*n taps; tap t = (i, j) contributes
//   w[t] * k_v[i] * k_h[j] * sample(I', a + (j - r) + p_x[t], b + (i - r) + p_y[t])
// with r = (n - 1) / 2. The base grid (j - r, i - r) plus the learned residual
// offset gives the total displacement, so zero residuals are a plain n x n
// window. Taps are shared across color channels.

#include <optional>
#include <vector>

#include "misc/ops.hpp"

namespace misc::scf {

// Row-major n x n tap layout centered on the output pixel.
class TapGrid {
 public:
  explicit TapGrid(int n);
  int n() const { return n_; }
  int taps() const { return n_ * n_; }
  int row(int t) const { return t / n_; }
  int col(int t) const { return t % n_; }
  int base_dx(int t) const { return col(t) - n_ / 2; }
  int base_dy(int t) const { return row(t) - n_ / 2; }

 private:
  int n_;
};

template <typename T>
struct ScfParams {
  int n = 0;
  BasicTensor<T> k_v;  // n x H x W
  BasicTensor<T> k_h;  // n x H x W
  BasicTensor<T> p_x;  // n^2 x H x W, pixels
  BasicTensor<T> p_y;  // n^2 x H x W, pixels
  BasicTensor<T> w;    // n^2 x H x W, softmax-normalized per pixel

  int height() const { return k_v.height(); }
  int width() const { return k_v.width(); }

  // Throws ConfigError on inconsistent shapes or even n.
  void validate() const;

  template <typename U>
  ScfParams<U> cast() const {
    return {n, k_v.template cast<U>(), k_h.template cast<U>(), p_x.template cast<U>(), p_y.template cast<U>(),
            w.template cast<U>()};
  }
};

// Which estimators are active. A missing estimator is replaced by a fixed
// value: kernels of ones, zero residual offsets, uniform weights 1/n^2.
template <typename T>
struct Estimators {
  const ConvParams<T>* kernel = nullptr;  // 2n outputs: k_v then k_h
  const ConvParams<T>* offset = nullptr;  // 2n^2 outputs: p_x then p_y
  const ConvParams<T>* weight = nullptr;  // n^2 logits, softmax across taps
};

// All estimators read concat(F, F').
template <typename T>
ScfParams<T> estimate_params(const BasicTensor<T>& feature, const BasicTensor<T>& aligned_feature,
                             const Estimators<T>& est, int n);

template <typename T>
struct EstimateGrads {
  BasicTensor<T> feature;
  BasicTensor<T> aligned_feature;
  std::optional<Conv2dGrads<T>> kernel, offset, weight;
};

template <typename T>
EstimateGrads<T> estimate_params_backward(const BasicTensor<T>& feature, const BasicTensor<T>& aligned_feature,
                                          const Estimators<T>& est, const ScfParams<T>& params,
                                          const ScfParams<T>& grad_params);

// Rank-1 n x n kernel, entry (i, j) = k_v[i] * k_h[j].
template <typename T>
BasicTensor<T> outer_kernel(const std::vector<T>& k_v, const std::vector<T>& k_h);

template <typename T>
BasicTensor<T> scf_filter(const BasicTensor<T>& image, const ScfParams<T>& params);

template <typename T>
struct FilterGrads {
  BasicTensor<T> image;
  ScfParams<T> params;
};

template <typename T>
FilterGrads<T> scf_filter_backward(const BasicTensor<T>& image, const ScfParams<T>& params,
                                   const BasicTensor<T>& grad_out);

// Reference implementation: materializes the n x n kernel per pixel with
// outer_kernel and samples each tap with its own scalar interpolation.
Tensor64 scf_filter_bruteforce(const Tensor64& image, const ScfParams<double>& params);

struct TapInfo {
  int tap = 0;
  double dx = 0;           // total horizontal displacement (grid + residual)
  double dy = 0;
  double coefficient = 0;  // w * k_v * k_h
};

// The n^2 effective taps at pixel (x, y), for inspection.
template <typename T>
std::vector<TapInfo> taps_at(const ScfParams<T>& params, int x, int y);

// Unit-gain configuration: one-hot center kernels, zero residual offsets and
// all weight on the center tap.
template <typename T>
ScfParams<T> identity_params(int n, int height, int width);

}  // namespace misc::scf
