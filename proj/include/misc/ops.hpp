#pragma once

// Differentiable primitives. Every forward op has a hand-written backward that
// maps the upstream gradient to per-input gradients (vector-Jacobian product).
// Spatial ops use replicate/clamp borders throughout.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "misc/tensor.hpp"

namespace misc {

// ---------------------------------------------------------------------------
// conv2d: stride 1, odd square kernel, same-size output, replicate padding.

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias);

// input gradient is skipped (left empty) when need_input_grad is false.
template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_out, bool need_input_grad = true);

// ---------------------------------------------------------------------------
// Elementwise.

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);
// Takes the forward output, not the input.
template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& out, const BasicTensor<T>& grad_out);

// bound * tanh(x / bound): soft clamp into (-bound, bound).
template <typename T>
BasicTensor<T> tanh_clamp(const BasicTensor<T>& x, T bound);
template <typename T>
BasicTensor<T> tanh_clamp_backward(const BasicTensor<T>& out, T bound, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T slope);
template <typename T>
BasicTensor<T> leaky_relu_backward(const BasicTensor<T>& x, T slope, const BasicTensor<T>& grad_out);

// ---------------------------------------------------------------------------
// Softmax across channels at every pixel of a G x H x W tensor.

template <typename T>
BasicTensor<T> channel_softmax(const BasicTensor<T>& logits);
template <typename T>
BasicTensor<T> channel_softmax_backward(const BasicTensor<T>& out, const BasicTensor<T>& grad_out);

// ---------------------------------------------------------------------------
// Channel concatenation (a first).

template <typename T>
BasicTensor<T> concat(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> concat_backward(int channels_a, const BasicTensor<T>& grad_out);

// Channels [begin, begin + count) of a C x H x W tensor.
template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > x.channels()) {
    throw ConfigError("slice_channels: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                      ") out of range for " + shape_str(x.shape()));
  }
  BasicTensor<T> out({count, x.height(), x.width()});
  const auto first = x.data().begin() + static_cast<std::ptrdiff_t>(begin * x.plane());
  std::copy(first, first + static_cast<std::ptrdiff_t>(out.size()), out.data().begin());
  return out;
}

// ---------------------------------------------------------------------------
// Resampling used by the encoder-decoder. Both require even H and W for pooling.

template <typename T>
BasicTensor<T> avg_pool2(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> avg_pool2_backward(const BasicTensor<T>& grad_out);
template <typename T>
BasicTensor<T> upsample_nearest2(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> upsample_nearest2_backward(const BasicTensor<T>& grad_out);

// ---------------------------------------------------------------------------
// Bilinear sampling with clamped coordinates.

// Precomputed neighbors and fractions for one sample position. Coordinates
// outside [0, W-1] x [0, H-1] are clamped; the gradient with respect to a
// clamped coordinate is zero.
template <typename T>
struct BilinearTap {
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  T fx = 0, fy = 0;
  bool live_x = true, live_y = true;

  static BilinearTap make(T x, T y, int height, int width) {
    BilinearTap t;
    const T max_x = static_cast<T>(width - 1);
    const T max_y = static_cast<T>(height - 1);
    t.live_x = x >= T(0) && x <= max_x;
    t.live_y = y >= T(0) && y <= max_y;
    const T cx = std::clamp(x, T(0), max_x);
    const T cy = std::clamp(y, T(0), max_y);
    t.x0 = static_cast<int>(std::floor(cx));
    t.y0 = static_cast<int>(std::floor(cy));
    t.x1 = std::min(t.x0 + 1, width - 1);
    t.y1 = std::min(t.y0 + 1, height - 1);
    t.fx = cx - static_cast<T>(t.x0);
    t.fy = cy - static_cast<T>(t.y0);
    return t;
  }

  T sample(const T* plane, int width) const {
    const T v00 = plane[y0 * width + x0], v01 = plane[y0 * width + x1];
    const T v10 = plane[y1 * width + x0], v11 = plane[y1 * width + x1];
    return (T(1) - fy) * ((T(1) - fx) * v00 + fx * v01) + fy * ((T(1) - fx) * v10 + fx * v11);
  }

  // d sample / d x and d sample / d y.
  T grad_x(const T* plane, int width) const {
    if (!live_x) return T(0);
    const T v00 = plane[y0 * width + x0], v01 = plane[y0 * width + x1];
    const T v10 = plane[y1 * width + x0], v11 = plane[y1 * width + x1];
    return (T(1) - fy) * (v01 - v00) + fy * (v11 - v10);
  }
  T grad_y(const T* plane, int width) const {
    if (!live_y) return T(0);
    const T v00 = plane[y0 * width + x0], v01 = plane[y0 * width + x1];
    const T v10 = plane[y1 * width + x0], v11 = plane[y1 * width + x1];
    return (T(1) - fx) * (v10 - v00) + fx * (v11 - v01);
  }

  // sample, grad_x and grad_y from one read of the four neighbors.
  void sample_and_grads(const T* plane, int width, T& value, T& gx, T& gy) const {
    const T v00 = plane[y0 * width + x0], v01 = plane[y0 * width + x1];
    const T v10 = plane[y1 * width + x0], v11 = plane[y1 * width + x1];
    value = (T(1) - fy) * ((T(1) - fx) * v00 + fx * v01) + fy * ((T(1) - fx) * v10 + fx * v11);
    gx = live_x ? (T(1) - fy) * (v01 - v00) + fy * (v11 - v10) : T(0);
    gy = live_y ? (T(1) - fx) * (v10 - v00) + fx * (v11 - v01) : T(0);
  }

  // Accumulates g * d sample / d plane into grad_plane.
  void scatter(T* grad_plane, int width, T g) const {
    grad_plane[y0 * width + x0] += g * (T(1) - fy) * (T(1) - fx);
    grad_plane[y0 * width + x1] += g * (T(1) - fy) * fx;
    grad_plane[y1 * width + x0] += g * fy * (T(1) - fx);
    grad_plane[y1 * width + x1] += g * fy * fx;
  }
};

// Samples every channel of `img` at (x, y).
template <typename T>
std::vector<T> bilinear_sample(const BasicTensor<T>& img, T x, T y);

template <typename T>
struct BilinearSampleGrads {
  BasicTensor<T> img;
  T x = 0;
  T y = 0;
};

template <typename T>
BilinearSampleGrads<T> bilinear_sample_backward(const BasicTensor<T>& img, T x, T y, const std::vector<T>& grad_out);

// ---------------------------------------------------------------------------
// One convolution layer's learnable tensors.
template <typename T>
struct ConvParams {
  BasicTensor<T> weight;  // O x C x k x k
  BasicTensor<T> bias;    // O

  int out_channels() const { return weight.dim(0); }
  int in_channels() const { return weight.dim(1); }
  int kernel_size() const { return weight.dim(2); }
};

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const ConvParams<T>& p) {
  return conv2d(input, p.weight, p.bias);
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const ConvParams<T>& p, const BasicTensor<T>& grad_out,
                               bool need_input_grad = true) {
  return conv2d_backward(input, p.weight, grad_out, need_input_grad);
}

}  // namespace misc
