#include "misc/ops.hpp"

#include <Eigen/Core>

namespace misc {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRow = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapRow = Eigen::Map<const RowMat<T>>;

template <typename T>
void check_conv_shapes(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  if (input.ndim() != 3) throw ConfigError("conv2d: input must be C x H x W, got " + shape_str(input.shape()));
  if (weight.ndim() != 4) throw ConfigError("conv2d: weight must be O x C x k x k, got " + shape_str(weight.shape()));
  const int k = weight.dim(2);
  if (weight.dim(3) != k || k % 2 == 0) {
    throw ConfigError("conv2d: kernel must be square with odd size, got " + shape_str(weight.shape()));
  }
  if (weight.dim(1) != input.channels()) {
    throw ConfigError("conv2d: weight expects " + std::to_string(weight.dim(1)) + " input channels, input has " +
                      std::to_string(input.channels()));
  }
  if (bias.ndim() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ConfigError("conv2d: bias shape " + shape_str(bias.shape()) + " does not match " +
                      std::to_string(weight.dim(0)) + " outputs");
  }
}

// Row r = (c * k + ky) * k + kx holds input(c, y + ky - r, x + kx - r) with
// clamped coordinates, laid out over the H*W output pixels.
template <typename T>
void im2col(const BasicTensor<T>& input, int k, std::vector<T>& cols) {
  const int C = input.channels(), H = input.height(), W = input.width();
  const int r = k / 2;
  const std::size_t hw = input.plane();
  cols.resize(static_cast<std::size_t>(C) * k * k * hw);
  for (int c = 0; c < C; ++c) {
    const T* src = input.data().data() + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = cols.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dx = kx - r;
        for (int y = 0; y < H; ++y) {
          const int sy = std::clamp(y + ky - r, 0, H - 1);
          const T* row = src + sy * W;
          T* out = dst + y * W;
          const int lo = std::max(0, -dx), hi = std::min(W, W - dx);
          for (int x = 0; x < lo; ++x) out[x] = row[0];
          for (int x = lo; x < hi; ++x) out[x] = row[x + dx];
          for (int x = std::max(hi, lo); x < W; ++x) out[x] = row[W - 1];
        }
      }
    }
  }
}

template <typename T>
void col2im(const std::vector<T>& cols, int k, BasicTensor<T>& grad_in) {
  const int C = grad_in.channels(), H = grad_in.height(), W = grad_in.width();
  const int r = k / 2;
  const std::size_t hw = grad_in.plane();
  for (int c = 0; c < C; ++c) {
    T* dst = grad_in.data().data() + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = cols.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dx = kx - r;
        for (int y = 0; y < H; ++y) {
          const int sy = std::clamp(y + ky - r, 0, H - 1);
          T* row = dst + sy * W;
          const T* g = src + y * W;
          const int lo = std::max(0, -dx), hi = std::min(W, W - dx);
          for (int x = 0; x < lo; ++x) row[0] += g[x];
          for (int x = lo; x < hi; ++x) row[x + dx] += g[x];
          for (int x = std::max(hi, lo); x < W; ++x) row[W - 1] += g[x];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  check_conv_shapes(input, weight, bias);
  const int O = weight.dim(0), k = weight.dim(2);
  const int H = input.height(), W = input.width();
  const int rows = input.channels() * k * k;
  const Eigen::Index hw = static_cast<Eigen::Index>(input.plane());

  BasicTensor<T> out({O, H, W});
  MapRow<T> out_m(out.data().data(), O, hw);
  CMapRow<T> w_m(weight.data().data(), O, rows);
  if (k == 1) {
    out_m.noalias() = w_m * CMapRow<T>(input.data().data(), rows, hw);
  } else {
    std::vector<T> cols;
    im2col(input, k, cols);
    out_m.noalias() = w_m * CMapRow<T>(cols.data(), rows, hw);
  }
  for (int o = 0; o < O; ++o) out_m.row(o).array() += bias[static_cast<std::size_t>(o)];
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_out, bool need_input_grad) {
  const int O = weight.dim(0), k = weight.dim(2);
  const int rows = input.channels() * k * k;
  const Eigen::Index hw = static_cast<Eigen::Index>(input.plane());
  if (grad_out.shape() != Shape{O, input.height(), input.width()}) {
    throw ConfigError("conv2d_backward: upstream gradient shape " + shape_str(grad_out.shape()));
  }

  Conv2dGrads<T> g{BasicTensor<T>(), BasicTensor<T>(weight.shape()), BasicTensor<T>({O})};
  CMapRow<T> go(grad_out.data().data(), O, hw);
  // Plain loop: Eigen reductions peel to the buffer's runtime alignment, which
  // would make the summation order depend on where the allocator put it.
  for (int o = 0; o < O; ++o) {
    T s = 0;
    for (const T v : grad_out.channel(o)) s += v;
    g.bias[static_cast<std::size_t>(o)] = s;
  }

  MapRow<T> gw(g.weight.data().data(), O, rows);
  CMapRow<T> w_m(weight.data().data(), O, rows);
  if (k == 1) {
    gw.noalias() = go * CMapRow<T>(input.data().data(), rows, hw).transpose();
    if (need_input_grad) {
      g.input = BasicTensor<T>(input.shape());
      MapRow<T>(g.input.data().data(), rows, hw).noalias() = w_m.transpose() * go;
    }
    return g;
  }
  std::vector<T> cols;
  im2col(input, k, cols);
  gw.noalias() = go * CMapRow<T>(cols.data(), rows, hw).transpose();
  if (need_input_grad) {
    MapRow<T>(cols.data(), rows, hw).noalias() = w_m.transpose() * go;
    g.input = BasicTensor<T>(input.shape());
    col2im(cols, k, g.input);
  }
  return g;
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
  return out;
}

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& out, const BasicTensor<T>& grad_out) {
  out.require_same_shape(grad_out, "sigmoid_backward");
  BasicTensor<T> g(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) g[i] = grad_out[i] * out[i] * (T(1) - out[i]);
  return g;
}

template <typename T>
BasicTensor<T> tanh_clamp(const BasicTensor<T>& x, T bound) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = bound * std::tanh(x[i] / bound);
  return out;
}

template <typename T>
BasicTensor<T> tanh_clamp_backward(const BasicTensor<T>& out, T bound, const BasicTensor<T>& grad_out) {
  out.require_same_shape(grad_out, "tanh_clamp_backward");
  BasicTensor<T> g(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T t = out[i] / bound;
    g[i] = grad_out[i] * (T(1) - t * t);
  }
  return g;
}

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T slope) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : slope * x[i];
  return out;
}

template <typename T>
BasicTensor<T> leaky_relu_backward(const BasicTensor<T>& x, T slope, const BasicTensor<T>& grad_out) {
  x.require_same_shape(grad_out, "leaky_relu_backward");
  BasicTensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T(0) ? grad_out[i] : slope * grad_out[i];
  return g;
}

template <typename T>
BasicTensor<T> channel_softmax(const BasicTensor<T>& logits) {
  if (logits.ndim() != 3 || logits.channels() < 1) {
    throw ConfigError("channel_softmax: expected G x H x W with G >= 1, got " + shape_str(logits.shape()));
  }
  const int G = logits.channels();
  const std::size_t hw = logits.plane();
  BasicTensor<T> out(logits.shape());
  std::vector<T> row(static_cast<std::size_t>(G));
  for (std::size_t p = 0; p < hw; ++p) {
    T mx = logits[p];
    for (int g = 1; g < G; ++g) mx = std::max(mx, logits[g * hw + p]);
    T sum = 0;
    for (int g = 0; g < G; ++g) {
      row[g] = std::exp(logits[g * hw + p] - mx);
      sum += row[g];
    }
    for (int g = 0; g < G; ++g) out[g * hw + p] = row[g] / sum;
  }
  return out;
}

template <typename T>
BasicTensor<T> channel_softmax_backward(const BasicTensor<T>& out, const BasicTensor<T>& grad_out) {
  out.require_same_shape(grad_out, "channel_softmax_backward");
  const int G = out.channels();
  const std::size_t hw = out.plane();
  BasicTensor<T> g(out.shape());
  for (std::size_t p = 0; p < hw; ++p) {
    T dot = 0;
    for (int c = 0; c < G; ++c) dot += out[c * hw + p] * grad_out[c * hw + p];
    for (int c = 0; c < G; ++c) g[c * hw + p] = out[c * hw + p] * (grad_out[c * hw + p] - dot);
  }
  return g;
}

template <typename T>
BasicTensor<T> concat(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.empty() && a.ndim() <= 1) return b;
  if (b.empty() && b.ndim() <= 1) return a;
  if (a.ndim() != 3 || b.ndim() != 3 || a.height() != b.height() || a.width() != b.width()) {
    throw ConfigError("concat: spatial mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  BasicTensor<T> out({a.channels() + b.channels(), a.height(), a.width()});
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> concat_backward(int channels_a, const BasicTensor<T>& grad_out) {
  const int C = grad_out.channels(), H = grad_out.height(), W = grad_out.width();
  if (channels_a < 0 || channels_a > C) throw ConfigError("concat_backward: split point out of range");
  BasicTensor<T> ga({channels_a, H, W}), gb({C - channels_a, H, W});
  const auto split = grad_out.data().begin() + static_cast<std::ptrdiff_t>(ga.size());
  std::copy(grad_out.data().begin(), split, ga.data().begin());
  std::copy(split, grad_out.data().end(), gb.data().begin());
  return {std::move(ga), std::move(gb)};
}

template <typename T>
BasicTensor<T> avg_pool2(const BasicTensor<T>& x) {
  const int C = x.channels(), H = x.height(), W = x.width();
  if (H % 2 || W % 2) throw InputError("avg_pool2: spatial size must be even, got " + shape_str(x.shape()));
  BasicTensor<T> out({C, H / 2, W / 2});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H / 2; ++y)
      for (int xx = 0; xx < W / 2; ++xx)
        out(c, y, xx) = T(0.25) * (x(c, 2 * y, 2 * xx) + x(c, 2 * y, 2 * xx + 1) + x(c, 2 * y + 1, 2 * xx) +
                                   x(c, 2 * y + 1, 2 * xx + 1));
  return out;
}

template <typename T>
BasicTensor<T> avg_pool2_backward(const BasicTensor<T>& grad_out) {
  const int C = grad_out.channels(), H = grad_out.height(), W = grad_out.width();
  BasicTensor<T> g({C, 2 * H, 2 * W});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < 2 * H; ++y)
      for (int x = 0; x < 2 * W; ++x) g(c, y, x) = T(0.25) * grad_out(c, y / 2, x / 2);
  return g;
}

template <typename T>
BasicTensor<T> upsample_nearest2(const BasicTensor<T>& x) {
  const int C = x.channels(), H = x.height(), W = x.width();
  BasicTensor<T> out({C, 2 * H, 2 * W});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < 2 * H; ++y)
      for (int xx = 0; xx < 2 * W; ++xx) out(c, y, xx) = x(c, y / 2, xx / 2);
  return out;
}

template <typename T>
BasicTensor<T> upsample_nearest2_backward(const BasicTensor<T>& grad_out) {
  const int C = grad_out.channels(), H = grad_out.height(), W = grad_out.width();
  if (H % 2 || W % 2) throw ConfigError("upsample_nearest2_backward: odd gradient size");
  BasicTensor<T> g({C, H / 2, W / 2});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) g(c, y / 2, x / 2) += grad_out(c, y, x);
  return g;
}

template <typename T>
std::vector<T> bilinear_sample(const BasicTensor<T>& img, T x, T y) {
  const auto tap = BilinearTap<T>::make(x, y, img.height(), img.width());
  std::vector<T> out(static_cast<std::size_t>(img.channels()));
  for (int c = 0; c < img.channels(); ++c) out[c] = tap.sample(img.channel(c).data(), img.width());
  return out;
}

template <typename T>
BilinearSampleGrads<T> bilinear_sample_backward(const BasicTensor<T>& img, T x, T y, const std::vector<T>& grad_out) {
  if (grad_out.size() != static_cast<std::size_t>(img.channels())) {
    throw ConfigError("bilinear_sample_backward: gradient has " + std::to_string(grad_out.size()) +
                      " entries for " + std::to_string(img.channels()) + " channels");
  }
  const auto tap = BilinearTap<T>::make(x, y, img.height(), img.width());
  BilinearSampleGrads<T> g{BasicTensor<T>(img.shape()), T(0), T(0)};
  for (int c = 0; c < img.channels(); ++c) {
    const T* plane = img.channel(c).data();
    tap.scatter(g.img.channel(c).data(), img.width(), grad_out[c]);
    g.x += grad_out[c] * tap.grad_x(plane, img.width());
    g.y += grad_out[c] * tap.grad_y(plane, img.width());
  }
  return g;
}

#define MISC_INSTANTIATE_OPS(T)                                                                            \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);   \
  template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                          const BasicTensor<T>&, bool);                                   \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                                 \
  template BasicTensor<T> sigmoid_backward(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicTensor<T> tanh_clamp(const BasicTensor<T>&, T);                                           \
  template BasicTensor<T> tanh_clamp_backward(const BasicTensor<T>&, T, const BasicTensor<T>&);           \
  template BasicTensor<T> leaky_relu(const BasicTensor<T>&, T);                                           \
  template BasicTensor<T> leaky_relu_backward(const BasicTensor<T>&, T, const BasicTensor<T>&);           \
  template BasicTensor<T> channel_softmax(const BasicTensor<T>&);                                         \
  template BasicTensor<T> channel_softmax_backward(const BasicTensor<T>&, const BasicTensor<T>&);         \
  template BasicTensor<T> concat(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template std::pair<BasicTensor<T>, BasicTensor<T>> concat_backward(int, const BasicTensor<T>&);         \
  template BasicTensor<T> avg_pool2(const BasicTensor<T>&);                                               \
  template BasicTensor<T> avg_pool2_backward(const BasicTensor<T>&);                                      \
  template BasicTensor<T> upsample_nearest2(const BasicTensor<T>&);                                       \
  template BasicTensor<T> upsample_nearest2_backward(const BasicTensor<T>&);                              \
  template std::vector<T> bilinear_sample(const BasicTensor<T>&, T, T);                                   \
  template BilinearSampleGrads<T> bilinear_sample_backward(const BasicTensor<T>&, T, T, const std::vector<T>&);

MISC_INSTANTIATE_OPS(float)
MISC_INSTANTIATE_OPS(double)

}  // namespace misc
