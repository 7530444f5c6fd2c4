#include "misc/scf.hpp"

#include <algorithm>
#include <cmath>

namespace misc::scf {

TapGrid::TapGrid(int n) : n_(n) {
  if (n < 1 || n % 2 == 0) throw ConfigError("kernel size must be odd and positive, got " + std::to_string(n));
}

template <typename T>
void ScfParams<T>::validate() const {
  TapGrid grid(n);
  const auto check = [&](const BasicTensor<T>& t, int channels, const char* name) {
    if (t.ndim() != 3 || t.channels() != channels || t.height() != k_v.height() || t.width() != k_v.width()) {
      throw ConfigError(std::string("ScfParams.") + name + ": expected " + std::to_string(channels) +
                        " channels at " + std::to_string(k_v.height()) + "x" + std::to_string(k_v.width()) +
                        ", got " + shape_str(t.shape()));
    }
  };
  if (k_v.ndim() != 3) throw ConfigError("ScfParams.k_v must be n x H x W");
  check(k_v, n, "k_v");
  check(k_h, n, "k_h");
  check(p_x, grid.taps(), "p_x");
  check(p_y, grid.taps(), "p_y");
  check(w, grid.taps(), "w");
}

template <typename T>
ScfParams<T> estimate_params(const BasicTensor<T>& feature, const BasicTensor<T>& aligned_feature,
                             const Estimators<T>& est, int n) {
  const TapGrid grid(n);
  const int taps = grid.taps();
  const auto both = concat(feature, aligned_feature);
  const int H = both.height(), W = both.width();
  ScfParams<T> p;
  p.n = n;
  if (est.kernel) {
    if (est.kernel->out_channels() != 2 * n) {
      throw ConfigError("kernel estimator has " + std::to_string(est.kernel->out_channels()) +
                        " outputs, kernel size " + std::to_string(n) + " needs " + std::to_string(2 * n));
    }
    const auto k = conv2d(both, *est.kernel);
    p.k_v = slice_channels(k, 0, n);
    p.k_h = slice_channels(k, n, n);
  } else {
    p.k_v = BasicTensor<T>({n, H, W}, T(1));
    p.k_h = BasicTensor<T>({n, H, W}, T(1));
  }
  if (est.offset) {
    if (est.offset->out_channels() != 2 * taps) {
      throw ConfigError("offset estimator has " + std::to_string(est.offset->out_channels()) +
                        " outputs, kernel size " + std::to_string(n) + " needs " + std::to_string(2 * taps));
    }
    const auto o = conv2d(both, *est.offset);
    p.p_x = slice_channels(o, 0, taps);
    p.p_y = slice_channels(o, taps, taps);
  } else {
    p.p_x = BasicTensor<T>({taps, H, W});
    p.p_y = BasicTensor<T>({taps, H, W});
  }
  if (est.weight) {
    if (est.weight->out_channels() != taps) {
      throw ConfigError("weight estimator has " + std::to_string(est.weight->out_channels()) +
                        " outputs, kernel size " + std::to_string(n) + " needs " + std::to_string(taps));
    }
    p.w = channel_softmax(conv2d(both, *est.weight));
  } else {
    p.w = BasicTensor<T>({taps, H, W}, T(1) / static_cast<T>(taps));
  }
  return p;
}

template <typename T>
EstimateGrads<T> estimate_params_backward(const BasicTensor<T>& feature, const BasicTensor<T>& aligned_feature,
                                          const Estimators<T>& est, const ScfParams<T>& params,
                                          const ScfParams<T>& grad_params) {
  const auto both = concat(feature, aligned_feature);
  BasicTensor<T> g_both(both.shape());
  EstimateGrads<T> g;
  if (est.kernel) {
    auto c = conv2d_backward(both, *est.kernel, concat(grad_params.k_v, grad_params.k_h));
    g_both += c.input;
    c.input = BasicTensor<T>();
    g.kernel = std::move(c);
  }
  if (est.offset) {
    auto c = conv2d_backward(both, *est.offset, concat(grad_params.p_x, grad_params.p_y));
    g_both += c.input;
    c.input = BasicTensor<T>();
    g.offset = std::move(c);
  }
  if (est.weight) {
    auto c = conv2d_backward(both, *est.weight, channel_softmax_backward(params.w, grad_params.w));
    g_both += c.input;
    c.input = BasicTensor<T>();
    g.weight = std::move(c);
  }
  auto [gf, gfa] = concat_backward(feature.channels(), g_both);
  g.feature = std::move(gf);
  g.aligned_feature = std::move(gfa);
  return g;
}

template <typename T>
BasicTensor<T> outer_kernel(const std::vector<T>& k_v, const std::vector<T>& k_h) {
  if (k_v.size() != k_h.size()) throw ConfigError("outer_kernel: 1D kernels differ in length");
  const int n = static_cast<int>(k_v.size());
  BasicTensor<T> k({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) k[static_cast<std::size_t>(i) * n + j] = k_v[i] * k_h[j];
  return k;
}

namespace {

template <typename T>
void require_finite_params(const ScfParams<T>& p) {
  require_finite(p.k_v, "SCF k_v");
  require_finite(p.k_h, "SCF k_h");
  require_finite(p.p_x, "SCF p_x");
  require_finite(p.p_y, "SCF p_y");
  require_finite(p.w, "SCF w");
}

template <typename T>
void check_image(const BasicTensor<T>& image, const ScfParams<T>& p) {
  p.validate();
  if (image.ndim() != 3 || image.height() != p.height() || image.width() != p.width()) {
    throw ConfigError("scf_filter: image " + shape_str(image.shape()) + " does not match parameters at " +
                      std::to_string(p.height()) + "x" + std::to_string(p.width()));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> scf_filter(const BasicTensor<T>& image, const ScfParams<T>& params) {
  check_image(image, params);
  require_finite_params(params);
  const TapGrid grid(params.n);
  const int C = image.channels(), H = image.height(), W = image.width();
  const std::size_t hw = image.plane();
  const int taps = grid.taps();
  BasicTensor<T> out(image.shape());
  const T* src = image.data().data();
#pragma omp parallel for schedule(static)
  for (int b = 0; b < H; ++b) {
    std::vector<T> acc(static_cast<std::size_t>(C));
    for (int a = 0; a < W; ++a) {
      const std::size_t p = static_cast<std::size_t>(b) * W + a;
      std::fill(acc.begin(), acc.end(), T(0));
      for (int t = 0; t < taps; ++t) {
        const T coef = params.w[t * hw + p] * params.k_v[grid.row(t) * hw + p] * params.k_h[grid.col(t) * hw + p];
        const auto tap = BilinearTap<T>::make(static_cast<T>(a + grid.base_dx(t)) + params.p_x[t * hw + p],
                                              static_cast<T>(b + grid.base_dy(t)) + params.p_y[t * hw + p], H, W);
        for (int c = 0; c < C; ++c) acc[c] += coef * tap.sample(src + c * hw, W);
      }
      for (int c = 0; c < C; ++c) out[c * hw + p] = acc[c];
    }
  }
  return out;
}

template <typename T>
FilterGrads<T> scf_filter_backward(const BasicTensor<T>& image, const ScfParams<T>& params,
                                   const BasicTensor<T>& grad_out) {
  check_image(image, params);
  image.require_same_shape(grad_out, "scf_filter_backward");
  const TapGrid grid(params.n);
  const int C = image.channels(), H = image.height(), W = image.width();
  const std::size_t hw = image.plane();
  const int taps = grid.taps();
  FilterGrads<T> g;
  g.image = BasicTensor<T>(image.shape());
  g.params = {params.n,
              BasicTensor<T>(params.k_v.shape()),
              BasicTensor<T>(params.k_h.shape()),
              BasicTensor<T>(params.p_x.shape()),
              BasicTensor<T>(params.p_y.shape()),
              BasicTensor<T>(params.w.shape())};
  const T* src = image.data().data();
  T* gimg = g.image.data().data();
  std::vector<T> go(static_cast<std::size_t>(C));
  for (int b = 0; b < H; ++b) {
    for (int a = 0; a < W; ++a) {
      const std::size_t p = static_cast<std::size_t>(b) * W + a;
      for (int c = 0; c < C; ++c) go[c] = grad_out[c * hw + p];
      for (int t = 0; t < taps; ++t) {
        const int i = grid.row(t), j = grid.col(t);
        const T w = params.w[t * hw + p];
        const T kv = params.k_v[i * hw + p];
        const T kh = params.k_h[j * hw + p];
        const T coef = w * kv * kh;
        const auto tap = BilinearTap<T>::make(static_cast<T>(a + grid.base_dx(t)) + params.p_x[t * hw + p],
                                              static_cast<T>(b + grid.base_dy(t)) + params.p_y[t * hw + p], H, W);
        T g_coef = 0, gx = 0, gy = 0;
        for (int c = 0; c < C; ++c) {
          T v, dx, dy;
          tap.sample_and_grads(src + c * hw, W, v, dx, dy);
          g_coef += go[c] * v;
          gx += go[c] * dx;
          gy += go[c] * dy;
          tap.scatter(gimg + c * hw, W, coef * go[c]);
        }
        g.params.w[t * hw + p] += g_coef * kv * kh;
        g.params.k_v[i * hw + p] += g_coef * w * kh;
        g.params.k_h[j * hw + p] += g_coef * w * kv;
        g.params.p_x[t * hw + p] += coef * gx;
        g.params.p_y[t * hw + p] += coef * gy;
      }
    }
  }
  return g;
}

namespace {

// Clamped bilinear interpolation, written independently of BilinearTap.
double interpolate(const Tensor64& img, int c, double x, double y) {
  const int H = img.height(), W = img.width();
  x = std::min(std::max(x, 0.0), static_cast<double>(W - 1));
  y = std::min(std::max(y, 0.0), static_cast<double>(H - 1));
  const int xl = static_cast<int>(std::floor(x)), yl = static_cast<int>(std::floor(y));
  const int xh = xl < W - 1 ? xl + 1 : xl, yh = yl < H - 1 ? yl + 1 : yl;
  const double ax = x - xl, ay = y - yl;
  return img(c, yl, xl) * (1 - ax) * (1 - ay) + img(c, yl, xh) * ax * (1 - ay) + img(c, yh, xl) * (1 - ax) * ay +
         img(c, yh, xh) * ax * ay;
}

}  // namespace

Tensor64 scf_filter_bruteforce(const Tensor64& image, const ScfParams<double>& params) {
  check_image(image, params);
  require_finite_params(params);
  const int n = params.n, r = n / 2;
  const int C = image.channels(), H = image.height(), W = image.width();
  Tensor64 out(image.shape());
  std::vector<double> kv(static_cast<std::size_t>(n)), kh(static_cast<std::size_t>(n));
  for (int b = 0; b < H; ++b) {
    for (int a = 0; a < W; ++a) {
      for (int i = 0; i < n; ++i) {
        kv[i] = params.k_v(i, b, a);
        kh[i] = params.k_h(i, b, a);
      }
      const Tensor64 kernel = outer_kernel(kv, kh);
      for (int c = 0; c < C; ++c) {
        double sum = 0;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            const int t = i * n + j;
            const double sx = a + (j - r) + params.p_x(t, b, a);
            const double sy = b + (i - r) + params.p_y(t, b, a);
            sum += params.w(t, b, a) * kernel[static_cast<std::size_t>(i) * n + j] * interpolate(image, c, sx, sy);
          }
        }
        out(c, b, a) = sum;
      }
    }
  }
  return out;
}

template <typename T>
std::vector<TapInfo> taps_at(const ScfParams<T>& params, int x, int y) {
  params.validate();
  if (x < 0 || y < 0 || x >= params.width() || y >= params.height()) {
    throw InputError("tap position (" + std::to_string(x) + "," + std::to_string(y) + ") outside " +
                     std::to_string(params.width()) + "x" + std::to_string(params.height()));
  }
  const TapGrid grid(params.n);
  std::vector<TapInfo> out;
  for (int t = 0; t < grid.taps(); ++t) {
    TapInfo info;
    info.tap = t;
    info.dx = grid.base_dx(t) + static_cast<double>(params.p_x(t, y, x));
    info.dy = grid.base_dy(t) + static_cast<double>(params.p_y(t, y, x));
    info.coefficient = static_cast<double>(params.w(t, y, x)) * params.k_v(grid.row(t), y, x) *
                       params.k_h(grid.col(t), y, x);
    out.push_back(info);
  }
  return out;
}

template <typename T>
ScfParams<T> identity_params(int n, int height, int width) {
  const TapGrid grid(n);
  ScfParams<T> p{n,
                 BasicTensor<T>({n, height, width}),
                 BasicTensor<T>({n, height, width}),
                 BasicTensor<T>({grid.taps(), height, width}),
                 BasicTensor<T>({grid.taps(), height, width}),
                 BasicTensor<T>({grid.taps(), height, width})};
  const int center = n / 2;
  const int center_tap = center * n + center;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      p.k_v(center, y, x) = T(1);
      p.k_h(center, y, x) = T(1);
      p.w(center_tap, y, x) = T(1);
    }
  }
  return p;
}

#define MISC_INSTANTIATE_SCF(T)                                                                                  \
  template struct ScfParams<T>;                                                                                  \
  template ScfParams<T> estimate_params(const BasicTensor<T>&, const BasicTensor<T>&, const Estimators<T>&, int); \
  template EstimateGrads<T> estimate_params_backward(const BasicTensor<T>&, const BasicTensor<T>&,               \
                                                     const Estimators<T>&, const ScfParams<T>&,                  \
                                                     const ScfParams<T>&);                                        \
  template BasicTensor<T> outer_kernel(const std::vector<T>&, const std::vector<T>&);                            \
  template BasicTensor<T> scf_filter(const BasicTensor<T>&, const ScfParams<T>&);                                \
  template FilterGrads<T> scf_filter_backward(const BasicTensor<T>&, const ScfParams<T>&, const BasicTensor<T>&); \
  template std::vector<TapInfo> taps_at(const ScfParams<T>&, int, int);                                          \
  template ScfParams<T> identity_params(int, int, int);

MISC_INSTANTIATE_SCF(float)
MISC_INSTANTIATE_SCF(double)

}  // namespace misc::scf
