#include "misc/mga.hpp"

#include <cmath>

namespace misc::mga {

namespace {

template <typename T>
void check_flow(const MotionField<T>& flow, const BasicTensor<T>& x, const char* what) {
  const auto& o = flow.offsets;
  if (o.ndim() != 3 || o.channels() != 2) {
    throw ConfigError(std::string(what) + ": flow must be 2 x H x W, got " + shape_str(o.shape()));
  }
  if (x.ndim() != 3 || x.height() != o.height() || x.width() != o.width()) {
    throw ConfigError(std::string(what) + ": input " + shape_str(x.shape()) + " does not match flow " +
                      shape_str(o.shape()));
  }
}

template <typename T>
void check_mask(const BlendMask<T>& mask, const MotionField<T>& flow, const char* what) {
  const auto& m = mask.weights;
  if (m.ndim() != 3 || m.channels() != 1 || m.height() != flow.offsets.height() ||
      m.width() != flow.offsets.width()) {
    throw ConfigError(std::string(what) + ": mask shape " + shape_str(m.shape()));
  }
}

}  // namespace

template <typename T>
MotionField<T> estimate_flow(const BasicTensor<T>& feature, const ConvParams<T>& flow_est, T max_flow) {
  if (flow_est.out_channels() != 2) throw ConfigError("estimate_flow: estimator must have 2 output channels");
  if (!(max_flow > T(0))) throw ConfigError("estimate_flow: max_flow must be positive");
  return {tanh_clamp(conv2d(feature, flow_est), max_flow)};
}

template <typename T>
BlendMask<T> estimate_mask(const BasicTensor<T>& feature, const ConvParams<T>& mask_est) {
  if (mask_est.out_channels() != 1) throw ConfigError("estimate_mask: estimator must have 1 output channel");
  return {sigmoid(conv2d(feature, mask_est))};
}

template <typename T>
BasicTensor<T> warp(const MotionField<T>& flow, const BasicTensor<T>& x, int sign) {
  check_flow(flow, x, "warp");
  const int C = x.channels(), H = x.height(), W = x.width();
  const std::size_t hw = x.plane();
  const T s = static_cast<T>(sign);
  const T* ox = flow.offsets.channel(0).data();
  const T* oy = flow.offsets.channel(1).data();
  BasicTensor<T> out(x.shape());
#pragma omp parallel for schedule(static)
  for (int yy = 0; yy < H; ++yy) {
    for (int xx = 0; xx < W; ++xx) {
      const std::size_t p = static_cast<std::size_t>(yy) * W + xx;
      const auto tap = BilinearTap<T>::make(static_cast<T>(xx) + s * ox[p], static_cast<T>(yy) + s * oy[p], H, W);
      for (int c = 0; c < C; ++c) out[c * hw + p] = tap.sample(x.data().data() + c * hw, W);
    }
  }
  return out;
}

template <typename T>
WarpGrads<T> warp_backward(const MotionField<T>& flow, const BasicTensor<T>& x, const BasicTensor<T>& grad_out,
                           int sign) {
  check_flow(flow, x, "warp_backward");
  x.require_same_shape(grad_out, "warp_backward");
  const int C = x.channels(), H = x.height(), W = x.width();
  const std::size_t hw = x.plane();
  const T s = static_cast<T>(sign);
  const T* ox = flow.offsets.channel(0).data();
  const T* oy = flow.offsets.channel(1).data();
  WarpGrads<T> g{BasicTensor<T>(flow.offsets.shape()), BasicTensor<T>(x.shape())};
  for (int yy = 0; yy < H; ++yy) {
    for (int xx = 0; xx < W; ++xx) {
      const std::size_t p = static_cast<std::size_t>(yy) * W + xx;
      const auto tap = BilinearTap<T>::make(static_cast<T>(xx) + s * ox[p], static_cast<T>(yy) + s * oy[p], H, W);
      T gx = 0, gy = 0;
      for (int c = 0; c < C; ++c) {
        const T go = grad_out[c * hw + p];
        T v, dx, dy;
        tap.sample_and_grads(x.data().data() + c * hw, W, v, dx, dy);
        tap.scatter(g.input.data().data() + c * hw, W, go);
        gx += go * dx;
        gy += go * dy;
      }
      g.flow[p] = s * gx;
      g.flow[hw + p] = s * gy;
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> bidirectional_warp(const MotionField<T>& flow, const BlendMask<T>& mask, const BasicTensor<T>& x) {
  check_mask(mask, flow, "bidirectional_warp");
  const auto fwd = warp(flow, x, +1);
  const auto bwd = warp(flow, x, -1);
  const std::size_t hw = x.plane();
  BasicTensor<T> out(x.shape());
  for (int c = 0; c < x.channels(); ++c) {
    for (std::size_t p = 0; p < hw; ++p) {
      out[c * hw + p] = std::lerp(bwd[c * hw + p], fwd[c * hw + p], mask.weights[p]);
    }
  }
  return out;
}

template <typename T>
BlendGrads<T> bidirectional_warp_backward(const MotionField<T>& flow, const BlendMask<T>& mask,
                                          const BasicTensor<T>& x, const BasicTensor<T>& grad_out) {
  check_mask(mask, flow, "bidirectional_warp_backward");
  const auto fwd = warp(flow, x, +1);
  const auto bwd = warp(flow, x, -1);
  const std::size_t hw = x.plane();
  BasicTensor<T> g_fwd(x.shape()), g_bwd(x.shape());
  BlendGrads<T> g;
  g.mask = BasicTensor<T>(mask.weights.shape());
  for (int c = 0; c < x.channels(); ++c) {
    for (std::size_t p = 0; p < hw; ++p) {
      const std::size_t i = c * hw + p;
      const T m = mask.weights[p];
      g_fwd[i] = grad_out[i] * m;
      g_bwd[i] = grad_out[i] * (T(1) - m);
      g.mask[p] += grad_out[i] * (fwd[i] - bwd[i]);
    }
  }
  auto wf = warp_backward(flow, x, g_fwd, +1);
  auto wb = warp_backward(flow, x, g_bwd, -1);
  g.flow = std::move(wf.flow);
  g.flow += wb.flow;
  g.input = std::move(wf.input);
  g.input += wb.input;
  return g;
}

template <typename T>
AlignResult<T> align_with(const MotionField<T>& flow, const BlendMask<T>& mask, const BasicTensor<T>& image,
                          const BasicTensor<T>& feature) {
  AlignResult<T> r{flow, mask, bidirectional_warp(flow, mask, image), BasicTensor<T>()};
  if (!feature.empty()) r.feature = bidirectional_warp(flow, mask, feature);
  return r;
}

template <typename T>
AlignResult<T> mga_align(const BasicTensor<T>& image, const BasicTensor<T>& feature, const ConvParams<T>& flow_est,
                         const ConvParams<T>& mask_est, T max_flow) {
  auto flow = estimate_flow(feature, flow_est, max_flow);
  auto mask = estimate_mask(feature, mask_est);
  return align_with(flow, mask, image, feature);
}

template <typename T>
AlignGrads<T> mga_align_backward(const BasicTensor<T>& image, const BasicTensor<T>& feature,
                                 const ConvParams<T>& flow_est, const ConvParams<T>& mask_est, T max_flow,
                                 const AlignResult<T>& forward, const BasicTensor<T>& grad_image,
                                 const BasicTensor<T>& grad_feature) {
  auto gi = bidirectional_warp_backward(forward.flow, forward.mask, image, grad_image);
  AlignGrads<T> g;
  g.image = std::move(gi.input);
  BasicTensor<T> g_flow = std::move(gi.flow);
  BasicTensor<T> g_mask = std::move(gi.mask);
  BasicTensor<T> g_feat(feature.shape());
  if (!grad_feature.empty()) {
    auto gf = bidirectional_warp_backward(forward.flow, forward.mask, feature, grad_feature);
    g_flow += gf.flow;
    g_mask += gf.mask;
    g_feat = std::move(gf.input);
  }
  const auto g_flow_raw = tanh_clamp_backward(forward.flow.offsets, max_flow, g_flow);
  const auto g_mask_raw = sigmoid_backward(forward.mask.weights, g_mask);
  g.flow_est = conv2d_backward(feature, flow_est, g_flow_raw);
  g.mask_est = conv2d_backward(feature, mask_est, g_mask_raw);
  g_feat += g.flow_est.input;
  g_feat += g.mask_est.input;
  g.flow_est.input = BasicTensor<T>();
  g.mask_est.input = BasicTensor<T>();
  g.feature = std::move(g_feat);
  return g;
}

#define MISC_INSTANTIATE_MGA(T)                                                                                 \
  template MotionField<T> estimate_flow(const BasicTensor<T>&, const ConvParams<T>&, T);                        \
  template BlendMask<T> estimate_mask(const BasicTensor<T>&, const ConvParams<T>&);                             \
  template BasicTensor<T> warp(const MotionField<T>&, const BasicTensor<T>&, int);                              \
  template WarpGrads<T> warp_backward(const MotionField<T>&, const BasicTensor<T>&, const BasicTensor<T>&, int); \
  template BasicTensor<T> bidirectional_warp(const MotionField<T>&, const BlendMask<T>&, const BasicTensor<T>&); \
  template BlendGrads<T> bidirectional_warp_backward(const MotionField<T>&, const BlendMask<T>&,                 \
                                                     const BasicTensor<T>&, const BasicTensor<T>&);             \
  template AlignResult<T> align_with(const MotionField<T>&, const BlendMask<T>&, const BasicTensor<T>&,         \
                                     const BasicTensor<T>&);                                                    \
  template AlignResult<T> mga_align(const BasicTensor<T>&, const BasicTensor<T>&, const ConvParams<T>&,         \
                                    const ConvParams<T>&, T);                                                   \
  template AlignGrads<T> mga_align_backward(const BasicTensor<T>&, const BasicTensor<T>&, const ConvParams<T>&, \
                                            const ConvParams<T>&, T, const AlignResult<T>&,                     \
                                            const BasicTensor<T>&, const BasicTensor<T>&);

MISC_INSTANTIATE_MGA(float)
MISC_INSTANTIATE_MGA(double)

}  // namespace misc::mga
