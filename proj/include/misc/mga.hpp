#pragma once

// Motion-guided alignment: a one-layer flow estimator and a one-layer mask
// estimator read the feature map; the image and the feature are then warped
// along +flow and -flow and blended by the mask. One (flow, mask) pair drives
// both tensors.

#include "misc/ops.hpp"

namespace misc::mga {

inline constexpr double kDefaultMaxFlow = 16.0;

// Per-pixel displacement in pixels; channel 0 is x, channel 1 is y.
template <typename T>
struct MotionField {
  BasicTensor<T> offsets;  // 2 x H x W
};

// Blend weight of the +flow warp; strictly inside (0, 1) when produced by
// estimate_mask.
template <typename T>
struct BlendMask {
  BasicTensor<T> weights;  // 1 x H x W
};

// flow = max_flow * tanh(conv(F) / max_flow)
template <typename T>
MotionField<T> estimate_flow(const BasicTensor<T>& feature, const ConvParams<T>& flow_est, T max_flow);

template <typename T>
BlendMask<T> estimate_mask(const BasicTensor<T>& feature, const ConvParams<T>& mask_est);

// Backward warp: out(c, y, x) = sample(X[c], x + sign*o_x(y, x), y + sign*o_y(y, x)).
template <typename T>
BasicTensor<T> warp(const MotionField<T>& flow, const BasicTensor<T>& x, int sign = 1);

template <typename T>
struct WarpGrads {
  BasicTensor<T> flow;   // 2 x H x W, w.r.t. the unsigned flow argument
  BasicTensor<T> input;
};

template <typename T>
WarpGrads<T> warp_backward(const MotionField<T>& flow, const BasicTensor<T>& x, const BasicTensor<T>& grad_out,
                           int sign = 1);

// mask * warp(+flow, X) + (1 - mask) * warp(-flow, X), evaluated as a lerp so
// that equal warps return the warp bit-exactly.
template <typename T>
BasicTensor<T> bidirectional_warp(const MotionField<T>& flow, const BlendMask<T>& mask, const BasicTensor<T>& x);

template <typename T>
struct BlendGrads {
  BasicTensor<T> flow;
  BasicTensor<T> mask;
  BasicTensor<T> input;
};

template <typename T>
BlendGrads<T> bidirectional_warp_backward(const MotionField<T>& flow, const BlendMask<T>& mask,
                                          const BasicTensor<T>& x, const BasicTensor<T>& grad_out);

template <typename T>
struct AlignResult {
  MotionField<T> flow;
  BlendMask<T> mask;
  BasicTensor<T> image;    // I'
  BasicTensor<T> feature;  // F'
};

// Aligns with an externally supplied flow and mask.
template <typename T>
AlignResult<T> align_with(const MotionField<T>& flow, const BlendMask<T>& mask, const BasicTensor<T>& image,
                          const BasicTensor<T>& feature);

// Full alignment: estimate flow and mask from `feature`, then align both inputs.
template <typename T>
AlignResult<T> mga_align(const BasicTensor<T>& image, const BasicTensor<T>& feature, const ConvParams<T>& flow_est,
                         const ConvParams<T>& mask_est, T max_flow);

template <typename T>
struct AlignGrads {
  BasicTensor<T> image;
  BasicTensor<T> feature;  // includes the path through the estimators
  Conv2dGrads<T> flow_est;  // .input left empty; folded into `feature`
  Conv2dGrads<T> mask_est;
};

template <typename T>
AlignGrads<T> mga_align_backward(const BasicTensor<T>& image, const BasicTensor<T>& feature,
                                 const ConvParams<T>& flow_est, const ConvParams<T>& mask_est, T max_flow,
                                 const AlignResult<T>& forward, const BasicTensor<T>& grad_image,
                                 const BasicTensor<T>& grad_feature);

}  // namespace misc::mga
