#include "misc/verify/gradcheck_suite.hpp"

#include <algorithm>

#include "misc/mga.hpp"
#include "misc/model.hpp"
#include "misc/scf.hpp"
#include "misc/train.hpp"

namespace misc::verify {

namespace {

using Inputs = std::vector<Tensor64>;

Tensor64 random(Rng& rng, Shape shape, double lo = -1, double hi = 1) {
  Tensor64 t(std::move(shape));
  for (auto& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

// Concatenates along channels after viewing each tensor as C x H x W.
Tensor64 stack(const std::vector<const Tensor64*>& parts) {
  Tensor64 out;
  for (const auto* p : parts) out = concat(out, *p);
  return out;
}

constexpr double kMaxFlow = 4.0;

}  // namespace

std::vector<GradcheckCase> op_cases() {
  std::vector<GradcheckCase> cases;

  cases.push_back({{"conv2d",
                    [](const Inputs& in) { return conv2d(in[0], in[1], in[2]); },
                    [](const Inputs& in, const Tensor64& g) {
                      auto r = conv2d_backward(in[0], in[1], g, true);
                      return Inputs{r.input, r.weight, r.bias};
                    }},
                   [](Rng& rng) {
                     return Inputs{random(rng, {3, 5, 6}), random(rng, {2, 3, 3, 3}), random(rng, {2})};
                   }});

  cases.push_back({{"sigmoid", [](const Inputs& in) { return sigmoid(in[0]); },
                    [](const Inputs& in, const Tensor64& g) { return Inputs{sigmoid_backward(sigmoid(in[0]), g)}; }},
                   [](Rng& rng) { return Inputs{random(rng, {2, 4, 4}, -4, 4)}; }});

  cases.push_back({{"tanh_clamp", [](const Inputs& in) { return tanh_clamp(in[0], kMaxFlow); },
                    [](const Inputs& in, const Tensor64& g) {
                      return Inputs{tanh_clamp_backward(tanh_clamp(in[0], kMaxFlow), kMaxFlow, g)};
                    }},
                   [](Rng& rng) { return Inputs{random(rng, {2, 4, 4}, -10, 10)}; }});

  cases.push_back({{"leaky_relu", [](const Inputs& in) { return leaky_relu(in[0], 0.1); },
                    [](const Inputs& in, const Tensor64& g) { return Inputs{leaky_relu_backward(in[0], 0.1, g)}; }},
                   [](Rng& rng) { return Inputs{random(rng, {2, 4, 4})}; }});

  cases.push_back({{"channel_softmax", [](const Inputs& in) { return channel_softmax(in[0]); },
                    [](const Inputs& in, const Tensor64& g) {
                      return Inputs{channel_softmax_backward(channel_softmax(in[0]), g)};
                    }},
                   [](Rng& rng) { return Inputs{random(rng, {5, 3, 4}, -3, 3)}; }});

  cases.push_back({{"concat", [](const Inputs& in) { return concat(in[0], in[1]); },
                    [](const Inputs& in, const Tensor64& g) {
                      auto [a, b] = concat_backward(in[0].channels(), g);
                      return Inputs{a, b};
                    }},
                   [](Rng& rng) { return Inputs{random(rng, {2, 3, 3}), random(rng, {3, 3, 3})}; }});

  cases.push_back({{"avg_pool2", [](const Inputs& in) { return avg_pool2(in[0]); },
                    [](const Inputs&, const Tensor64& g) { return Inputs{avg_pool2_backward(g)}; }},
                   [](Rng& rng) { return Inputs{random(rng, {2, 4, 6})}; }});

  cases.push_back({{"upsample_nearest2", [](const Inputs& in) { return upsample_nearest2(in[0]); },
                    [](const Inputs&, const Tensor64& g) { return Inputs{upsample_nearest2_backward(g)}; }},
                   [](Rng& rng) { return Inputs{random(rng, {2, 3, 2})}; }});

  cases.push_back({{"bilinear_sample",
                    [](const Inputs& in) {
                      const auto v = bilinear_sample(in[0], in[1][0], in[1][1]);
                      return Tensor64({static_cast<int>(v.size())}, v);
                    },
                    [](const Inputs& in, const Tensor64& g) {
                      const auto r = bilinear_sample_backward(in[0], in[1][0], in[1][1],
                                                              std::vector<double>(g.data().begin(), g.data().end()));
                      return Inputs{r.img, Tensor64({2}, std::vector<double>{r.x, r.y})};
                    }},
                   [](Rng& rng) {
                     return Inputs{random(rng, {3, 5, 6}),
                                   Tensor64({2}, std::vector<double>{uniform(rng, 0.1, 4.9), uniform(rng, 0.1, 3.9)})};
                   }});

  cases.push_back({{"warp",
                    [](const Inputs& in) { return mga::warp(mga::MotionField<double>{in[1]}, in[0], 1); },
                    [](const Inputs& in, const Tensor64& g) {
                      auto r = mga::warp_backward(mga::MotionField<double>{in[1]}, in[0], g, 1);
                      return Inputs{r.input, r.flow};
                    }},
                   [](Rng& rng) { return Inputs{random(rng, {3, 6, 6}), random(rng, {2, 6, 6}, -2.5, 2.5)}; }});

  cases.push_back({{"bidirectional_warp",
                    [](const Inputs& in) {
                      return mga::bidirectional_warp(mga::MotionField<double>{in[1]}, mga::BlendMask<double>{in[2]},
                                                     in[0]);
                    },
                    [](const Inputs& in, const Tensor64& g) {
                      auto r = mga::bidirectional_warp_backward(mga::MotionField<double>{in[1]},
                                                                mga::BlendMask<double>{in[2]}, in[0], g);
                      return Inputs{r.input, r.flow, r.mask};
                    }},
                   [](Rng& rng) {
                     return Inputs{random(rng, {3, 6, 6}), random(rng, {2, 6, 6}, -2.5, 2.5),
                                   random(rng, {1, 6, 6}, 0.05, 0.95)};
                   }});

  // Inputs: image, feature, flow weight, flow bias, mask weight, mask bias.
  cases.push_back({{"mga_align",
                    [](const Inputs& in) {
                      const auto r = mga::mga_align(in[0], in[1], ConvParams<double>{in[2], in[3]},
                                                    ConvParams<double>{in[4], in[5]}, kMaxFlow);
                      return concat(r.image, r.feature);
                    },
                    [](const Inputs& in, const Tensor64& g) {
                      const ConvParams<double> ef{in[2], in[3]}, em{in[4], in[5]};
                      const auto fwd = mga::mga_align(in[0], in[1], ef, em, kMaxFlow);
                      auto [gi, gf] = concat_backward(3, g);
                      auto r = mga::mga_align_backward(in[0], in[1], ef, em, kMaxFlow, fwd, gi, gf);
                      return Inputs{r.image,          r.feature,          r.flow_est.weight,
                                    r.flow_est.bias,  r.mask_est.weight,  r.mask_est.bias};
                    }},
                   [](Rng& rng) {
                     return Inputs{random(rng, {3, 6, 6}),       random(rng, {2, 6, 6}),    random(rng, {2, 2, 3, 3}),
                                   random(rng, {2}, -0.5, 0.5),  random(rng, {1, 2, 3, 3}), random(rng, {1})};
                   }});

  // Inputs: F, F', then weight/bias of the kernel, offset and weight estimators.
  cases.push_back({{"estimate_params",
                    [](const Inputs& in) {
                      const ConvParams<double> ek{in[2], in[3]}, eo{in[4], in[5]}, ew{in[6], in[7]};
                      const auto p = scf::estimate_params(in[0], in[1], scf::Estimators<double>{&ek, &eo, &ew}, 3);
                      return stack({&p.k_v, &p.k_h, &p.p_x, &p.p_y, &p.w});
                    },
                    [](const Inputs& in, const Tensor64& g) {
                      const ConvParams<double> ek{in[2], in[3]}, eo{in[4], in[5]}, ew{in[6], in[7]};
                      const scf::Estimators<double> est{&ek, &eo, &ew};
                      const auto p = scf::estimate_params(in[0], in[1], est, 3);
                      scf::ScfParams<double> gp{3,
                                                slice_channels(g, 0, 3),
                                                slice_channels(g, 3, 3),
                                                slice_channels(g, 6, 9),
                                                slice_channels(g, 15, 9),
                                                slice_channels(g, 24, 9)};
                      auto r = scf::estimate_params_backward(in[0], in[1], est, p, gp);
                      return Inputs{r.feature,      r.aligned_feature, r.kernel->weight, r.kernel->bias,
                                    r.offset->weight, r.offset->bias,  r.weight->weight, r.weight->bias};
                    }},
                   [](Rng& rng) {
                     return Inputs{random(rng, {2, 4, 4}),    random(rng, {2, 4, 4}), random(rng, {6, 4, 1, 1}),
                                   random(rng, {6}),          random(rng, {18, 4, 1, 1}), random(rng, {18}),
                                   random(rng, {9, 4, 1, 1}), random(rng, {9})};
                   }});

  // Inputs: image, k_v, k_h, p_x, p_y, w (w need not be normalized here).
  cases.push_back({{"scf_filter",
                    [](const Inputs& in) {
                      return scf::scf_filter(in[0], scf::ScfParams<double>{3, in[1], in[2], in[3], in[4], in[5]});
                    },
                    [](const Inputs& in, const Tensor64& g) {
                      auto r = scf::scf_filter_backward(in[0], scf::ScfParams<double>{3, in[1], in[2], in[3], in[4], in[5]},
                                                        g);
                      return Inputs{r.image, r.params.k_v, r.params.k_h, r.params.p_x, r.params.p_y, r.params.w};
                    }},
                   [](Rng& rng) {
                     return Inputs{random(rng, {3, 8, 8}),          random(rng, {3, 8, 8}),
                                   random(rng, {3, 8, 8}),          random(rng, {9, 8, 8}, -1.5, 1.5),
                                   random(rng, {9, 8, 8}, -1.5, 1.5), random(rng, {9, 8, 8}, 0, 0.3)};
                   }});

  // Inputs: full prediction, half prediction, full target, half target.
  cases.push_back({{"multiscale_loss",
                    [](const Inputs& in) {
                      const train::TrainConfig cfg;
                      const double v = cfg.weight_full * train::charbonnier(in[0], in[2], cfg.charbonnier_eps) +
                                       cfg.weight_half * train::charbonnier(in[1], in[3], cfg.charbonnier_eps);
                      return Tensor64({1}, v);
                    },
                    [](const Inputs& in, const Tensor64& g) {
                      const train::TrainConfig cfg;
                      Tensor64 gf, gh, gtf, gth;
                      train::charbonnier(in[0], in[2], cfg.charbonnier_eps, &gf);
                      train::charbonnier(in[1], in[3], cfg.charbonnier_eps, &gh);
                      train::charbonnier(in[2], in[0], cfg.charbonnier_eps, &gtf);
                      train::charbonnier(in[3], in[1], cfg.charbonnier_eps, &gth);
                      gf *= g[0] * cfg.weight_full;
                      gh *= g[0] * cfg.weight_half;
                      gtf *= g[0] * cfg.weight_full;
                      gth *= g[0] * cfg.weight_half;
                      return Inputs{gf, gh, gtf, gth};
                    }},
                   [](Rng& rng) {
                     return Inputs{random(rng, {3, 4, 4}, 0, 1), random(rng, {3, 2, 2}, 0, 1),
                                   random(rng, {3, 4, 4}, 0, 1), random(rng, {3, 2, 2}, 0, 1)};
                   }});

  return cases;
}

GradcheckCase model_case() {
  model::NetworkConfig net;
  net.base_channels = 4;
  net.depth = 1;
  net.kernel_size = 3;
  const auto names = [net] {
    std::vector<std::string> out;
    for (const auto& [k, v] : model::build_model(net, {}, 0).params) out.push_back(k);
    return out;
  }();
  const auto state_from = [net, names](const Inputs& in) {
    auto s = model::build_model(net, {}, 0).cast<double>();
    for (std::size_t i = 0; i < names.size(); ++i) s.params.at(names[i]) = in[i + 2];
    return s;
  };

  GradcheckCase c;
  c.tolerance = 1e-2;
  c.skip_inputs = {0, 1};
  // Inputs: blurred image, sharp target, then every parameter in name order.
  c.op.name = "model_end_to_end";
  c.op.forward = [state_from](const Inputs& in) {
    const auto s = state_from(in);
    const auto r = model::forward(s, in[0]);
    const train::TrainConfig cfg;
    const double v = cfg.weight_full * train::charbonnier(r.output, in[1], cfg.charbonnier_eps) +
                     cfg.weight_half * train::charbonnier(r.output_half, avg_pool2(in[1]), cfg.charbonnier_eps);
    return Tensor64({1}, v);
  };
  c.op.backward = [state_from, names](const Inputs& in, const Tensor64& g) {
    const auto s = state_from(in);
    model::ForwardPass<double> fp(s, in[0]);
    const train::TrainConfig cfg;
    Tensor64 gf, gh;
    train::charbonnier(fp.result().output, in[1], cfg.charbonnier_eps, &gf);
    train::charbonnier(fp.result().output_half, avg_pool2(in[1]), cfg.charbonnier_eps, &gh);
    gf *= g[0] * cfg.weight_full;
    gh *= g[0] * cfg.weight_half;
    model::ParamMap<double> grads;
    fp.backward(gf, gh, grads);
    Inputs out{Tensor64(in[0].shape()), Tensor64(in[1].shape())};
    for (const auto& n : names) {
      const auto it = grads.find(n);
      out.push_back(it == grads.end() ? Tensor64(s.params.at(n).shape()) : it->second);
    }
    return out;
  };
  c.make_inputs = [net, names](Rng& rng) {
    const auto s = model::build_model(net, {}, 0);
    Inputs in{random(rng, {3, 8, 8}, 0, 1), random(rng, {3, 8, 8}, 0, 1)};
    // Random values everywhere so zero-initialized heads carry gradient too.
    for (const auto& n : names) in.push_back(random(rng, s.params.at(n).shape(), -0.4, 0.4));
    return in;
  };
  return c;
}

CaseResult run_case(const GradcheckCase& c, int instances, std::uint64_t seed) {
  CaseResult res{c.op.name, 0, true, {}};
  for (int i = 0; i < instances; ++i) {
    auto rng = make_rng(seed, "gradcheck:" + c.op.name + ":" + std::to_string(i));
    const auto inputs = c.make_inputs(rng);
    GradcheckOptions opt;
    opt.tolerance = c.tolerance;
    opt.seed = derive_seed(seed, "projection:" + c.op.name + ":" + std::to_string(i));
    opt.skip_inputs = c.skip_inputs;
    try {
      const auto rep = gradcheck(c.op, inputs, opt);
      res.worst_relative = std::max(res.worst_relative, rep.max_relative);
      res.passed = res.passed && rep.passed;
    } catch (const std::exception& e) {
      res.passed = false;
      res.error = e.what();
      break;
    }
  }
  return res;
}

}  // namespace misc::verify
