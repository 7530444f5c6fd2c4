#include "misc/model.hpp"

#include <cmath>
#include <optional>

#include "misc/rng.hpp"

namespace misc::model {

namespace {

constexpr double kSlope = 0.1;

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Parallel: return "parallel";
    case Strategy::SemiParallel: return "semi-parallel";
    case Strategy::Serial: return "serial";
    case Strategy::SemiShared: return "semi-shared";
    case Strategy::Shared: return "shared";
  }
  return "?";
}

std::string to_string(Order o) { return o == Order::FilterFirst ? "filter-first" : "residual-first"; }

Strategy parse_strategy(const std::string& s) {
  for (auto v : {Strategy::Parallel, Strategy::SemiParallel, Strategy::Serial, Strategy::SemiShared, Strategy::Shared}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown coupling strategy '" + s + "'");
}

Order parse_order(const std::string& s) {
  if (s == "filter-first") return Order::FilterFirst;
  if (s == "residual-first") return Order::ResidualFirst;
  throw ConfigError("unknown order '" + s + "' (filter-first | residual-first)");
}

char CouplingConfig::group() const {
  int pair = 0;
  switch (strategy) {
    case Strategy::Parallel: pair = 0; break;
    case Strategy::SemiParallel: pair = 1; break;
    case Strategy::SemiShared: pair = 2; break;
    case Strategy::Serial: pair = 3; break;
    case Strategy::Shared: pair = 4; break;
  }
  return static_cast<char>('a' + 2 * pair + (order == Order::ResidualFirst ? 1 : 0));
}

CouplingConfig CouplingConfig::from_group(char group) {
  if (group < 'a' || group > 'j') throw ConfigError(std::string("coupling group must be a..j, got '") + group + "'");
  static constexpr Strategy kPairs[] = {Strategy::Parallel, Strategy::SemiParallel, Strategy::SemiShared,
                                        Strategy::Serial, Strategy::Shared};
  const int idx = group - 'a';
  return {kPairs[idx / 2], idx % 2 ? Order::ResidualFirst : Order::FilterFirst};
}

std::string CouplingConfig::name() const {
  return std::string("(") + group() + ") " + to_string(strategy) + "/" + to_string(order);
}

std::string Components::name() const {
  if (!filter()) return "base";
  std::string s = "base";
  if (mga) s += "+mga";
  if (kernel) s += "+kernel";
  if (weight) s += "+weight";
  if (offset) s += "+offset";
  return s;
}

void NetworkConfig::validate() const {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("kernel_size must be odd and >= 1, got " + std::to_string(kernel_size));
  }
  if (depth < 1 || depth > 6) throw ConfigError("depth must be in [1, 6], got " + std::to_string(depth));
  if (base_channels < 1) throw ConfigError("base_channels must be positive");
  if (!(max_flow > 0)) throw ConfigError("max_flow must be positive");
  if (align_kernel < 1 || align_kernel % 2 == 0 || filter_kernel < 1 || filter_kernel % 2 == 0) {
    throw ConfigError("estimator conv sizes must be odd and positive");
  }
}

template <typename T>
std::size_t BasicModelState<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params) n += v.size();
  return n;
}

template <typename T>
const BasicTensor<T>& BasicModelState<T>::param(const std::string& name) const {
  const auto it = params.find(name);
  if (it == params.end()) throw ConfigError("model has no parameter '" + name + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Construction

namespace {

enum class Init { He, Zero, GaussianBias };

// Per-tap bias n * g_i with g a normalized Gaussian, so the normalized 1D
// kernels start as a narrow low-pass close to the identity.
constexpr double kKernelInitSigma = 0.5;

class Builder {
 public:
  Builder(ModelState& state, std::uint64_t seed) : state_(state), seed_(seed) {}

  void conv(const std::string& name, int out, int in, int k, Init init) {
    Tensor w({out, in, k, k});
    Tensor b({out});
    if (init == Init::He) {
      auto rng = make_rng(seed_, "init:" + name);
      const double fan_in = static_cast<double>(in) * k * k;
      const double bound = std::sqrt(6.0 / ((1.0 + kSlope * kSlope) * fan_in));
      for (auto& v : w.data()) v = static_cast<float>(uniform(rng, -bound, bound));
    } else if (init == Init::GaussianBias) {
      const int n = out / 2;
      std::vector<double> g(n);
      double sum = 0;
      for (int i = 0; i < n; ++i) {
        const double d = i - (n - 1) / 2.0;
        g[i] = std::exp(-d * d / (2 * kKernelInitSigma * kKernelInitSigma));
        sum += g[i];
      }
      for (int i = 0; i < n; ++i) b[i] = b[n + i] = static_cast<float>(n * g[i] / sum);
    }
    state_.params.emplace(name + ".weight", std::move(w));
    state_.params.emplace(name + ".bias", std::move(b));
  }

  void encoder(const std::string& prefix, int in) {
    const auto& net = state_.net;
    conv(prefix + ".enc0a", net.channels_at(0), in, 3, Init::He);
    conv(prefix + ".enc0b", net.channels_at(0), net.channels_at(0), 3, Init::He);
    for (int l = 1; l <= net.depth; ++l) {
      conv(prefix + ".enc" + std::to_string(l), net.channels_at(l), net.channels_at(l - 1), 3, Init::He);
    }
  }

  void decoder(const std::string& prefix) {
    const auto& net = state_.net;
    for (int l = 0; l < net.depth; ++l) {
      conv(prefix + ".dec" + std::to_string(l), net.channels_at(l), net.channels_at(l + 1) + net.channels_at(l), 3,
           Init::He);
    }
  }

  void unet(const std::string& prefix, int in) {
    encoder(prefix, in);
    decoder(prefix);
  }

 private:
  ModelState& state_;
  std::uint64_t seed_;
};

}  // namespace

ModelState build_model(const NetworkConfig& net, const CouplingConfig& coupling, std::uint64_t seed) {
  net.validate();
  ModelState state{net, coupling, {}};
  Builder b(state, seed);
  const int c0 = net.channels_at(0);
  const bool filter_first = coupling.order == Order::FilterFirst;
  switch (coupling.strategy) {
    case Strategy::Parallel:
      b.unet("motion", 3);
      b.unet("residual", 3);
      break;
    case Strategy::SemiParallel:
      b.unet("motion", 3);
      b.unet("residual", 3);
      b.conv("inject", net.channels_at(net.depth), c0, 1, Init::Zero);
      break;
    case Strategy::Serial:
      b.unet("motion", filter_first ? 3 : 3 + c0);
      b.unet("residual", filter_first ? 3 + c0 : 3);
      break;
    case Strategy::SemiShared:
      b.encoder("encoder", 3);
      b.decoder("motion_decoder");
      b.decoder("residual_decoder");
      break;
    case Strategy::Shared:
      b.unet("backbone", 3);
      break;
  }
  b.conv("residual_head", 3, c0, 3, Init::Zero);
  b.conv("aux_head", 3, net.channels_at(1), 3, Init::Zero);
  const auto& comp = net.components;
  const int n = net.kernel_size, taps = n * n;
  if (comp.mga) {
    b.conv("flow_est", 2, c0, net.align_kernel, Init::Zero);
    b.conv("mask_est", 1, c0, net.align_kernel, Init::He);
  }
  if (comp.kernel) b.conv("kernel_est", 2 * n, 2 * c0, net.filter_kernel, Init::GaussianBias);
  if (comp.offset) b.conv("offset_est", 2 * taps, 2 * c0, net.filter_kernel, Init::Zero);
  if (comp.weight) b.conv("weight_est", taps, 2 * c0, net.filter_kernel, Init::Zero);
  return state;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

template <typename T>
void accumulate(ParamMap<T>& grads, const std::string& name, const BasicTensor<T>& g) {
  auto it = grads.find(name);
  if (it == grads.end()) {
    grads.emplace(name, g);
  } else {
    it->second += g;
  }
}

// Empty tensors stand for zero gradients.
template <typename T>
void add_into(BasicTensor<T>& acc, const BasicTensor<T>& g) {
  if (g.empty()) return;
  if (acc.empty()) {
    acc = g;
  } else {
    acc += g;
  }
}

template <typename T>
ConvParams<T> conv_params(const ParamMap<T>& P, const std::string& name) {
  return {P.at(name + ".weight"), P.at(name + ".bias")};
}

// conv (+ leaky ReLU) with its forward cache.
template <typename T>
struct Layer {
  std::string name;
  bool act = true;
  BasicTensor<T> input{};
  BasicTensor<T> pre{};

  explicit Layer(std::string n, bool activation = true) : name(std::move(n)), act(activation) {}

  BasicTensor<T> forward(const ParamMap<T>& P, const BasicTensor<T>& x) {
    input = x;
    pre = conv2d(x, P.at(name + ".weight"), P.at(name + ".bias"));
    return act ? leaky_relu(pre, T(kSlope)) : pre;
  }

  BasicTensor<T> backward(const ParamMap<T>& P, const BasicTensor<T>& grad_out, ParamMap<T>& G,
                          bool need_input = true) const {
    const auto g_pre = act ? leaky_relu_backward(pre, T(kSlope), grad_out) : grad_out;
    auto g = conv2d_backward(input, P.at(name + ".weight"), g_pre, need_input);
    accumulate(G, name + ".weight", g.weight);
    accumulate(G, name + ".bias", g.bias);
    return std::move(g.input);
  }
};

template <typename T>
struct Encoder {
  std::vector<Layer<T>> layers;  // enc0a, enc0b, enc1 .. encD
  std::vector<BasicTensor<T>> skips;
  BasicTensor<T> bottleneck;
  int depth = 0;

  Encoder(const std::string& prefix, int d) : depth(d) {
    layers.emplace_back(prefix + ".enc0a");
    layers.emplace_back(prefix + ".enc0b");
    for (int l = 1; l <= d; ++l) layers.emplace_back(prefix + ".enc" + std::to_string(l));
  }

  void forward(const ParamMap<T>& P, const BasicTensor<T>& x) {
    skips.clear();
    auto h = layers[0].forward(P, x);
    h = layers[1].forward(P, h);
    for (int l = 1; l <= depth; ++l) {
      skips.push_back(h);
      h = layers[static_cast<std::size_t>(l) + 1].forward(P, avg_pool2(h));
    }
    bottleneck = std::move(h);
  }

  // Returns the gradient w.r.t. the encoder input (empty unless need_input).
  BasicTensor<T> backward(const ParamMap<T>& P, const std::vector<BasicTensor<T>>& grad_skips,
                          const BasicTensor<T>& grad_bottleneck, ParamMap<T>& G, bool need_input) const {
    BasicTensor<T> g = grad_bottleneck;
    for (int l = depth; l >= 1; --l) {
      g = avg_pool2_backward(layers[static_cast<std::size_t>(l) + 1].backward(P, g, G));
      add_into(g, grad_skips[static_cast<std::size_t>(l) - 1]);
    }
    g = layers[1].backward(P, g, G);
    return layers[0].backward(P, g, G, need_input);
  }
};

template <typename T>
struct Decoder {
  std::vector<Layer<T>> layers;  // dec0 .. dec{D-1}
  std::vector<int> skip_channels;
  BasicTensor<T> full;
  BasicTensor<T> half;
  int depth = 0;

  Decoder(const std::string& prefix, int d) : depth(d) {
    for (int l = 0; l < d; ++l) layers.emplace_back(prefix + ".dec" + std::to_string(l));
  }

  void forward(const ParamMap<T>& P, const std::vector<BasicTensor<T>>& skips, const BasicTensor<T>& bottleneck) {
    BasicTensor<T> h = bottleneck;
    if (depth == 1) half = bottleneck;
    skip_channels.assign(static_cast<std::size_t>(depth), 0);
    for (int l = depth - 1; l >= 0; --l) {
      const auto& skip = skips[static_cast<std::size_t>(l)];
      skip_channels[static_cast<std::size_t>(l)] = skip.channels();
      h = layers[static_cast<std::size_t>(l)].forward(P, concat(upsample_nearest2(h), skip));
      if (l == 1) half = h;
    }
    full = std::move(h);
  }

  // Produces gradients for the skips and the bottleneck.
  void backward(const ParamMap<T>& P, const BasicTensor<T>& grad_full, const BasicTensor<T>& grad_half,
                ParamMap<T>& G, std::vector<BasicTensor<T>>& grad_skips, BasicTensor<T>& grad_bottleneck) const {
    grad_skips.assign(static_cast<std::size_t>(depth), BasicTensor<T>());
    BasicTensor<T> g = grad_full;
    if (g.empty()) g = BasicTensor<T>(full.shape());
    for (int l = 0; l < depth; ++l) {
      const auto& layer = layers[static_cast<std::size_t>(l)];
      const auto g_cat = layer.backward(P, g, G);
      const int up_channels = g_cat.channels() - skip_channels[static_cast<std::size_t>(l)];
      auto [g_up, g_skip] = concat_backward(up_channels, g_cat);
      grad_skips[static_cast<std::size_t>(l)] = std::move(g_skip);
      g = upsample_nearest2_backward(g_up);
      if (l == 0) add_into(g, grad_half);
    }
    grad_bottleneck = std::move(g);
  }
};

template <typename T>
BasicTensor<T> pool_times(BasicTensor<T> x, int times) {
  for (int i = 0; i < times; ++i) x = avg_pool2(x);
  return x;
}

template <typename T>
BasicTensor<T> pool_times_backward(BasicTensor<T> g, int times) {
  for (int i = 0; i < times; ++i) g = avg_pool2_backward(g);
  return g;
}

}  // namespace

template <typename T>
struct ForwardPass<T>::Impl {
  const BasicModelState<T>* state = nullptr;
  BasicTensor<T> input;

  // Backbone pieces; which exist depends on the strategy.
  std::optional<Encoder<T>> enc_motion, enc_residual;
  std::optional<Decoder<T>> dec_motion, dec_residual;
  Layer<T> inject{"inject", false};
  BasicTensor<T> inject_source_pooled;
  Layer<T> residual_head{"residual_head", false};
  Layer<T> aux_head{"aux_head", false};

  BasicTensor<T> feature_motion;    // F
  BasicTensor<T> feature_residual;  // G
  BasicTensor<T> feature_half;

  BasicTensor<T> filter_input;  // X
  std::optional<mga::AlignResult<T>> align;
  BasicTensor<T> aligned_feature;  // F'
  std::optional<ConvParams<T>> flow_est, mask_est, kernel_est, offset_est, weight_est;

  Intermediates<T> out;

  const ParamMap<T>& P() const { return state->params; }
  bool motion_first() const { return state->coupling.order == Order::FilterFirst; }

  scf::Estimators<T> estimators() const {
    return {kernel_est ? &*kernel_est : nullptr, offset_est ? &*offset_est : nullptr,
            weight_est ? &*weight_est : nullptr};
  }

  void run_backbone();
  void backbone_backward(const BasicTensor<T>& g_motion, const BasicTensor<T>& g_residual,
                         const BasicTensor<T>& g_half, ParamMap<T>& G) const;
  void run();
  void backward(const BasicTensor<T>& grad_output, const BasicTensor<T>& grad_half, ParamMap<T>& G) const;
};

template <typename T>
void ForwardPass<T>::Impl::run_backbone() {
  const auto& P = this->P();
  const int D = state->net.depth;
  switch (state->coupling.strategy) {
    case Strategy::Parallel: {
      enc_motion.emplace("motion", D);
      dec_motion.emplace("motion", D);
      enc_residual.emplace("residual", D);
      dec_residual.emplace("residual", D);
      enc_motion->forward(P, input);
      dec_motion->forward(P, enc_motion->skips, enc_motion->bottleneck);
      enc_residual->forward(P, input);
      dec_residual->forward(P, enc_residual->skips, enc_residual->bottleneck);
      break;
    }
    case Strategy::SemiParallel:
    case Strategy::Serial: {
      enc_motion.emplace("motion", D);
      dec_motion.emplace("motion", D);
      enc_residual.emplace("residual", D);
      dec_residual.emplace("residual", D);
      auto& enc1 = motion_first() ? *enc_motion : *enc_residual;
      auto& dec1 = motion_first() ? *dec_motion : *dec_residual;
      auto& enc2 = motion_first() ? *enc_residual : *enc_motion;
      auto& dec2 = motion_first() ? *dec_residual : *dec_motion;
      enc1.forward(P, input);
      dec1.forward(P, enc1.skips, enc1.bottleneck);
      if (state->coupling.strategy == Strategy::Serial) {
        enc2.forward(P, concat(input, dec1.full));
        dec2.forward(P, enc2.skips, enc2.bottleneck);
      } else {
        enc2.forward(P, input);
        inject_source_pooled = pool_times(dec1.full, D);
        auto latent = enc2.bottleneck + inject.forward(P, inject_source_pooled);
        dec2.forward(P, enc2.skips, latent);
      }
      break;
    }
    case Strategy::SemiShared: {
      enc_motion.emplace("encoder", D);
      dec_motion.emplace("motion_decoder", D);
      dec_residual.emplace("residual_decoder", D);
      enc_motion->forward(P, input);
      dec_motion->forward(P, enc_motion->skips, enc_motion->bottleneck);
      dec_residual->forward(P, enc_motion->skips, enc_motion->bottleneck);
      break;
    }
    case Strategy::Shared: {
      enc_motion.emplace("backbone", D);
      dec_motion.emplace("backbone", D);
      enc_motion->forward(P, input);
      dec_motion->forward(P, enc_motion->skips, enc_motion->bottleneck);
      break;
    }
  }
  feature_motion = dec_motion->full;
  const auto& res_dec = dec_residual ? *dec_residual : *dec_motion;
  feature_residual = res_dec.full;
  feature_half = res_dec.half;
}

template <typename T>
void ForwardPass<T>::Impl::backbone_backward(const BasicTensor<T>& g_motion, const BasicTensor<T>& g_residual,
                                             const BasicTensor<T>& g_half, ParamMap<T>& G) const {
  const auto& P = this->P();
  const int D = state->net.depth;
  std::vector<BasicTensor<T>> skips_a, skips_b;
  BasicTensor<T> bott_a, bott_b;
  switch (state->coupling.strategy) {
    case Strategy::Parallel: {
      dec_motion->backward(P, g_motion, {}, G, skips_a, bott_a);
      enc_motion->backward(P, skips_a, bott_a, G, false);
      dec_residual->backward(P, g_residual, g_half, G, skips_b, bott_b);
      enc_residual->backward(P, skips_b, bott_b, G, false);
      break;
    }
    case Strategy::SemiParallel:
    case Strategy::Serial: {
      const bool mf = motion_first();
      const auto& enc1 = mf ? *enc_motion : *enc_residual;
      const auto& dec1 = mf ? *dec_motion : *dec_residual;
      const auto& enc2 = mf ? *enc_residual : *enc_motion;
      const auto& dec2 = mf ? *dec_residual : *dec_motion;
      BasicTensor<T> g_first = mf ? g_motion : g_residual;
      const BasicTensor<T> g_second = mf ? g_residual : g_motion;
      const BasicTensor<T> g_first_half = mf ? BasicTensor<T>() : g_half;
      const BasicTensor<T> g_second_half = mf ? g_half : BasicTensor<T>();

      dec2.backward(P, g_second, g_second_half, G, skips_b, bott_b);
      if (state->coupling.strategy == Strategy::Serial) {
        const auto g_in = enc2.backward(P, skips_b, bott_b, G, true);
        auto [g_img, g_feat] = concat_backward(3, g_in);
        add_into(g_first, g_feat);
      } else {
        const auto g_src = inject.backward(P, bott_b, G);
        add_into(g_first, pool_times_backward(g_src, D));
        enc2.backward(P, skips_b, bott_b, G, false);
      }
      dec1.backward(P, g_first, g_first_half, G, skips_a, bott_a);
      enc1.backward(P, skips_a, bott_a, G, false);
      break;
    }
    case Strategy::SemiShared: {
      dec_motion->backward(P, g_motion, {}, G, skips_a, bott_a);
      dec_residual->backward(P, g_residual, g_half, G, skips_b, bott_b);
      for (std::size_t i = 0; i < skips_a.size(); ++i) add_into(skips_a[i], skips_b[i]);
      add_into(bott_a, bott_b);
      enc_motion->backward(P, skips_a, bott_a, G, false);
      break;
    }
    case Strategy::Shared: {
      BasicTensor<T> g = g_motion;
      add_into(g, g_residual);
      dec_motion->backward(P, g, g_half, G, skips_a, bott_a);
      enc_motion->backward(P, skips_a, bott_a, G, false);
      break;
    }
  }
}

template <typename T>
void ForwardPass<T>::Impl::run() {
  const auto& net = state->net;
  const auto& comp = net.components;
  const auto& P = this->P();
  const int H = input.height(), W = input.width();

  run_backbone();

  out.residual = residual_head.forward(P, feature_residual);
  out.output_half = avg_pool2(input) + aux_head.forward(P, feature_half);

  filter_input = motion_first() ? input : input + out.residual;

  if (comp.mga) {
    flow_est = conv_params(P, "flow_est");
    mask_est = conv_params(P, "mask_est");
    align = mga::mga_align(filter_input, feature_motion, *flow_est, *mask_est, static_cast<T>(net.max_flow));
    out.flow = align->flow.offsets;
    out.mask = align->mask.weights;
    out.aligned = align->image;
    aligned_feature = align->feature;
  } else {
    out.flow = BasicTensor<T>({2, H, W});
    out.mask = BasicTensor<T>({1, H, W}, T(0.5));
    out.aligned = filter_input;
    aligned_feature = feature_motion;
  }

  if (comp.scf()) {
    if (comp.kernel) kernel_est = conv_params(P, "kernel_est");
    if (comp.offset) offset_est = conv_params(P, "offset_est");
    if (comp.weight) weight_est = conv_params(P, "weight_est");
    out.scf_params = scf::estimate_params(feature_motion, aligned_feature, estimators(), net.kernel_size);
    out.filtered = scf::scf_filter(out.aligned, out.scf_params);
  } else {
    out.filtered = out.aligned;
  }

  out.output = motion_first() ? out.filtered + out.residual : out.filtered;
}

template <typename T>
void ForwardPass<T>::Impl::backward(const BasicTensor<T>& grad_output, const BasicTensor<T>& grad_half,
                                    ParamMap<T>& G) const {
  const auto& net = state->net;
  const auto& comp = net.components;
  const auto& P = this->P();
  require_finite(grad_output, "output gradient");

  BasicTensor<T> g_residual_out = motion_first() ? grad_output : BasicTensor<T>();
  BasicTensor<T> g_aligned;
  BasicTensor<T> g_motion, g_aligned_feature;

  if (comp.scf()) {
    auto fg = scf::scf_filter_backward(out.aligned, out.scf_params, grad_output);
    g_aligned = std::move(fg.image);
    auto eg = scf::estimate_params_backward(feature_motion, aligned_feature, estimators(), out.scf_params, fg.params);
    g_motion = std::move(eg.feature);
    g_aligned_feature = std::move(eg.aligned_feature);
    const auto store = [&G](const char* name, const std::optional<Conv2dGrads<T>>& cg) {
      if (!cg) return;
      accumulate(G, std::string(name) + ".weight", cg->weight);
      accumulate(G, std::string(name) + ".bias", cg->bias);
    };
    store("kernel_est", eg.kernel);
    store("offset_est", eg.offset);
    store("weight_est", eg.weight);
  } else {
    g_aligned = grad_output;
  }

  BasicTensor<T> g_filter_input;
  if (comp.mga) {
    auto ag = mga::mga_align_backward(filter_input, feature_motion, *flow_est, *mask_est,
                                      static_cast<T>(net.max_flow), *align, g_aligned, g_aligned_feature);
    g_filter_input = std::move(ag.image);
    add_into(g_motion, ag.feature);
    accumulate(G, "flow_est.weight", ag.flow_est.weight);
    accumulate(G, "flow_est.bias", ag.flow_est.bias);
    accumulate(G, "mask_est.weight", ag.mask_est.weight);
    accumulate(G, "mask_est.bias", ag.mask_est.bias);
  } else {
    g_filter_input = std::move(g_aligned);
    add_into(g_motion, g_aligned_feature);
  }

  if (!motion_first()) g_residual_out = g_filter_input;

  const auto g_residual_feat = residual_head.backward(P, g_residual_out, G);
  BasicTensor<T> g_half_feat;
  if (!grad_half.empty()) {
    g_half_feat = aux_head.backward(P, grad_half, G);
  }
  backbone_backward(g_motion, g_residual_feat, g_half_feat, G);
}

template <typename T>
ForwardPass<T>::ForwardPass(const BasicModelState<T>& state, const BasicTensor<T>& input)
    : impl_(std::make_unique<Impl>()) {
  state.net.validate();
  const int D = state.net.depth;
  if (input.ndim() != 3 || input.channels() != 3) {
    throw InputError("model input must be 3 x H x W, got " + shape_str(input.shape()));
  }
  const int m = 1 << D;
  if (input.height() % m || input.width() % m || input.height() == 0 || input.width() == 0) {
    throw InputError("input " + std::to_string(input.height()) + "x" + std::to_string(input.width()) +
                     " is not divisible by " + std::to_string(m) + " (2^depth); pad the image first");
  }
  impl_->state = &state;
  impl_->input = input;
  impl_->run();
}

template <typename T>
ForwardPass<T>::~ForwardPass() = default;
template <typename T>
ForwardPass<T>::ForwardPass(ForwardPass&&) noexcept = default;
template <typename T>
ForwardPass<T>& ForwardPass<T>::operator=(ForwardPass&&) noexcept = default;

template <typename T>
const Intermediates<T>& ForwardPass<T>::result() const {
  return impl_->out;
}

template <typename T>
void ForwardPass<T>::backward(const BasicTensor<T>& grad_output, const BasicTensor<T>& grad_half,
                              ParamMap<T>& grads) const {
  impl_->backward(grad_output, grad_half, grads);
}

template <typename T>
Intermediates<T> forward(const BasicModelState<T>& state, const BasicTensor<T>& input) {
  return ForwardPass<T>(state, input).result();
}

template struct BasicModelState<float>;
template struct BasicModelState<double>;
template class ForwardPass<float>;
template class ForwardPass<double>;
template Intermediates<float> forward(const BasicModelState<float>&, const Tensor&);
template Intermediates<double> forward(const BasicModelState<double>&, const Tensor64&);

}  // namespace misc::model
