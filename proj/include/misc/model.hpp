#pragma once

// Toy deblurring network: a motion-estimation encoder-decoder drives the
// alignment + separable collaborative filter, a residual-reconstruction
// encoder-decoder predicts an image residual, and the two are coupled in one
// of ten ways.
//
// Coupling realizations (groups follow the usual a..j labelling, filter-first
// variant first in each pair):
//   Parallel      (a, b)  two independent encoder-decoders.
//   SemiParallel  (c, d)  the first network's output feature, pooled to the
//                         bottleneck and projected by a 1x1 conv, is added to
//                         the second network's bottleneck.
//   SemiShared    (e, f)  one shared encoder, two decoders.
//   Serial        (g, h)  the second network reads concat(image, first
//                         network's output feature).
//   Shared        (i, j)  one encoder-decoder feeds every head.
// "First" is the motion network under FilterFirst and the residual network
// under ResidualFirst.
//
// Orders:
//   FilterFirst    I_out = SCF(MGA(I_in)) + dI
//   ResidualFirst  I_out = SCF(MGA(I_in + dI))

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "misc/mga.hpp"
#include "misc/scf.hpp"

namespace misc::model {

enum class Strategy { Parallel, SemiParallel, Serial, SemiShared, Shared };
enum class Order { FilterFirst, ResidualFirst };

std::string to_string(Strategy s);
std::string to_string(Order o);
Strategy parse_strategy(const std::string& s);
Order parse_order(const std::string& s);

struct CouplingConfig {
  Strategy strategy = Strategy::Shared;
  Order order = Order::FilterFirst;

  // 'a'..'j'.
  char group() const;
  static CouplingConfig from_group(char group);
  std::string name() const;

  friend bool operator==(const CouplingConfig&, const CouplingConfig&) = default;
};

// Which filter parts are active; all-off is the residual-only base model.
struct Components {
  bool mga = true;
  bool kernel = true;
  bool weight = true;
  bool offset = true;

  bool scf() const { return kernel || weight || offset; }
  bool filter() const { return mga || scf(); }
  std::string name() const;

  friend bool operator==(const Components&, const Components&) = default;
};

struct NetworkConfig {
  int base_channels = 16;
  int depth = 2;
  int kernel_size = 7;
  double max_flow = mga::kDefaultMaxFlow;
  int align_kernel = 3;   // flow / mask estimator conv size
  int filter_kernel = 1;  // kernel / offset / weight estimator conv size
  Components components;

  // Throws ConfigError.
  void validate() const;
  int channels_at(int level) const { return base_channels << level; }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

template <typename T>
using ParamMap = std::map<std::string, BasicTensor<T>>;

template <typename T>
struct BasicModelState {
  NetworkConfig net;
  CouplingConfig coupling;
  ParamMap<T> params;

  std::size_t parameter_count() const;
  const BasicTensor<T>& param(const std::string& name) const;

  template <typename U>
  BasicModelState<U> cast() const {
    BasicModelState<U> out{net, coupling, {}};
    for (const auto& [k, v] : params) out.params.emplace(k, v.template cast<U>());
    return out;
  }
};

using ModelState = BasicModelState<float>;

// Deterministic in `seed`. Flow and offset estimators, the weight estimator,
// the residual heads and the latent projection start at zero; the kernel
// estimator starts with zero weights and a Gaussian bias (sigma 0.5 taps).
// A fresh model therefore aligns with the identity and filters with a
// narrow separable Gaussian. A box-mean start trained markedly slower.
ModelState build_model(const NetworkConfig& net, const CouplingConfig& coupling, std::uint64_t seed);

template <typename T>
struct Intermediates {
  BasicTensor<T> output;       // I_out, 3 x H x W
  BasicTensor<T> output_half;  // auxiliary half-resolution prediction
  BasicTensor<T> flow;         // o, 2 x H x W
  BasicTensor<T> mask;         // m, 1 x H x W
  BasicTensor<T> aligned;      // I'
  BasicTensor<T> filtered;     // I''
  BasicTensor<T> residual;     // dI
  scf::ScfParams<T> scf_params;
};

// Forward pass that keeps what backward() needs.
template <typename T>
class ForwardPass {
 public:
  // Throws InputError when H or W is not divisible by 2^depth.
  ForwardPass(const BasicModelState<T>& state, const BasicTensor<T>& input);
  ~ForwardPass();
  ForwardPass(ForwardPass&&) noexcept;
  ForwardPass& operator=(ForwardPass&&) noexcept;

  const Intermediates<T>& result() const;

  // Adds d(loss)/d(param) into `grads`, creating zero entries as needed.
  // grad_half may be empty when the half-scale output is unsupervised.
  void backward(const BasicTensor<T>& grad_output, const BasicTensor<T>& grad_half, ParamMap<T>& grads) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

template <typename T>
Intermediates<T> forward(const BasicModelState<T>& state, const BasicTensor<T>& input);

}  // namespace misc::model
