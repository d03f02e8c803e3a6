#pragma once

#include <cstddef>
#include <vector>

#include "lwta/autodiff.hpp"
#include "lwta/layers.hpp"
#include "lwta/noise.hpp"

namespace lwta {

// Hidden stack of competing-unit layers followed by a dense linear head.
struct Architecture {
  std::size_t input_dim = 1;
  std::vector<std::size_t> blocks{16, 8};
  std::size_t block_size = 2;
  Activation activation = Activation::stochastic_lwta;
  WeightMode weight_mode = WeightMode::gaussian;
  bool bias = false;
  std::size_t output_dim = 1;

  // Hidden layers then the head (activation = linear, one unit per block).
  std::vector<LayerSpec> layer_specs() const;
};

template <class T>
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<VariationalLwtaLayer<T>> layers);

  static Network init(const std::vector<LayerSpec>& specs, RngStream& rng,
                      double log_var_shift = 0.0);
  static Network zeros(const std::vector<LayerSpec>& specs);

  const std::vector<VariationalLwtaLayer<T>>& layers() const noexcept { return layers_; }
  std::vector<VariationalLwtaLayer<T>>& layers() noexcept { return layers_; }
  std::vector<LayerSpec> specs() const;

  std::vector<Tensor<T>*> parameters();
  std::vector<const Tensor<T>*> parameters() const;
  std::size_t parameter_count() const;

  std::size_t input_dim() const { return layers_.front().spec.in_dim; }
  std::size_t output_dim() const { return layers_.back().spec.out_dim(); }

  friend bool operator==(const Network& a, const Network& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l) {
      const auto& x = a.layers_[l];
      const auto& y = b.layers_[l];
      if (!(x.spec == y.spec && x.mu == y.mu && x.log_var == y.log_var &&
            x.bias_mu == y.bias_mu && x.bias_log_var == y.bias_log_var)) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<VariationalLwtaLayer<T>> layers_;
};

// Nodes recorded for one layer during a forward pass.
template <class T>
struct LayerTrace {
  LayerSpec spec;
  ad::Var<T> mu;
  ad::Var<T> log_var;       // parameter leaf
  ad::Var<T> log_var_used;  // floor-clamped, feeds sampling and the KL
  ad::Var<T> weights;       // sampled weights, or mu in point mode
  ad::Var<T> bias_mu;
  ad::Var<T> bias_log_var;
  ad::Var<T> bias_log_var_used;
  ad::Var<T> bias;
  ad::Var<T> logits;   // N x R*J
  ad::Var<T> relaxed;  // N x R*J; only for stochastic layers in the train phase
};

template <class T>
struct NetworkTrace {
  ad::Var<T> output;  // N x output_dim
  std::vector<LayerTrace<T>> layers;
  std::vector<ad::Var<T>> params;  // same order as Network::parameters()
};

// Records a forward pass for the batch x (N x I). Layer l draws its noise from
// rng.derive(kLayerBase + l). In the train phase stochastic layers use the
// Gumbel-softmax relaxation; in the predict phase they use hard Categorical
// draws (Gumbel-max on the same noise). Parameters enter as trainable leaves
// when `trainable`.
template <class T>
NetworkTrace<T> forward(ad::Tape<T>& tape, const Network<T>& net, const Tensor<T>& x,
                        RngStream& rng, Phase phase, T tau, bool trainable);

// One stochastic forward pass without gradient bookkeeping.
template <class T>
Tensor<T> predict_once(const Network<T>& net, const Tensor<T>& x, RngStream& rng, Phase phase,
                       T tau);

}  // namespace lwta
