#pragma once

// Layers with blocks of competing linear units.
//
// A layer maps x in R^I to R^(R*J): J linear units per block, R blocks. In the
// stochastic mode the winner of each block is drawn from
// Categorical(softmax(block logits)); training uses the Gumbel-softmax
// relaxation of that draw, prediction uses hard samples. Weights are either a
// diagonal Gaussian posterior (mean, log-variance) or point estimates.

#include <cstddef>
#include <string_view>
#include <vector>

#include "lwta/rng.hpp"
#include "lwta/tensor.hpp"

namespace lwta {

enum class Activation { stochastic_lwta, deterministic_lwta, relu, linear };
enum class WeightMode { gaussian, point };
enum class Phase { train, predict };

std::string_view to_string(Activation a);
std::string_view to_string(WeightMode w);
Activation parse_activation(std::string_view s);
WeightMode parse_weight_mode(std::string_view s);

// Log-variances are clamped to this floor whenever a sigma is formed.
inline constexpr double kLogVarFloor = -20.0;

struct LayerSpec {
  std::size_t in_dim = 1;
  std::size_t blocks = 1;
  std::size_t block_size = 1;
  Activation activation = Activation::stochastic_lwta;
  WeightMode weight_mode = WeightMode::gaussian;
  bool bias = false;

  std::size_t out_dim() const { return blocks * block_size; }
  bool has_winners() const {
    return activation == Activation::stochastic_lwta ||
           activation == Activation::deterministic_lwta;
  }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

template <class T>
struct VariationalLwtaLayer {
  LayerSpec spec;
  Tensor<T> mu;            // I x R x J
  Tensor<T> log_var;       // I x R x J; empty in point mode
  Tensor<T> bias_mu;       // R*J; empty without bias
  Tensor<T> bias_log_var;  // R*J; empty without bias or in point mode

  // Zero means, zero log-variances.
  static VariationalLwtaLayer zeros(const LayerSpec& spec);

  // Means ~ Glorot uniform; log-variances ~ N(0.0005 + log_var_shift, 0.01).
  static VariationalLwtaLayer init(const LayerSpec& spec, RngStream& rng,
                                   double log_var_shift = 0.0);

  bool gaussian() const { return spec.weight_mode == WeightMode::gaussian; }
  std::size_t out_dim() const { return spec.out_dim(); }

  // Trainable tensors in a fixed order: mu, log_var, bias_mu, bias_log_var
  // (absent ones skipped).
  std::vector<Tensor<T>*> parameters();
  std::vector<const Tensor<T>*> parameters() const;
};

template <class T>
struct WinnerSample {
  Tensor<T> xi_relaxed;  // R x J, rows on the simplex
  Tensor<T> xi_hard;     // R x J, one-hot rows
  Tensor<T> logits;      // R x J
};

// w = mu + exp(0.5 * max(log_var, floor)) * eps, eps ~ N(0, 1).
// ContractError in point mode; use point_weights() there.
template <class T>
Tensor<T> sample_weights(const VariationalLwtaLayer<T>& layer, RngStream& rng);

template <class T>
Tensor<T> sample_weights(const VariationalLwtaLayer<T>& layer, const Tensor<T>& eps);

template <class T>
const Tensor<T>& point_weights(const VariationalLwtaLayer<T>& layer) {
  return layer.mu;
}

// out[r, j] = sum_i w[i, r, j] * x[i]; result shaped R x J.
template <class T>
Tensor<T> block_logits(const Tensor<T>& x, const Tensor<T>& w);

// Gumbel noise g = -log(-log u) for u in (0, 1).
template <class T>
Tensor<T> gumbel_from_uniform(const Tensor<T>& u);

// Relaxed and hard winners from the same Gumbel-perturbed logits. `logits`
// is any tensor whose size is a multiple of `block_size`; rows are blocks.
template <class T>
WinnerSample<T> relax_winner(const Tensor<T>& logits, T tau, const Tensor<T>& uniforms,
                             std::size_t block_size);

template <class T>
WinnerSample<T> sample_winner_relaxed(const Tensor<T>& logits, T tau, RngStream& rng,
                                      std::size_t block_size);

// One-hot of the per-block argmax; ties go to the lowest index.
template <class T>
Tensor<T> hard_argmax(const Tensor<T>& z, std::size_t block_size);

template <class T>
struct LayerOutput {
  Tensor<T> y;                // R*J
  WinnerSample<T> winner;     // empty tensors for relu / linear
};

// Single-input forward through one layer. Weights are sampled in gaussian
// mode and taken as the means in point mode.
template <class T>
LayerOutput<T> lwta_forward(const Tensor<T>& x, const VariationalLwtaLayer<T>& layer,
                            RngStream& rng, Phase phase, T tau);

// Same as above with the sampled weights given explicitly.
template <class T>
LayerOutput<T> lwta_forward_with_weights(const Tensor<T>& x, const Tensor<T>& w,
                                         const VariationalLwtaLayer<T>& layer, RngStream& rng,
                                         Phase phase, T tau);

// Trainable scalars: a gaussian tensor counts twice (mean and log-variance).
std::size_t count_parameters(const LayerSpec& spec);
std::size_t count_parameters(const std::vector<LayerSpec>& network);

}  // namespace lwta
