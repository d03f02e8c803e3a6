#pragma once

// Single-sample Monte-Carlo ELBO:
//   L = likelihood - KL_winners - KL_weights
// where the likelihood is -mean cross-entropy (classification) or -mean
// squared error (regression), and both KL terms are evaluated on the same
// latent sample that produced the network output.

#include <cstdint>
#include <string_view>
#include <vector>

#include "lwta/network.hpp"

namespace lwta {

enum class TaskType { classification, regression };

std::string_view to_string(TaskType t);

struct ElboBreakdown {
  double likelihood_term = 0.0;
  double kl_xi = 0.0;
  double kl_w = 0.0;
  double total = 0.0;  // likelihood_term - kl_xi - kl_w
};

// -log max(probs[target], 1e-12). IndexError for target outside the vector.
template <class T>
T cross_entropy(const Tensor<T>& probs, std::size_t target);

// sum_r [ sum_j xi_rj log pi_rj - sum_j xi_rj log(1/J) ],  pi_r = softmax(logits_r).
// On a one-hot sample this is the Categorical log-ratio log q - log p.
template <class T>
T mc_kl_categorical(const WinnerSample<T>& winner, std::size_t block_size);

// sum [ log N(w; mu, sigma^2) - log N(w; 0, 1) ] with sigma^2 = exp(log_var).
template <class T>
T mc_kl_gaussian(const Tensor<T>& w_hat, const Tensor<T>& mu, const Tensor<T>& log_var);

// sum -0.5 (1 + log sigma^2 - sigma^2 - mu^2)
template <class T>
T closed_form_kl_gaussian(const Tensor<T>& mu, const Tensor<T>& log_var);

std::vector<std::int32_t> labels_from(const Tensor<float>& y);
std::vector<std::int32_t> labels_from(const Tensor<double>& y);

template <class T>
struct ElboGraph {
  ad::Var<T> likelihood;
  ad::Var<T> kl_xi;
  ad::Var<T> kl_w;
  ad::Var<T> total;
  ad::Var<T> loss;  // kl_weight (kl_xi + kl_w) - likelihood; -total at weight 1
  NetworkTrace<T> trace;

  ElboBreakdown breakdown() const;
};

// Winner KL of one stochastic layer on tape: summed over blocks, averaged
// over the batch rows.
template <class T>
ad::Var<T> kl_categorical(ad::Var<T> relaxed, ad::Var<T> logits, std::size_t block_size);

// Records the ELBO of (x, y) under one fresh latent sample. y holds class
// indices (N) for classification and targets (N x out) for regression.
// kl_weight scales both KL terms in `loss` only; `total` stays the plain ELBO.
template <class T>
ElboGraph<T> build_elbo(ad::Tape<T>& tape, const Network<T>& net, const Tensor<T>& x,
                        const Tensor<T>& y, TaskType task, RngStream& rng, T tau,
                        bool trainable = true, T kl_weight = T(1));

template <class T>
ElboBreakdown task_elbo(const Network<T>& net, const Tensor<T>& x, const Tensor<T>& y,
                        RngStream& rng, TaskType task, T tau);

}  // namespace lwta
