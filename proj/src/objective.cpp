#include "lwta/objective.hpp"

#include <algorithm>
#include <cmath>

#include "lwta/error.hpp"
#include "lwta/ops.hpp"

namespace lwta {

std::string_view to_string(TaskType t) {
  return t == TaskType::classification ? "classification" : "regression";
}

template <class T>
T cross_entropy(const Tensor<T>& probs, std::size_t target) {
  if (target >= probs.size()) {
    throw IndexError("cross_entropy: target " + std::to_string(target) + " outside [0, " +
                     std::to_string(probs.size()) + ")");
  }
  return -std::log(std::max(probs[target], static_cast<T>(ad::kProbFloor)));
}

template <class T>
T mc_kl_categorical(const WinnerSample<T>& winner, std::size_t block_size) {
  const auto& xi = winner.xi_relaxed;
  const auto& logits = winner.logits;
  if (xi.size() != logits.size()) {
    throw DimensionError("mc_kl_categorical: sample " + shape_str(xi.shape()) + " vs logits " +
                         shape_str(logits.shape()));
  }
  const Tensor<T> pi = block_softmax(logits, block_size);
  const T log_prior = -std::log(static_cast<T>(block_size));
  T total = 0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    total += xi[i] * std::log(pi[i]) - xi[i] * log_prior;
  }
  return total;
}

template <class T>
T mc_kl_gaussian(const Tensor<T>& w_hat, const Tensor<T>& mu, const Tensor<T>& log_var) {
  if (!w_hat.same_shape(mu) || !mu.same_shape(log_var)) {
    throw DimensionError("mc_kl_gaussian: mismatched shapes");
  }
  T total = 0;
  for (std::size_t i = 0; i < w_hat.size(); ++i) {
    const T d = w_hat[i] - mu[i];
    total += T(-0.5) * log_var[i] - T(0.5) * d * d * std::exp(-log_var[i]) +
             T(0.5) * w_hat[i] * w_hat[i];
  }
  return total;
}

template <class T>
T closed_form_kl_gaussian(const Tensor<T>& mu, const Tensor<T>& log_var) {
  if (!mu.same_shape(log_var)) throw DimensionError("closed_form_kl_gaussian: mismatched shapes");
  T total = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    total += T(-0.5) * (T(1) + log_var[i] - std::exp(log_var[i]) - mu[i] * mu[i]);
  }
  return total;
}

namespace {

template <class T>
std::vector<std::int32_t> to_labels(const Tensor<T>& y) {
  std::vector<std::int32_t> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T v = y[i];
    if (v < T(0) || v != std::floor(v)) {
      throw IndexError("class label " + std::to_string(v) + " is not a non-negative integer");
    }
    out[i] = static_cast<std::int32_t>(v);
  }
  return out;
}

}  // namespace

std::vector<std::int32_t> labels_from(const Tensor<float>& y) { return to_labels(y); }
std::vector<std::int32_t> labels_from(const Tensor<double>& y) { return to_labels(y); }

template <class T>
ElboBreakdown ElboGraph<T>::breakdown() const {
  ElboBreakdown b;
  b.likelihood_term = static_cast<double>(likelihood.value().item());
  b.kl_xi = static_cast<double>(kl_xi.value().item());
  b.kl_w = static_cast<double>(kl_w.value().item());
  b.total = b.likelihood_term - b.kl_xi - b.kl_w;
  return b;
}

template <class T>
ad::Var<T> kl_categorical(ad::Var<T> relaxed, ad::Var<T> logits, std::size_t block_size) {
  const std::size_t n = logits.value().rows();
  const T log_prior = -std::log(static_cast<T>(block_size));
  auto log_post = ad::block_log_softmax(logits, block_size);
  auto posterior_term = ad::sum(ad::mul(relaxed, log_post));
  auto prior_term = ad::scale(ad::sum(relaxed), log_prior);
  return ad::scale(ad::sub(posterior_term, prior_term), T(1) / static_cast<T>(n));
}

template <class T>
ElboGraph<T> build_elbo(ad::Tape<T>& tape, const Network<T>& net, const Tensor<T>& x,
                        const Tensor<T>& y, TaskType task, RngStream& rng, T tau,
                        bool trainable, T kl_weight) {
  if (x.empty() || y.empty()) throw ContractError("ELBO of an empty episode");
  if (y.rows() != x.rows()) {
    throw DimensionError("ELBO: " + std::to_string(x.rows()) + " inputs vs " +
                         std::to_string(y.rows()) + " targets");
  }
  ElboGraph<T> g;
  g.trace = forward(tape, net, x, rng, Phase::train, tau, trainable);

  if (task == TaskType::classification) {
    auto probs = ad::block_softmax(g.trace.output, net.output_dim());
    g.likelihood = ad::scale(ad::nll(probs, labels_from(y)), T(-1));
  } else {
    g.likelihood = ad::scale(ad::squared_error(g.trace.output, y), T(-1));
  }

  g.kl_xi = tape.constant(Tensor<T>::scalar(0));
  g.kl_w = tape.constant(Tensor<T>::scalar(0));
  for (const auto& lt : g.trace.layers) {
    if (lt.relaxed.valid()) {
      g.kl_xi = ad::add(g.kl_xi, kl_categorical(lt.relaxed, lt.logits, lt.spec.block_size));
    }
    if (lt.log_var_used.valid()) {
      g.kl_w = ad::add(g.kl_w, ad::gaussian_log_ratio(lt.weights, lt.mu, lt.log_var_used));
    }
    if (lt.bias_log_var_used.valid()) {
      g.kl_w = ad::add(g.kl_w, ad::gaussian_log_ratio(lt.bias, lt.bias_mu, lt.bias_log_var_used));
    }
  }
  g.total = ad::sub(ad::sub(g.likelihood, g.kl_xi), g.kl_w);
  if (kl_weight == T(1)) {
    g.loss = ad::scale(g.total, T(-1));
  } else {
    g.loss = ad::sub(ad::scale(ad::add(g.kl_xi, g.kl_w), kl_weight), g.likelihood);
  }
  return g;
}

template <class T>
ElboBreakdown task_elbo(const Network<T>& net, const Tensor<T>& x, const Tensor<T>& y,
                        RngStream& rng, TaskType task, T tau) {
  ad::Tape<T> tape;
  return build_elbo(tape, net, x, y, task, rng, tau, false).breakdown();
}

#define LWTA_INSTANTIATE_OBJECTIVE(T)                                                       \
  template T cross_entropy(const Tensor<T>&, std::size_t);                                  \
  template T mc_kl_categorical(const WinnerSample<T>&, std::size_t);                        \
  template T mc_kl_gaussian(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template T closed_form_kl_gaussian(const Tensor<T>&, const Tensor<T>&);                   \
  template struct ElboGraph<T>;                                                             \
  template ad::Var<T> kl_categorical(ad::Var<T>, ad::Var<T>, std::size_t);                  \
  template ElboGraph<T> build_elbo(ad::Tape<T>&, const Network<T>&, const Tensor<T>&,       \
                                   const Tensor<T>&, TaskType, RngStream&, T, bool, T);        \
  template ElboBreakdown task_elbo(const Network<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                   RngStream&, TaskType, T);

LWTA_INSTANTIATE_OBJECTIVE(float)
LWTA_INSTANTIATE_OBJECTIVE(double)

}  // namespace lwta
