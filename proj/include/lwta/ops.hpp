#pragma once

// Differentiable operations recorded on a Tape. Shapes follow the row-major
// convention used throughout: a batch is N x D, layer weights are I x (R*J).

#include <cstdint>
#include <vector>

#include "lwta/autodiff.hpp"

namespace lwta::ad {

template <class T> Var<T> add(Var<T> a, Var<T> b);
// a[N x D] + b[D] broadcast over rows.
template <class T> Var<T> add_row(Var<T> a, Var<T> b);
template <class T> Var<T> sub(Var<T> a, Var<T> b);
template <class T> Var<T> mul(Var<T> a, Var<T> b);
template <class T> Var<T> scale(Var<T> a, T c);
template <class T> Var<T> add_scalar(Var<T> a, T c);
// x[N x I] * w[I x ...] -> [N x cols(w)]
template <class T> Var<T> matmul(Var<T> x, Var<T> w);
// Softmax over contiguous groups of `group` entries.
template <class T> Var<T> block_softmax(Var<T> z, std::size_t group);
template <class T> Var<T> block_log_softmax(Var<T> z, std::size_t group);
template <class T> Var<T> log(Var<T> a);
template <class T> Var<T> exp(Var<T> a);
template <class T> Var<T> tanh(Var<T> a);
template <class T> Var<T> relu(Var<T> a);
template <class T> Var<T> sum(Var<T> a);
template <class T> Var<T> mean(Var<T> a);
// Stacks along the leading dimension; trailing shapes must agree.
template <class T> Var<T> concat(Var<T> a, Var<T> b);
template <class T> Var<T> gather_rows(Var<T> a, std::vector<std::size_t> rows);
template <class T> Var<T> clamp_min(Var<T> a, T lo);

// mu + exp(0.5 * log_var) * eps with eps held constant.
template <class T> Var<T> gaussian_reparam(Var<T> mu, Var<T> log_var, const Tensor<T>& eps);

// sum_k [ log N(w_k; mu_k, exp(log_var_k)) - log N(w_k; 0, 1) ]  (scalar)
template <class T> Var<T> gaussian_log_ratio(Var<T> w, Var<T> mu, Var<T> log_var);

// Relaxed categorical sample: block_softmax((logits + gumbel) / tau).
template <class T>
Var<T> gumbel_softmax(Var<T> logits, const Tensor<T>& gumbel, T tau, std::size_t group);

inline constexpr double kProbFloor = 1e-12;

// mean_n -log max(probs[n, labels[n]], 1e-12). Throws IndexError for labels
// outside [0, cols).
template <class T> Var<T> nll(Var<T> probs, const std::vector<std::int32_t>& labels);

// mean over all entries of (pred - target)^2.
template <class T> Var<T> squared_error(Var<T> pred, const Tensor<T>& target);

}  // namespace lwta::ad
