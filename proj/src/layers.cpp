#include "lwta/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lwta/error.hpp"
#include "lwta/kernels.hpp"
#include "lwta/noise.hpp"

namespace lwta {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::stochastic_lwta: return "stochastic_lwta";
    case Activation::deterministic_lwta: return "deterministic_lwta";
    case Activation::relu: return "relu";
    case Activation::linear: return "linear";
  }
  return "?";
}

std::string_view to_string(WeightMode w) {
  return w == WeightMode::gaussian ? "gaussian" : "point";
}

Activation parse_activation(std::string_view s) {
  if (s == "stochastic_lwta") return Activation::stochastic_lwta;
  if (s == "deterministic_lwta") return Activation::deterministic_lwta;
  if (s == "relu") return Activation::relu;
  if (s == "linear") return Activation::linear;
  throw ConfigError("unknown activation '" + std::string(s) +
                    "' (expected stochastic_lwta, deterministic_lwta, relu)");
}

WeightMode parse_weight_mode(std::string_view s) {
  if (s == "gaussian") return WeightMode::gaussian;
  if (s == "point") return WeightMode::point;
  throw ConfigError("unknown weight mode '" + std::string(s) + "' (expected gaussian, point)");
}

template <class T>
VariationalLwtaLayer<T> VariationalLwtaLayer<T>::zeros(const LayerSpec& spec) {
  if (spec.in_dim == 0 || spec.blocks == 0 || spec.block_size == 0) {
    throw ConfigError("layer dimensions must be >= 1");
  }
  VariationalLwtaLayer layer;
  layer.spec = spec;
  const Shape shape{spec.in_dim, spec.blocks, spec.block_size};
  layer.mu = Tensor<T>(shape);
  if (layer.gaussian()) layer.log_var = Tensor<T>(shape);
  if (spec.bias) {
    layer.bias_mu = Tensor<T>({spec.out_dim()});
    if (layer.gaussian()) layer.bias_log_var = Tensor<T>({spec.out_dim()});
  }
  return layer;
}

template <class T>
VariationalLwtaLayer<T> VariationalLwtaLayer<T>::init(const LayerSpec& spec, RngStream& rng,
                                                      double log_var_shift) {
  auto layer = zeros(spec);
  const double limit = std::sqrt(6.0 / static_cast<double>(spec.in_dim + spec.out_dim()));
  for (auto& v : layer.mu.data()) v = static_cast<T>(rng.uniform(-limit, limit));
  constexpr double kLogVarMean = 0.0005;
  constexpr double kLogVarStd = 0.01;
  auto draw_log_var = [&](Tensor<T>& t) {
    for (auto& v : t.data()) {
      v = static_cast<T>(kLogVarMean + log_var_shift + kLogVarStd * rng.normal());
    }
  };
  if (layer.gaussian()) draw_log_var(layer.log_var);
  if (!layer.bias_log_var.empty()) draw_log_var(layer.bias_log_var);
  return layer;
}

template <class T>
std::vector<Tensor<T>*> VariationalLwtaLayer<T>::parameters() {
  std::vector<Tensor<T>*> out{&mu};
  if (!log_var.empty()) out.push_back(&log_var);
  if (!bias_mu.empty()) out.push_back(&bias_mu);
  if (!bias_log_var.empty()) out.push_back(&bias_log_var);
  return out;
}

template <class T>
std::vector<const Tensor<T>*> VariationalLwtaLayer<T>::parameters() const {
  std::vector<const Tensor<T>*> out{&mu};
  if (!log_var.empty()) out.push_back(&log_var);
  if (!bias_mu.empty()) out.push_back(&bias_mu);
  if (!bias_log_var.empty()) out.push_back(&bias_log_var);
  return out;
}

template <class T>
Tensor<T> sample_weights(const VariationalLwtaLayer<T>& layer, const Tensor<T>& eps) {
  if (!layer.gaussian()) {
    throw ContractError("sample_weights: layer holds point estimates; use point_weights()");
  }
  if (eps.shape() != layer.mu.shape()) {
    throw DimensionError("sample_weights: noise " + shape_str(eps.shape()) + " vs weights " +
                         shape_str(layer.mu.shape()));
  }
  Tensor<T> w(layer.mu.shape());
  const T floor = static_cast<T>(kLogVarFloor);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = layer.mu[i] + std::exp(T(0.5) * std::max(layer.log_var[i], floor)) * eps[i];
  }
  return w;
}

template <class T>
Tensor<T> sample_weights(const VariationalLwtaLayer<T>& layer, RngStream& rng) {
  Tensor<T> eps(layer.mu.shape());
  RngStream noise = rng.derive(noise_tag::kWeights);
  fill_std_normal(noise, eps);
  return sample_weights(layer, eps);
}

template <class T>
Tensor<T> block_logits(const Tensor<T>& x, const Tensor<T>& w) {
  if (w.rank() != 3) {
    throw DimensionError("block_logits: weights must be I x R x J, got " + shape_str(w.shape()));
  }
  if (x.size() != w.dim(0)) {
    throw DimensionError("block_logits: input " + shape_str(x.shape()) + " vs weights " +
                         shape_str(w.shape()));
  }
  return matvec(w, x).reshaped({w.dim(1), w.dim(2)});
}

template <class T>
Tensor<T> gumbel_from_uniform(const Tensor<T>& u) {
  Tensor<T> g(u.shape());
  for (std::size_t i = 0; i < u.size(); ++i) g[i] = -std::log(-std::log(u[i]));
  return g;
}

template <class T>
Tensor<T> hard_argmax(const Tensor<T>& z, std::size_t block_size) {
  if (block_size == 0 || z.size() % block_size != 0) {
    throw DimensionError("hard_argmax: block size " + std::to_string(block_size) +
                         " does not divide " + shape_str(z.shape()));
  }
  Tensor<T> out(z.shape());
  for (std::size_t base = 0; base < z.size(); base += block_size) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < block_size; ++j) {
      if (z[base + j] > z[base + best]) best = j;
    }
    out[base + best] = T(1);
  }
  return out;
}

template <class T>
WinnerSample<T> relax_winner(const Tensor<T>& logits, T tau, const Tensor<T>& uniforms,
                             std::size_t block_size) {
  if (!(tau > T(0))) throw ConfigError("relaxation temperature must be > 0");
  if (uniforms.size() != logits.size()) {
    throw DimensionError("relax_winner: noise " + shape_str(uniforms.shape()) + " vs logits " +
                         shape_str(logits.shape()));
  }
  const Tensor<T> g = gumbel_from_uniform(uniforms);
  Tensor<T> perturbed(logits.shape());
  for (std::size_t i = 0; i < logits.size(); ++i) perturbed[i] = logits[i] + g[i];
  Tensor<T> scaled = perturbed;
  for (auto& v : scaled.data()) v /= tau;
  WinnerSample<T> s;
  s.xi_relaxed = block_softmax(scaled, block_size);
  s.xi_hard = hard_argmax(perturbed, block_size);
  s.logits = logits;
  return s;
}

template <class T>
WinnerSample<T> sample_winner_relaxed(const Tensor<T>& logits, T tau, RngStream& rng,
                                      std::size_t block_size) {
  Tensor<T> u(logits.shape());
  fill_uniform(rng, u);
  return relax_winner(logits, tau, u, block_size);
}

template <class T>
LayerOutput<T> lwta_forward_with_weights(const Tensor<T>& x, const Tensor<T>& w,
                                         const VariationalLwtaLayer<T>& layer, RngStream& rng,
                                         Phase phase, T tau) {
  const auto& spec = layer.spec;
  Tensor<T> logits = matvec(w, x);
  if (spec.bias) {
    if (layer.gaussian()) {
      Tensor<T> eps({spec.out_dim()});
      RngStream noise = rng.derive(noise_tag::kBias);
      fill_std_normal(noise, eps);
      const T floor = static_cast<T>(kLogVarFloor);
      for (std::size_t i = 0; i < logits.size(); ++i) {
        logits[i] += layer.bias_mu[i] +
                     std::exp(T(0.5) * std::max(layer.bias_log_var[i], floor)) * eps[i];
      }
    } else {
      for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += layer.bias_mu[i];
    }
  }
  logits = logits.reshaped({spec.blocks, spec.block_size});

  LayerOutput<T> out;
  out.y = Tensor<T>({spec.out_dim()});
  switch (spec.activation) {
    case Activation::stochastic_lwta: {
      RngStream noise = rng.derive(noise_tag::kWinners);
      out.winner = sample_winner_relaxed(logits, tau, noise, spec.block_size);
      const Tensor<T>& xi = phase == Phase::train ? out.winner.xi_relaxed : out.winner.xi_hard;
      for (std::size_t i = 0; i < out.y.size(); ++i) out.y[i] = xi[i] * logits[i];
      break;
    }
    case Activation::deterministic_lwta: {
      out.winner.xi_hard = hard_argmax(logits, spec.block_size);
      out.winner.xi_relaxed = out.winner.xi_hard;
      out.winner.logits = logits;
      for (std::size_t i = 0; i < out.y.size(); ++i) out.y[i] = out.winner.xi_hard[i] * logits[i];
      break;
    }
    case Activation::relu:
      for (std::size_t i = 0; i < out.y.size(); ++i) out.y[i] = std::max(T(0), logits[i]);
      break;
    case Activation::linear:
      for (std::size_t i = 0; i < out.y.size(); ++i) out.y[i] = logits[i];
      break;
  }
  return out;
}

template <class T>
LayerOutput<T> lwta_forward(const Tensor<T>& x, const VariationalLwtaLayer<T>& layer,
                            RngStream& rng, Phase phase, T tau) {
  if (layer.gaussian()) {
    return lwta_forward_with_weights(x, sample_weights(layer, rng), layer, rng, phase, tau);
  }
  return lwta_forward_with_weights(x, layer.mu, layer, rng, phase, tau);
}

std::size_t count_parameters(const LayerSpec& spec) {
  std::size_t n = spec.in_dim * spec.out_dim();
  if (spec.bias) n += spec.out_dim();
  return spec.weight_mode == WeightMode::gaussian ? 2 * n : n;
}

std::size_t count_parameters(const std::vector<LayerSpec>& network) {
  std::size_t n = 0;
  for (const auto& s : network) n += count_parameters(s);
  return n;
}

#define LWTA_INSTANTIATE_LAYERS(T)                                                             \
  template struct VariationalLwtaLayer<T>;                                                     \
  template Tensor<T> sample_weights(const VariationalLwtaLayer<T>&, RngStream&);               \
  template Tensor<T> sample_weights(const VariationalLwtaLayer<T>&, const Tensor<T>&);         \
  template Tensor<T> block_logits(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> gumbel_from_uniform(const Tensor<T>&);                                    \
  template Tensor<T> hard_argmax(const Tensor<T>&, std::size_t);                               \
  template WinnerSample<T> relax_winner(const Tensor<T>&, T, const Tensor<T>&, std::size_t);   \
  template WinnerSample<T> sample_winner_relaxed(const Tensor<T>&, T, RngStream&, std::size_t); \
  template LayerOutput<T> lwta_forward_with_weights(const Tensor<T>&, const Tensor<T>&,        \
                                                    const VariationalLwtaLayer<T>&,            \
                                                    RngStream&, Phase, T);                     \
  template LayerOutput<T> lwta_forward(const Tensor<T>&, const VariationalLwtaLayer<T>&,       \
                                       RngStream&, Phase, T);

LWTA_INSTANTIATE_LAYERS(float)
LWTA_INSTANTIATE_LAYERS(double)

}  // namespace lwta
