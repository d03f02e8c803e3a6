#include "lwta/network.hpp"

#include "lwta/error.hpp"
#include "lwta/ops.hpp"

namespace lwta {

std::vector<LayerSpec> Architecture::layer_specs() const {
  if (blocks.empty()) throw ConfigError("architecture needs at least one hidden layer");
  std::vector<LayerSpec> specs;
  std::size_t in = input_dim;
  for (auto r : blocks) {
    specs.push_back({in, r, block_size, activation, weight_mode, bias});
    in = r * block_size;
  }
  specs.push_back({in, output_dim, 1, Activation::linear, weight_mode, bias});
  return specs;
}

template <class T>
Network<T>::Network(std::vector<VariationalLwtaLayer<T>> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    if (layers_[l].spec.in_dim != layers_[l - 1].spec.out_dim()) {
      throw DimensionError("layer " + std::to_string(l) + " expects input width " +
                           std::to_string(layers_[l].spec.in_dim) + " but receives " +
                           std::to_string(layers_[l - 1].spec.out_dim()));
    }
  }
}

template <class T>
Network<T> Network<T>::init(const std::vector<LayerSpec>& specs, RngStream& rng,
                            double log_var_shift) {
  std::vector<VariationalLwtaLayer<T>> layers;
  for (const auto& s : specs) {
    layers.push_back(VariationalLwtaLayer<T>::init(s, rng, log_var_shift));
  }
  return Network(std::move(layers));
}

template <class T>
Network<T> Network<T>::zeros(const std::vector<LayerSpec>& specs) {
  std::vector<VariationalLwtaLayer<T>> layers;
  for (const auto& s : specs) layers.push_back(VariationalLwtaLayer<T>::zeros(s));
  return Network(std::move(layers));
}

template <class T>
std::vector<LayerSpec> Network<T>::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back(l.spec);
  return out;
}

template <class T>
std::vector<Tensor<T>*> Network<T>::parameters() {
  std::vector<Tensor<T>*> out;
  for (auto& l : layers_) {
    for (auto* p : l.parameters()) out.push_back(p);
  }
  return out;
}

template <class T>
std::vector<const Tensor<T>*> Network<T>::parameters() const {
  std::vector<const Tensor<T>*> out;
  for (const auto& l : layers_) {
    for (auto* p : l.parameters()) out.push_back(p);
  }
  return out;
}

template <class T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

template <class T>
NetworkTrace<T> forward(ad::Tape<T>& tape, const Network<T>& net, const Tensor<T>& x,
                        RngStream& rng, Phase phase, T tau, bool trainable) {
  if (x.rank() != 2 || x.cols() != net.input_dim()) {
    throw DimensionError("forward: input " + shape_str(x.shape()) + " vs network input width " +
                         std::to_string(net.input_dim()));
  }
  const std::size_t n = x.rows();
  const T floor = static_cast<T>(kLogVarFloor);
  NetworkTrace<T> trace;
  ad::Var<T> h = tape.constant(x);

  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    const auto& spec = layer.spec;
    RngStream layer_rng = rng.derive(noise_tag::kLayerBase + l);
    LayerTrace<T> lt;
    lt.spec = spec;

    lt.mu = tape.leaf(layer.mu, trainable);
    trace.params.push_back(lt.mu);
    if (layer.gaussian()) {
      lt.log_var = tape.leaf(layer.log_var, trainable);
      trace.params.push_back(lt.log_var);
      Tensor<T> eps(layer.mu.shape());
      RngStream noise = layer_rng.derive(noise_tag::kWeights);
      fill_std_normal(noise, eps);
      lt.log_var_used = ad::clamp_min(lt.log_var, floor);
      lt.weights = ad::gaussian_reparam(lt.mu, lt.log_var_used, eps);
    } else {
      lt.weights = lt.mu;
    }

    ad::Var<T> logits = ad::matmul(h, lt.weights);

    if (spec.bias) {
      lt.bias_mu = tape.leaf(layer.bias_mu, trainable);
      trace.params.push_back(lt.bias_mu);
      if (layer.gaussian()) {
        lt.bias_log_var = tape.leaf(layer.bias_log_var, trainable);
        trace.params.push_back(lt.bias_log_var);
        Tensor<T> eps(layer.bias_mu.shape());
        RngStream noise = layer_rng.derive(noise_tag::kBias);
        fill_std_normal(noise, eps);
        lt.bias_log_var_used = ad::clamp_min(lt.bias_log_var, floor);
        lt.bias = ad::gaussian_reparam(lt.bias_mu, lt.bias_log_var_used, eps);
      } else {
        lt.bias = lt.bias_mu;
      }
      logits = ad::add_row(logits, lt.bias);
    }
    lt.logits = logits;

    switch (spec.activation) {
      case Activation::stochastic_lwta: {
        Tensor<T> u({n, spec.out_dim()});
        RngStream noise = layer_rng.derive(noise_tag::kWinners);
        fill_uniform(noise, u);
        const Tensor<T> g = gumbel_from_uniform(u);
        if (phase == Phase::train) {
          lt.relaxed = ad::gumbel_softmax(logits, g, tau, spec.block_size);
          h = ad::mul(lt.relaxed, logits);
        } else {
          Tensor<T> perturbed = logits.value();
          for (std::size_t i = 0; i < perturbed.size(); ++i) perturbed[i] += g[i];
          h = ad::mul(tape.constant(hard_argmax(perturbed, spec.block_size)), logits);
        }
        break;
      }
      case Activation::deterministic_lwta:
        h = ad::mul(tape.constant(hard_argmax(logits.value(), spec.block_size)), logits);
        break;
      case Activation::relu:
        h = ad::relu(logits);
        break;
      case Activation::linear:
        h = logits;
        break;
    }
    trace.layers.push_back(lt);
  }
  trace.output = h;
  return trace;
}

template <class T>
Tensor<T> predict_once(const Network<T>& net, const Tensor<T>& x, RngStream& rng, Phase phase,
                       T tau) {
  ad::Tape<T> tape;
  return forward(tape, net, x, rng, phase, tau, false).output.value();
}

template class Network<float>;
template class Network<double>;
template NetworkTrace<float> forward(ad::Tape<float>&, const Network<float>&,
                                     const Tensor<float>&, RngStream&, Phase, float, bool);
template NetworkTrace<double> forward(ad::Tape<double>&, const Network<double>&,
                                      const Tensor<double>&, RngStream&, Phase, double, bool);
template Tensor<float> predict_once(const Network<float>&, const Tensor<float>&, RngStream&,
                                    Phase, float);
template Tensor<double> predict_once(const Network<double>&, const Tensor<double>&, RngStream&,
                                     Phase, double);

}  // namespace lwta
