#include "lwta/meta.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "lwta/autodiff.hpp"
#include "lwta/error.hpp"
#include "lwta/kernels.hpp"

namespace lwta {

void MetaConfig::validate() const {
  if (!(inner_lr >= 0.0) || !std::isfinite(inner_lr)) throw ConfigError("inner_lr must be >= 0");
  if (!(outer_step >= 0.0) || outer_step > 1.0) throw ConfigError("outer_step must be in [0, 1]");
  if (task_batch == 0) throw ConfigError("task_batch must be >= 1");
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (!(kl_weight >= 0.0)) throw ConfigError("kl_weight must be >= 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
  if (predict_samples == 0) throw ConfigError("predict_samples must be >= 1");
  if (threads == 0) throw ConfigError("threads must be >= 1");
}

double MetaConfig::outer_step_at(std::size_t iter) const {
  if (total_iters == 0 || iter >= total_iters) return 0.0;
  const double frac = static_cast<double>(iter) / static_cast<double>(total_iters);
  return std::max(0.0, outer_step * (1.0 - frac));
}

RngStream task_stream(std::uint64_t seed, std::uint64_t iter, std::uint64_t task_index) {
  return RngStream(seed, stream_hash(iter, task_index));
}

RngStream eval_stream(std::uint64_t eval_seed, std::size_t task) {
  return RngStream(eval_seed, stream_hash(kEvalStream, task));
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. The exception of the
// lowest failing index is rethrown, so errors do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t k = std::min(threads, n);
  for (std::size_t t = 1; t < k; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

template <class T>
Adapted<T> inner_adapt(const Network<T>& psi, const Tensor<T>& x, const Tensor<T>& y,
                       TaskType task, const AdaptOptions& opt, const RngStream& rng,
                       std::size_t iteration) {
  if (x.empty() || y.empty()) throw ContractError("inner_adapt: empty episode");
  Adapted<T> out{psi, {}};
  const T step = static_cast<T>(-opt.lr);
  const T tau = static_cast<T>(opt.tau);
  const auto& k = kernels::table<T>();
  for (std::size_t s = 0; s < opt.steps; ++s) {
    RngStream sample_rng = rng.derive(s);
    ad::Tape<T> tape;
    ElboGraph<T> g;
    try {
      g = build_elbo(tape, out.net, x, y, task, sample_rng, tau, true,
                     static_cast<T>(opt.kl_weight));
    } catch (const NumericError& e) {
      // non-finite activations surface inside the forward pass
      throw DivergenceError(std::string(e.what()) + " at inner step " + std::to_string(s) +
                                " of outer iteration " + std::to_string(iteration),
                            iteration);
    }
    const ElboBreakdown b = g.breakdown();
    if (s == 0) out.first_step = b;
    if (!std::isfinite(b.total)) {
      throw DivergenceError("non-finite ELBO at inner step " + std::to_string(s) +
                                " of outer iteration " + std::to_string(iteration),
                            iteration);
    }
    tape.backward(g.loss);
    auto params = out.net.parameters();
    double norm2 = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
      const Tensor<T>& grad = g.trace.params[p].grad();
      for (T v : grad.data()) norm2 += static_cast<double>(v) * static_cast<double>(v);
    }
    if (!std::isfinite(norm2)) {
      throw DivergenceError("non-finite gradient at inner step " + std::to_string(s) +
                                " of outer iteration " + std::to_string(iteration),
                            iteration);
    }
    T scale = step;
    if (opt.grad_clip > 0.0 && norm2 > opt.grad_clip * opt.grad_clip) {
      scale = static_cast<T>(-opt.lr * opt.grad_clip / std::sqrt(norm2));
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
      const Tensor<T>& grad = g.trace.params[p].grad();
      k.axpy(grad.size(), scale, grad.ptr(), params[p]->ptr());
    }
  }
  if (opt.steps == 0) {
    RngStream sample_rng = rng.derive(0);
    out.first_step = task_elbo(psi, x, y, sample_rng, task, tau);
  }
  return out;
}

template <class T>
void outer_update(TrainState<T>& state, const std::vector<Network<T>>& adapted,
                  const MetaConfig& config) {
  if (adapted.empty()) throw ContractError("outer_update: no adapted parameters");
  const double beta = config.outer_step_at(state.iter);
  const auto& k = kernels::table<T>();
  auto params = state.net.parameters();

  // mean_i psi'_i, reduced in ascending task order.
  std::vector<Tensor<T>> mean;
  mean.reserve(params.size());
  for (const auto* p : params) mean.emplace_back(p->shape());
  const T inv_m = static_cast<T>(1.0 / static_cast<double>(adapted.size()));
  for (const auto& net : adapted) {
    auto src = net.parameters();
    if (src.size() != params.size()) throw DimensionError("outer_update: architecture mismatch");
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (!src[p]->same_shape(*params[p])) {
        throw DimensionError("outer_update: parameter shape mismatch");
      }
      k.axpy(mean[p].size(), inv_m, src[p]->ptr(), mean[p].ptr());
    }
  }
  if (beta > 0.0) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (beta == 1.0) {
        *params[p] = mean[p];
      } else {
        k.axpby(mean[p].size(), static_cast<T>(beta), mean[p].ptr(), static_cast<T>(1.0 - beta),
                params[p]->ptr());
      }
    }
  }
  ++state.iter;
}

template <class T>
std::vector<MetricRecord> meta_train(TrainState<T>& state, const MetaConfig& config,
                                     const TaskSource<T>& source, const TrainHooks<T>& hooks) {
  config.validate();
  std::vector<MetricRecord> metrics;
  const std::size_t m = config.task_batch;
  std::vector<Network<T>> adapted(m);
  std::vector<ElboBreakdown> elbo(m);

  while (state.iter < config.total_iters) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t iter = state.iter;
    try {
      parallel_for(m, config.threads, [&](std::size_t i) {
        const RngStream rng = task_stream(config.seed, iter, i);
        RngStream episode_rng = rng.derive(task_tag::kEpisode);
        const TaskEpisode<T> ep = source.sample(episode_rng);
        auto a = inner_adapt(state.net, ep.support_x, ep.support_y, ep.task_type,
                             AdaptOptions::from(config, config.inner_steps),
                             rng.derive(task_tag::kAdapt), iter);
        adapted[i] = std::move(a.net);
        elbo[i] = a.first_step;
      });
    } catch (...) {
      if (hooks.on_abort) hooks.on_abort(state);
      throw;
    }
    outer_update(state, adapted, config);

    MetricRecord rec;
    rec.iter = iter;
    for (const auto& b : elbo) {
      rec.elbo_total += b.total;
      rec.likelihood += b.likelihood_term;
      rec.kl_xi += b.kl_xi;
      rec.kl_w += b.kl_w;
    }
    const double inv = 1.0 / static_cast<double>(m);
    rec.elbo_total *= inv;
    rec.likelihood *= inv;
    rec.kl_xi *= inv;
    rec.kl_w *= inv;
    rec.wallclock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (hooks.on_iteration) hooks.on_iteration(state, rec);
    metrics.push_back(rec);
  }
  return metrics;
}

template <class T>
BmaPrediction<T> predict_bma(const Network<T>& net, const Tensor<T>& x, std::size_t samples,
                             double tau, const RngStream& rng) {
  if (samples == 0) throw ConfigError("predict_bma: B must be >= 1");
  BmaPrediction<T> out;
  out.samples.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    RngStream srng = rng.derive(s);
    out.samples.push_back(predict_once(net, x, srng, Phase::predict, static_cast<T>(tau)));
  }
  if (samples == 1) {
    out.mean = out.samples.front();
    return out;
  }
  out.mean = Tensor<T>(out.samples.front().shape());
  const T inv = static_cast<T>(1.0 / static_cast<double>(samples));
  for (const auto& s : out.samples) kernels::axpy<T>(inv, s.data(), out.mean.data());
  return out;
}

template <class T>
BmaPrediction<T> adapt_then_predict(const Network<T>& psi, const Tensor<T>& support_x,
                                    const Tensor<T>& support_y, const Tensor<T>& query_x,
                                    TaskType task, const MetaConfig& config,
                                    std::size_t inner_steps, const RngStream& rng) {
  const RngStream predict_rng = rng.derive(task_tag::kPredict);
  if (support_x.empty() || inner_steps == 0) {
    return predict_bma(psi, query_x, config.predict_samples, config.tau, predict_rng);
  }
  const auto a = inner_adapt(psi, support_x, support_y, task,
                             AdaptOptions::from(config, inner_steps), rng.derive(task_tag::kAdapt));
  return predict_bma(a.net, query_x, config.predict_samples, config.tau, predict_rng);
}

template <class T>
double mse(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw DimensionError("mse: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

template <class T>
double accuracy(const Tensor<T>& logits, const Tensor<T>& labels) {
  if (logits.rank() != 2 || logits.rows() != labels.size()) {
    throw DimensionError("accuracy: logits " + shape_str(logits.shape()) + " vs labels " +
                         shape_str(labels.shape()));
  }
  const auto y = labels_from(labels);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    hits += static_cast<std::int32_t>(best) == y[r];
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

template <class T>
EvalSummary evaluate(const Network<T>& psi, const TaskSource<T>& source, const MetaConfig& config,
                     std::size_t num_tasks, std::uint64_t eval_seed, std::size_t inner_steps) {
  if (num_tasks == 0) throw ConfigError("evaluation needs at least one task");
  EvalSummary out;
  out.per_task.resize(num_tasks);
  std::vector<double> ms(num_tasks);
  parallel_for(num_tasks, config.threads, [&](std::size_t t) {
    const RngStream rng = eval_stream(eval_seed, t);
    RngStream episode_rng = rng.derive(task_tag::kEpisode);
    const TaskEpisode<T> ep = source.sample(episode_rng);
    const auto t0 = std::chrono::steady_clock::now();
    BmaPrediction<T> pred;
    try {
      pred = adapt_then_predict(psi, ep.support_x, ep.support_y, ep.query_x, ep.task_type, config,
                                inner_steps, rng);
    } catch (const DivergenceError& e) {
      throw DivergenceError("evaluation task " + std::to_string(t) + ": " + e.what(),
                            e.iteration());
    }
    ms[t] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.per_task[t] = ep.task_type == TaskType::regression ? mse(pred.mean, ep.query_y)
                                                           : accuracy(pred.mean, ep.query_y);
  });
  for (std::size_t t = 0; t < num_tasks; ++t) {
    out.mean += out.per_task[t];
    out.predict_ms += ms[t];
  }
  out.mean /= static_cast<double>(num_tasks);
  out.predict_ms /= static_cast<double>(num_tasks);
  for (double v : out.per_task) out.stddev += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(out.stddev / static_cast<double>(num_tasks));
  return out;
}

#define LWTA_INSTANTIATE_META(T)                                                               \
  template Adapted<T> inner_adapt(const Network<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                  TaskType, const AdaptOptions&, const RngStream&,             \
                                  std::size_t);                                                \
  template void outer_update(TrainState<T>&, const std::vector<Network<T>>&,                   \
                             const MetaConfig&);                                               \
  template std::vector<MetricRecord> meta_train(TrainState<T>&, const MetaConfig&,             \
                                                const TaskSource<T>&, const TrainHooks<T>&);   \
  template BmaPrediction<T> predict_bma(const Network<T>&, const Tensor<T>&, std::size_t,      \
                                        double, const RngStream&);                             \
  template BmaPrediction<T> adapt_then_predict(const Network<T>&, const Tensor<T>&,            \
                                               const Tensor<T>&, const Tensor<T>&, TaskType,   \
                                               const MetaConfig&, std::size_t,                 \
                                               const RngStream&);                              \
  template double mse(const Tensor<T>&, const Tensor<T>&);                                     \
  template double accuracy(const Tensor<T>&, const Tensor<T>&);                                \
  template EvalSummary evaluate(const Network<T>&, const TaskSource<T>&, const MetaConfig&,    \
                                std::size_t, std::uint64_t, std::size_t);

LWTA_INSTANTIATE_META(float)
LWTA_INSTANTIATE_META(double)

}  // namespace lwta
