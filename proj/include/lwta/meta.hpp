#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "lwta/network.hpp"
#include "lwta/objective.hpp"
#include "lwta/rng.hpp"
#include "lwta/tasks.hpp"

namespace lwta {

struct MetaConfig {
  double inner_lr = 0.003;
  double outer_step = 0.25;  // beta_0, annealed linearly to 0 over total_iters
  std::size_t task_batch = 50;
  std::size_t inner_steps = 1;
  std::size_t eval_inner_steps = 10;
  std::size_t total_iters = 1000;
  double tau = 0.67;
  double kl_weight = 1.0;  // multiplies both KL terms in the descended loss
  double grad_clip = 0.0;  // max global gradient norm per inner step, 0 = off
  std::size_t predict_samples = 4;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
  // beta_0 (1 - iter / total_iters), clamped to [0, beta_0].
  double outer_step_at(std::size_t iter) const;
};

template <class T>
struct TrainState {
  Network<T> net;
  std::size_t iter = 0;
};

struct MetricRecord {
  std::size_t iter = 0;
  double elbo_total = 0.0;
  double likelihood = 0.0;
  double kl_xi = 0.0;
  double kl_w = 0.0;
  std::optional<double> eval_metric;
  double wallclock_ms = 0.0;
};

// Sub-stream tags under a task stream.
namespace task_tag {
inline constexpr std::uint64_t kEpisode = 1;
inline constexpr std::uint64_t kAdapt = 2;
inline constexpr std::uint64_t kPredict = 3;
}  // namespace task_tag

// Stream owned by task `task_index` of outer iteration `iter`.
RngStream task_stream(std::uint64_t seed, std::uint64_t iter, std::uint64_t task_index);

struct AdaptOptions {
  std::size_t steps = 1;
  double lr = 0.003;
  double tau = 0.67;
  double kl_weight = 1.0;
  double grad_clip = 0.0;

  static AdaptOptions from(const MetaConfig& c, std::size_t steps) {
    return {steps, c.inner_lr, c.tau, c.kl_weight, c.grad_clip};
  }
};

template <class T>
struct Adapted {
  Network<T> net;
  ElboBreakdown first_step;  // ELBO at the start of adaptation
};

// opt.steps SGD updates on the negative ELBO, step s sampling from rng.derive(s).
// A non-finite loss or gradient throws DivergenceError carrying `iteration`.
template <class T>
Adapted<T> inner_adapt(const Network<T>& psi, const Tensor<T>& x, const Tensor<T>& y,
                       TaskType task, const AdaptOptions& opt, const RngStream& rng,
                       std::size_t iteration = 0);

// psi <- (1 - beta) psi + beta mean_i psi'_i at beta = outer_step_at(state.iter).
template <class T>
void outer_update(TrainState<T>& state, const std::vector<Network<T>>& adapted,
                  const MetaConfig& config);

template <class T>
struct TrainHooks {
  // Called after each outer update; may fill record.eval_metric.
  std::function<void(const TrainState<T>&, MetricRecord&)> on_iteration;
  // Called with the last consistent state before an error propagates.
  std::function<void(const TrainState<T>&)> on_abort;
};

// Runs outer iterations state.iter .. config.total_iters - 1.
template <class T>
std::vector<MetricRecord> meta_train(TrainState<T>& state, const MetaConfig& config,
                                     const TaskSource<T>& source, const TrainHooks<T>& hooks = {});

template <class T>
struct BmaPrediction {
  Tensor<T> mean;
  std::vector<Tensor<T>> samples;
};

// B forward passes with hard winners, sample s drawing from rng.derive(s).
template <class T>
BmaPrediction<T> predict_bma(const Network<T>& net, const Tensor<T>& x, std::size_t samples,
                             double tau, const RngStream& rng);

// Adapts on the support set (skipped when empty or steps == 0), then predicts on x_query.
template <class T>
BmaPrediction<T> adapt_then_predict(const Network<T>& psi, const Tensor<T>& support_x,
                                    const Tensor<T>& support_y, const Tensor<T>& query_x,
                                    TaskType task, const MetaConfig& config,
                                    std::size_t inner_steps, const RngStream& rng);

template <class T>
double mse(const Tensor<T>& pred, const Tensor<T>& target);

// Fraction of rows whose argmax matches the label.
template <class T>
double accuracy(const Tensor<T>& logits, const Tensor<T>& labels);

struct EvalSummary {
  double mean = 0.0;
  double stddev = 0.0;
  double predict_ms = 0.0;  // mean wallclock of one adapt_then_predict
  std::vector<double> per_task;
};

// Held-out episodes come from RngStream(eval_seed, stream_hash(kEvalStream, t)).
inline constexpr std::uint64_t kEvalStream = 0xe7a1'0000'0000'0001ULL;

RngStream eval_stream(std::uint64_t eval_seed, std::size_t task);

// MSE for regression, accuracy for classification, after `inner_steps` of adaptation.
template <class T>
EvalSummary evaluate(const Network<T>& psi, const TaskSource<T>& source, const MetaConfig& config,
                     std::size_t num_tasks, std::uint64_t eval_seed, std::size_t inner_steps);

}  // namespace lwta
