#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "lwta/meta.hpp"
#include "lwta/tasks.hpp"

namespace lwta {

enum class QueryStrategy { max_variance, random };

std::string_view to_string(QueryStrategy s);
QueryStrategy parse_query_strategy(std::string_view s);

struct ActiveLearningOptions {
  std::size_t initial_points = 5;
  std::size_t query_budget = 5;
  std::size_t candidate_pool = 100;  // evenly spaced over the sinusoid x range
  QueryStrategy strategy = QueryStrategy::max_variance;
};

struct ActiveLearningTrace {
  // Held-out MSE after the initial fit, then after each query.
  std::vector<double> mse;
  // Pool indices in query order.
  std::vector<std::size_t> queried;
  SinusoidParams params;
};

// Index of the largest entry among candidates not yet taken; ties go to the
// lowest index.
std::size_t select_max_variance(const std::vector<double>& variance,
                                const std::vector<bool>& taken);

// Per-row variance across the B sampled outputs (population variance).
template <class T>
std::vector<double> sample_variance(const std::vector<Tensor<T>>& samples);

// One task: fit on the initial points, then repeatedly query a pool point,
// reveal its label and re-adapt from psi on everything labelled so far.
// Every fit uses config.eval_inner_steps.
template <class T>
ActiveLearningTrace active_learning_run(const Network<T>& psi, const SinusoidSpec& spec,
                                        const ActiveLearningOptions& opt,
                                        const MetaConfig& config, const RngStream& rng);

}  // namespace lwta
