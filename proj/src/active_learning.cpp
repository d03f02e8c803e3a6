#include "lwta/active_learning.hpp"

#include "lwta/error.hpp"

namespace lwta {

namespace {

constexpr std::uint64_t kInitialTag = 11;
constexpr std::uint64_t kLabelTag = 12;
constexpr std::uint64_t kSelectTag = 13;
constexpr std::uint64_t kFitTag = 14;

}  // namespace

std::string_view to_string(QueryStrategy s) {
  return s == QueryStrategy::max_variance ? "max_variance" : "random";
}

QueryStrategy parse_query_strategy(std::string_view s) {
  if (s == "max_variance") return QueryStrategy::max_variance;
  if (s == "random") return QueryStrategy::random;
  throw ConfigError("unknown strategy '" + std::string(s) + "' (expected max_variance or random)");
}

std::size_t select_max_variance(const std::vector<double>& variance,
                                const std::vector<bool>& taken) {
  std::size_t best = variance.size();
  for (std::size_t i = 0; i < variance.size(); ++i) {
    if (i < taken.size() && taken[i]) continue;
    if (best == variance.size() || variance[i] > variance[best]) best = i;
  }
  if (best == variance.size()) throw ContractError("select_max_variance: every candidate taken");
  return best;
}

template <class T>
std::vector<double> sample_variance(const std::vector<Tensor<T>>& samples) {
  if (samples.empty()) throw ContractError("sample_variance: no samples");
  const std::size_t n = samples.front().size();
  const double b = static_cast<double>(samples.size());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (const auto& s : samples) mean += static_cast<double>(s[i]);
    mean /= b;
    double var = 0.0;
    for (const auto& s : samples) {
      const double d = static_cast<double>(s[i]) - mean;
      var += d * d;
    }
    out[i] = var / b;
  }
  return out;
}

template <class T>
ActiveLearningTrace active_learning_run(const Network<T>& psi, const SinusoidSpec& spec,
                                        const ActiveLearningOptions& opt,
                                        const MetaConfig& config, const RngStream& rng) {
  if (opt.initial_points == 0) throw ConfigError("active learning needs initial points");
  if (opt.query_budget > opt.candidate_pool) {
    throw ConfigError("query budget exceeds the candidate pool");
  }
  RngStream episode_rng = rng.derive(task_tag::kEpisode);
  const TaskEpisode<T> ep = sample_sinusoid_task<T>(spec, episode_rng);

  ActiveLearningTrace trace;
  trace.params = ep.params;

  // Labelled set: initial draws, then queried pool points appended as rows.
  const std::size_t max_rows = opt.initial_points + opt.query_budget;
  std::vector<T> xs, ys;
  xs.reserve(max_rows);
  ys.reserve(max_rows);
  RngStream init_rng = rng.derive(kInitialTag);
  for (std::size_t i = 0; i < opt.initial_points; ++i) {
    xs.push_back(static_cast<T>(init_rng.uniform(spec.x_lo, spec.x_hi)));
  }
  RngStream label_rng = rng.derive(kLabelTag);
  auto label = [&](T x) {
    double v = sinusoid_value(ep.params, static_cast<double>(x));
    if (spec.noise) v += spec.noise_scale * ep.params.amplitude * label_rng.normal();
    return static_cast<T>(v);
  };
  for (T x : xs) ys.push_back(label(x));

  const Tensor<T> pool = linspace_column<T>(spec.x_lo, spec.x_hi, opt.candidate_pool);
  std::vector<bool> taken(opt.candidate_pool, false);
  RngStream select_rng = rng.derive(kSelectTag);

  auto fit = [&](std::size_t round) {
    const std::size_t n = xs.size();
    const Tensor<T> x({n, 1}, xs);
    const Tensor<T> y({n, 1}, ys);
    return inner_adapt(psi, x, y, TaskType::regression,
                       AdaptOptions::from(config, config.eval_inner_steps),
                       rng.derive(kFitTag).derive(round))
        .net;
  };
  auto heldout = [&](const Network<T>& net, std::size_t round) {
    const auto pred = predict_bma(net, ep.query_x, config.predict_samples, config.tau,
                                  rng.derive(task_tag::kPredict).derive(2 * round));
    return mse(pred.mean, ep.query_y);
  };

  Network<T> net = fit(0);
  trace.mse.push_back(heldout(net, 0));
  for (std::size_t q = 0; q < opt.query_budget; ++q) {
    std::size_t pick = 0;
    if (opt.strategy == QueryStrategy::max_variance) {
      const auto pred = predict_bma(net, pool, config.predict_samples, config.tau,
                                    rng.derive(task_tag::kPredict).derive(2 * q + 1));
      pick = select_max_variance(sample_variance(pred.samples), taken);
    } else {
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < taken.size(); ++i) {
        if (!taken[i]) free.push_back(i);
      }
      pick = free[select_rng.index(free.size())];
    }
    taken[pick] = true;
    trace.queried.push_back(pick);
    xs.push_back(pool[pick]);
    ys.push_back(label(pool[pick]));
    net = fit(q + 1);
    trace.mse.push_back(heldout(net, q + 1));
  }
  return trace;
}

template std::vector<double> sample_variance(const std::vector<Tensor<float>>&);
template std::vector<double> sample_variance(const std::vector<Tensor<double>>&);
template ActiveLearningTrace active_learning_run(const Network<float>&, const SinusoidSpec&,
                                                 const ActiveLearningOptions&, const MetaConfig&,
                                                 const RngStream&);
template ActiveLearningTrace active_learning_run(const Network<double>&, const SinusoidSpec&,
                                                 const ActiveLearningOptions&, const MetaConfig&,
                                                 const RngStream&);

}  // namespace lwta
