#include "lwta/runner.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "lwta/error.hpp"

namespace lwta {

TaskSetup make_tasks(const Config& cfg) {
  TaskSetup t;
  t.name = cfg.str("task");
  if (t.name == "sine-default" || t.name == "sine-challenging") {
    t.type = TaskType::regression;
    t.sine = t.name == "sine-default" ? SinusoidSpec::default_setting()
                                      : SinusoidSpec::challenging();
    t.train = std::make_unique<SinusoidSource<float>>(*t.sine);
    t.eval = std::make_unique<SinusoidSource<float>>(*t.sine);
  } else if (t.name == "synth-class") {
    t.type = TaskType::classification;
    const auto n = cfg.count("n_way"), k = cfg.count("k_shot"), q = cfg.count("query_per_class"),
               d = cfg.count("feature_dim");
    t.train = std::make_unique<SyntheticClassSource<float>>(n, k, q, d);
    t.eval = std::make_unique<SyntheticClassSource<float>>(n, k, q, d);
  } else if (t.name == "image-class") {
    t.type = TaskType::classification;
    if (cfg.str("dataset_dir").empty()) throw ConfigError("image-class needs dataset_dir");
    auto data = std::make_shared<const ImageDataset>(cfg.str("dataset_dir"));
    if (data->feature_dim() == 0) throw DataError("dataset holds no STLW items");
    const auto n = cfg.count("n_way"), k = cfg.count("k_shot"), q = cfg.count("query_per_class");
    t.train = std::make_unique<ImageSource<float>>(data, n, k, q, cfg.str("split"));
    t.eval = std::make_unique<ImageSource<float>>(data, n, k, q, cfg.str("eval_split"));
  } else {
    throw ConfigError("unknown task '" + t.name +
                      "' (expected sine-default, sine-challenging, synth-class or image-class)");
  }
  return t;
}

Architecture make_architecture(const Config& cfg, const TaskSetup& tasks) {
  Architecture a;
  a.input_dim = tasks.train->input_dim();
  a.output_dim = tasks.train->output_dim();
  a.blocks = cfg.counts("blocks");
  a.block_size = cfg.count("block_size");
  if (a.blocks.empty() || a.block_size == 0 ||
      std::find(a.blocks.begin(), a.blocks.end(), 0u) != a.blocks.end()) {
    throw ConfigError("blocks and block_size must be >= 1");
  }
  a.activation = parse_activation(cfg.str("activation"));
  if (a.activation == Activation::linear) throw ConfigError("hidden layers cannot be linear");
  a.weight_mode = parse_weight_mode(cfg.str("weights"));
  const std::string& bias = cfg.str("bias");
  a.bias = bias == "auto" ? tasks.type == TaskType::regression : cfg.flag("bias");
  return a;
}

MetaConfig make_meta_config(const Config& cfg) {
  MetaConfig m;
  m.inner_lr = cfg.real("inner_lr");
  m.outer_step = cfg.real("outer_step");
  m.task_batch = cfg.count("task_batch");
  m.inner_steps = cfg.count("inner_steps");
  m.eval_inner_steps = cfg.count("eval_inner_steps");
  m.total_iters = cfg.count("iters");
  m.tau = cfg.real("tau");
  m.kl_weight = cfg.real("kl_weight");
  m.grad_clip = cfg.real("grad_clip");
  m.predict_samples = cfg.count("samples");
  m.seed = cfg.u64("seed");
  m.threads = cfg.count("threads");
  m.validate();
  return m;
}

Network<float> init_network(const Config& cfg, const TaskSetup& tasks) {
  RngStream rng(cfg.u64("seed"), kInitStream);
  return Network<float>::init(make_architecture(cfg, tasks).layer_specs(), rng,
                              cfg.real("init_log_var_shift"));
}

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string metrics_row(const MetricRecord& r) {
  std::string s = std::to_string(r.iter);
  for (double v : {r.elbo_total, r.likelihood, r.kl_xi, r.kl_w}) s += "," + format_double(v);
  s += ",";
  if (r.eval_metric) s += format_double(*r.eval_metric);
  s += "," + format_double(r.wallclock_ms);
  return s;
}

namespace {

Checkpoint make_checkpoint(const Config& cfg, const TrainState<float>& st) {
  Checkpoint ck;
  ck.iteration = st.iter;
  ck.seed = cfg.u64("seed");
  ck.config = cfg.entries();
  ck.net = st.net;
  return ck;
}

void check_dims(const Network<float>& net, const TaskSetup& tasks) {
  if (net.input_dim() != tasks.eval->input_dim() || net.output_dim() != tasks.eval->output_dim()) {
    throw ConfigError("task '" + tasks.name + "' needs a " +
                      std::to_string(tasks.eval->input_dim()) + " -> " +
                      std::to_string(tasks.eval->output_dim()) + " network, checkpoint holds " +
                      std::to_string(net.input_dim()) + " -> " +
                      std::to_string(net.output_dim()));
  }
}

}  // namespace

TrainResult run_train(const Config& cfg, std::ostream* log) {
  const TaskSetup tasks = make_tasks(cfg);
  const MetaConfig meta = make_meta_config(cfg);
  const auto specs = make_architecture(cfg, tasks).layer_specs();
  const std::string ck_path = cfg.str("checkpoint");
  const std::string metrics_path = cfg.str("metrics_out");
  const bool resume = cfg.flag("resume") && !ck_path.empty() && std::filesystem::exists(ck_path);

  TrainResult res;
  if (resume) {
    Checkpoint ck = load_checkpoint(ck_path);
    if (ck.net.specs() != specs) {
      throw CheckpointError("resume: checkpoint architecture differs from the configured one");
    }
    if (ck.seed != meta.seed) {
      throw CheckpointError("resume: checkpoint seed " + std::to_string(ck.seed) +
                            " differs from configured seed " + std::to_string(meta.seed));
    }
    res.state = TrainState<float>{std::move(ck.net), ck.iteration};
  } else {
    res.state = TrainState<float>{init_network(cfg, tasks), 0};
  }

  std::ofstream metrics;
  if (!metrics_path.empty()) {
    const bool fresh = !resume || !std::filesystem::exists(metrics_path) ||
                       std::filesystem::file_size(metrics_path) == 0;
    metrics.open(metrics_path, fresh ? std::ios::trunc : std::ios::app);
    if (!metrics) throw ConfigError("cannot open metrics file " + metrics_path);
    if (fresh) metrics << kMetricsHeader << '\n';
  }

  const std::size_t eval_every = cfg.count("eval_every");
  const std::size_t ck_every = cfg.count("checkpoint_every");
  const std::size_t num_eval = cfg.count("num_eval_tasks");
  const std::uint64_t eval_seed = cfg.u64("eval_seed");
  const std::size_t log_every = std::max<std::size_t>(1, meta.total_iters / 20);

  TrainHooks<float> hooks;
  hooks.on_iteration = [&](const TrainState<float>& st, MetricRecord& rec) {
    if (eval_every > 0 && st.iter % eval_every == 0) {
      rec.eval_metric =
          evaluate(st.net, *tasks.eval, meta, num_eval, eval_seed, meta.eval_inner_steps).mean;
    }
    if (metrics.is_open()) metrics << metrics_row(rec) << '\n' << std::flush;
    if (!ck_path.empty() && ck_every > 0 && st.iter % ck_every == 0) {
      save_checkpoint(ck_path, make_checkpoint(cfg, st));
    }
    if (log && st.iter % log_every == 0) {
      *log << "iter " << st.iter << "/" << meta.total_iters << " elbo " << rec.elbo_total;
      if (rec.eval_metric) *log << " eval " << *rec.eval_metric;
      *log << '\n';
    }
  };
  hooks.on_abort = [&](const TrainState<float>& st) {
    if (!ck_path.empty()) save_checkpoint(ck_path, make_checkpoint(cfg, st));
  };

  res.metrics = meta_train(res.state, meta, *tasks.train, hooks);
  if (!ck_path.empty()) save_checkpoint(ck_path, make_checkpoint(cfg, res.state));
  return res;
}

Config merged_config(const Checkpoint& ck,
                     const std::vector<std::pair<std::string, std::string>>& overrides) {
  Config cfg;
  for (const auto& [k, v] : ck.config) {
    if (cfg.has(k)) cfg.set(k, v);
  }
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

EvalSummary run_eval(const Config& cfg, const Network<float>& net) {
  const TaskSetup tasks = make_tasks(cfg);
  check_dims(net, tasks);
  const MetaConfig meta = make_meta_config(cfg);
  return evaluate(net, *tasks.eval, meta, cfg.count("num_eval_tasks"), cfg.u64("eval_seed"),
                  meta.eval_inner_steps);
}

ActiveLearningSummary run_active_learning(const Config& cfg, const Network<float>& net) {
  const TaskSetup tasks = make_tasks(cfg);
  if (!tasks.sine) throw ConfigError("active learning needs a sinusoid task");
  check_dims(net, tasks);
  const MetaConfig meta = make_meta_config(cfg);
  ActiveLearningOptions opt;
  opt.initial_points = cfg.count("initial_points");
  opt.query_budget = cfg.count("query_budget");
  opt.candidate_pool = cfg.count("candidate_pool");
  opt.strategy = parse_query_strategy(cfg.str("strategy"));
  const std::size_t n = cfg.count("num_tasks");
  if (n == 0) throw ConfigError("num_tasks must be >= 1");

  ActiveLearningSummary s;
  for (std::size_t t = 0; t < n; ++t) {
    s.traces.push_back(
        active_learning_run(net, *tasks.sine, opt, meta, eval_stream(cfg.u64("eval_seed"), t)));
  }
  const std::size_t steps = s.traces.front().mse.size();
  s.mean_mse.assign(steps, 0.0);
  s.std_mse.assign(steps, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    for (const auto& tr : s.traces) s.mean_mse[k] += tr.mse[k];
    s.mean_mse[k] /= static_cast<double>(n);
    for (const auto& tr : s.traces) {
      s.std_mse[k] += (tr.mse[k] - s.mean_mse[k]) * (tr.mse[k] - s.mean_mse[k]);
    }
    s.std_mse[k] = std::sqrt(s.std_mse[k] / static_cast<double>(n));
  }
  return s;
}

void write_active_learning_csv(std::ostream& os, const ActiveLearningSummary& s) {
  os << "step,mean_mse,std_mse\n";
  for (std::size_t k = 0; k < s.mean_mse.size(); ++k) {
    os << k << ',' << format_double(s.mean_mse[k]) << ',' << format_double(s.std_mse[k]) << '\n';
  }
}

std::vector<SweepRow> run_sweep(const Config& cfg, std::ostream* log) {
  const std::string axis = cfg.str("sweep_axis");
  if (axis != "block_size" && axis != "task_batch" && axis != "samples") {
    throw ConfigError("sweep_axis must be block_size, task_batch or samples, got '" + axis + "'");
  }
  const auto values = cfg.counts("sweep_values");
  if (values.empty()) throw ConfigError("sweep_values is empty");

  std::vector<SweepRow> rows;
  for (std::size_t v : values) {
    Config run = cfg;
    run.set(axis, std::to_string(v));
    run.set("checkpoint", "");
    run.set("metrics_out", "");
    run.set("resume", "false");
    if (log) *log << "sweep " << axis << "=" << v << '\n';
    const TrainResult tr = run_train(run, log);
    const EvalSummary ev = run_eval(run, tr.state.net);
    SweepRow row;
    row.axis = axis;
    row.value = v;
    row.parameters = tr.state.net.parameter_count();
    row.metric_mean = ev.mean;
    row.metric_std = ev.stddev;
    for (const auto& m : tr.metrics) row.train_ms_per_iter += m.wallclock_ms;
    if (!tr.metrics.empty()) row.train_ms_per_iter /= static_cast<double>(tr.metrics.size());
    row.predict_ms = ev.predict_ms;
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "axis,value,parameters,metric_mean,metric_std,train_ms_per_iter,predict_ms\n";
  for (const auto& r : rows) {
    os << r.axis << ',' << r.value << ',' << r.parameters << ',' << format_double(r.metric_mean)
       << ',' << format_double(r.metric_std) << ',' << format_double(r.train_ms_per_iter) << ','
       << format_double(r.predict_ms) << '\n';
  }
}

void write_eval_csv(std::ostream& os, const std::string& metric, const EvalSummary& s) {
  os << "metric,mean,std,predict_ms,tasks\n";
  os << metric << ',' << format_double(s.mean) << ',' << format_double(s.stddev) << ','
     << format_double(s.predict_ms) << ',' << s.per_task.size() << '\n';
}

}  // namespace lwta
