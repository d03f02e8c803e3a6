#pragma once

// Builds networks, task sources and configs from a Config and drives the
// train / eval / active-learn / sweep workflows behind the command line.

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lwta/active_learning.hpp"
#include "lwta/checkpoint.hpp"
#include "lwta/config.hpp"
#include "lwta/meta.hpp"
#include "lwta/tasks.hpp"

namespace lwta {

inline constexpr std::uint64_t kInitStream = 0x1217'0000'0000'0001ULL;

struct TaskSetup {
  std::string name;
  TaskType type = TaskType::regression;
  std::unique_ptr<TaskSource<float>> train;
  std::unique_ptr<TaskSource<float>> eval;
  std::optional<SinusoidSpec> sine;
};

TaskSetup make_tasks(const Config& cfg);
Architecture make_architecture(const Config& cfg, const TaskSetup& tasks);
MetaConfig make_meta_config(const Config& cfg);

// Deterministic initialization from (seed, init_log_var_shift).
Network<float> init_network(const Config& cfg, const TaskSetup& tasks);

// Shortest round-tripping decimal form.
std::string format_double(double v);

inline constexpr const char* kMetricsHeader =
    "iter,elbo_total,likelihood,kl_xi,kl_w,eval_metric,wallclock_ms";
std::string metrics_row(const MetricRecord& r);

struct TrainResult {
  TrainState<float> state;
  std::vector<MetricRecord> metrics;
};

// Trains per cfg. Writes the checkpoint (every checkpoint_every iterations,
// at exit and before a divergence abort) and appends metrics when the
// respective paths are non-empty. Resumes when resume=true and the
// checkpoint exists.
TrainResult run_train(const Config& cfg, std::ostream* log = nullptr);

// cfg with the checkpoint's stored config underneath `overrides`.
Config merged_config(const Checkpoint& ck, const std::vector<std::pair<std::string, std::string>>& overrides);

EvalSummary run_eval(const Config& cfg, const Network<float>& net);

struct ActiveLearningSummary {
  std::vector<double> mean_mse;  // per step, step 0 = initial fit
  std::vector<double> std_mse;
  std::vector<ActiveLearningTrace> traces;
};

ActiveLearningSummary run_active_learning(const Config& cfg, const Network<float>& net);
void write_active_learning_csv(std::ostream& os, const ActiveLearningSummary& s);

struct SweepRow {
  std::string axis;
  std::size_t value = 0;
  std::size_t parameters = 0;
  double metric_mean = 0.0;
  double metric_std = 0.0;
  double train_ms_per_iter = 0.0;
  double predict_ms = 0.0;
};

std::vector<SweepRow> run_sweep(const Config& cfg, std::ostream* log = nullptr);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_eval_csv(std::ostream& os, const std::string& metric, const EvalSummary& s);

}  // namespace lwta
