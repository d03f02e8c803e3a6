// Command-line driver: train, eval, active-learn, sweep, config.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lwta/error.hpp"
#include "lwta/runner.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kDivergence = 4 };

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (auto& c : f) {
    if (c == '_') c = '-';
  }
  return "--" + f;
}

// Every config key becomes --key-with-dashes on every subcommand.
struct Overrides {
  std::map<std::string, std::string> values;
  std::string config_file;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_file, "flat key=value config file");
    for (const auto& k : lwta::config_keys()) {
      sub->add_option(flag_name(k.name), values[k.name], k.help);
    }
  }

  std::vector<std::pair<std::string, std::string>> given(const CLI::App* sub) const {
    std::vector<std::pair<std::string, std::string>> out;
    if (!config_file.empty()) {
      const lwta::Config file = lwta::Config::from_file(config_file);
      const lwta::Config defaults;
      for (const auto& [k, v] : file.entries()) {
        if (v != defaults.get(k)) out.emplace_back(k, v);
      }
    }
    for (const auto& k : lwta::config_keys()) {
      if (sub->count(flag_name(k.name)) > 0) out.emplace_back(k.name, values.at(k.name));
    }
    return out;
  }
};

lwta::Config build_config(const std::vector<std::pair<std::string, std::string>>& overrides) {
  lwta::Config cfg;
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

template <class Fn>
void with_output(const lwta::Config& cfg, Fn&& fn) {
  const std::string& path = cfg.str("out");
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw lwta::ConfigError("cannot open output file " + path);
  fn(os);
}

int cmd_train(const lwta::Config& cfg) {
  const auto res = lwta::run_train(cfg, &std::cerr);
  std::cerr << "trained " << res.state.iter << " iterations";
  if (!cfg.str("checkpoint").empty()) std::cerr << ", checkpoint " << cfg.str("checkpoint");
  std::cerr << '\n';
  return kOk;
}

lwta::Config checkpoint_config(const std::string& path,
                               const std::vector<std::pair<std::string, std::string>>& overrides,
                               lwta::Checkpoint& ck) {
  ck = lwta::load_checkpoint(path);
  return lwta::merged_config(ck, overrides);
}

std::string checkpoint_path(const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::string path = lwta::Config().str("checkpoint");
  for (const auto& [k, v] : overrides) {
    if (k == "checkpoint") path = v;
  }
  return path;
}

int cmd_eval(const std::vector<std::pair<std::string, std::string>>& overrides) {
  lwta::Checkpoint ck;
  const lwta::Config cfg = checkpoint_config(checkpoint_path(overrides), overrides, ck);
  const auto summary = lwta::run_eval(cfg, ck.net);
  const std::string metric = lwta::make_tasks(cfg).type == lwta::TaskType::regression ? "mse"
                                                                                      : "accuracy";
  with_output(cfg, [&](std::ostream& os) { lwta::write_eval_csv(os, metric, summary); });
  return kOk;
}

int cmd_active_learn(const std::vector<std::pair<std::string, std::string>>& overrides) {
  lwta::Checkpoint ck;
  const lwta::Config cfg = checkpoint_config(checkpoint_path(overrides), overrides, ck);
  lwta::parse_query_strategy(cfg.str("strategy"));
  const auto summary = lwta::run_active_learning(cfg, ck.net);
  with_output(cfg, [&](std::ostream& os) { lwta::write_active_learning_csv(os, summary); });
  return kOk;
}

int cmd_sweep(const lwta::Config& cfg) {
  const auto rows = lwta::run_sweep(cfg, &std::cerr);
  with_output(cfg, [&](std::ostream& os) { lwta::write_sweep_csv(os, rows); });
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learning with stochastic local winner-takes-all networks"};
  app.require_subcommand(1);

  Overrides train_o, eval_o, al_o, sweep_o, config_o;
  auto* train = app.add_subcommand("train", "meta-train and write a checkpoint plus metrics CSV");
  auto* eval = app.add_subcommand("eval", "adapt and predict on held-out tasks from a checkpoint");
  auto* al = app.add_subcommand("active-learn", "active learning MSE trace from a checkpoint");
  auto* sweep = app.add_subcommand("sweep", "train and evaluate one run per sweep value");
  auto* config = app.add_subcommand("config", "print the effective configuration");
  bool dump = false;
  config->add_flag("--dump", dump, "print every key with its value");
  train_o.attach(train);
  eval_o.attach(eval);
  al_o.attach(al);
  sweep_o.attach(sweep);
  config_o.attach(config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ExtrasError& e) {
    std::cerr << "error: " << e.what() << "\n" << lwta::valid_keys_message() << '\n';
    return kConfig;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (train->parsed()) return cmd_train(build_config(train_o.given(train)));
    if (eval->parsed()) return cmd_eval(eval_o.given(eval));
    if (al->parsed()) return cmd_active_learn(al_o.given(al));
    if (sweep->parsed()) return cmd_sweep(build_config(sweep_o.given(sweep)));
    if (config->parsed()) {
      build_config(config_o.given(config)).dump(std::cout);
      return kOk;
    }
  } catch (const lwta::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const lwta::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const lwta::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kDivergence;
  } catch (const lwta::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const lwta::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
