#include "lwta/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "lwta/error.hpp"

namespace lwta {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"task", "sine-default", "sine-default | sine-challenging | synth-class | image-class"},
      {"activation", "stochastic_lwta", "stochastic_lwta | deterministic_lwta | relu"},
      {"weights", "gaussian", "gaussian | point"},
      {"blocks", "16,8", "blocks per hidden layer"},
      {"block_size", "2", "competing units per block"},
      {"bias", "auto", "true | false | auto (on for sine tasks)"},
      {"init_log_var_shift", "0", "added to the initial log-variances"},
      {"inner_lr", "0.003", "inner SGD learning rate"},
      {"outer_step", "0.25", "initial outer interpolation step, annealed to 0"},
      {"iters", "1000", "outer iterations"},
      {"task_batch", "50", "tasks per outer iteration"},
      {"inner_steps", "1", "SGD steps per task during training"},
      {"eval_inner_steps", "10", "SGD steps per task at evaluation"},
      {"tau", "0.67", "Gumbel-softmax temperature"},
      {"samples", "4", "posterior samples averaged at prediction"},
      {"kl_weight", "1", "weight of both KL terms in the descended loss"},
      {"grad_clip", "0", "max inner gradient norm, 0 = off"},
      {"seed", "0", "root seed"},
      {"threads", "1", "worker threads for the task batch"},
      {"checkpoint", "checkpoint.lwck", "checkpoint path"},
      {"checkpoint_every", "1000", "iterations between checkpoints, 0 = only at exit"},
      {"resume", "false", "continue from an existing checkpoint"},
      {"metrics_out", "metrics.csv", "per-iteration metrics CSV"},
      {"eval_every", "0", "iterations between evaluations during training, 0 = never"},
      {"num_eval_tasks", "100", "held-out tasks per evaluation"},
      {"eval_seed", "1000003", "seed of the held-out task stream"},
      {"n_way", "5", "classes per episode"},
      {"k_shot", "1", "support examples per class"},
      {"query_per_class", "15", "query examples per class"},
      {"feature_dim", "16", "synthetic classification input width"},
      {"dataset_dir", "", "image-class dataset root"},
      {"split", "train", "image-class training split"},
      {"eval_split", "test", "image-class evaluation split"},
      {"strategy", "max_variance", "active learning: max_variance | random"},
      {"num_tasks", "50", "active learning tasks"},
      {"initial_points", "5", "active learning labelled points at start"},
      {"query_budget", "5", "active learning queries"},
      {"candidate_pool", "100", "active learning pool size"},
      {"sweep_axis", "block_size", "block_size | task_batch | samples"},
      {"sweep_values", "2,4,8", "comma separated sweep values"},
      {"out", "", "output CSV path for eval, active-learn and sweep (empty = stdout)"},
  };
  return keys;
}

std::string valid_keys_message() {
  std::string msg = "valid keys:";
  for (const auto& k : config_keys()) msg += " " + k.name;
  return msg;
}

Config::Config() {
  for (const auto& k : config_keys()) entries_.emplace_back(k.name, k.default_value);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Config Config::parse(std::istream& is, std::string_view origin) {
  Config c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    c.set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
  return c;
}

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

void Config::set(std::string_view key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'; " + valid_keys_message());
}

bool Config::has(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == key; });
}

const std::string& Config::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'; " + valid_keys_message());
}

double Config::real(std::string_view key) const {
  const std::string& v = get(key);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t Config::u64(std::string_view key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t Config::count(std::string_view key) const {
  return static_cast<std::size_t>(u64(key));
}

bool Config::flag(std::string_view key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> Config::list(std::string_view key) const {
  std::vector<std::string> out;
  const std::string& v = get(key);
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const std::string item =
        trim(std::string_view(v).substr(start, comma == std::string::npos ? v.npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::size_t> Config::counts(std::string_view key) const {
  std::vector<std::size_t> out;
  for (const auto& item : list(key)) {
    std::size_t n = 0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), n);
    if (ec != std::errc() || p != item.data() + item.size()) {
      throw ConfigError(std::string(key) + ": expected comma separated integers, got '" +
                        get(key) + "'");
    }
    out.push_back(n);
  }
  return out;
}

void Config::dump(std::ostream& os) const {
  for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
}

}  // namespace lwta
