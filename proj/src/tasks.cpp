#include "lwta/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lwta/error.hpp"
#include "lwta/tensor_io.hpp"

namespace lwta {

SinusoidSpec SinusoidSpec::default_setting() { return SinusoidSpec{}; }

SinusoidSpec SinusoidSpec::challenging() {
  SinusoidSpec s;
  s.frequency_lo = 0.5;
  s.frequency_hi = 2.0;
  s.noise = true;
  return s;
}

void SinusoidSpec::validate() const {
  if (!(amplitude_lo <= amplitude_hi) || !(phase_lo <= phase_hi) ||
      !(frequency_lo <= frequency_hi) || !(x_lo < x_hi)) {
    throw ConfigError("sinusoid ranges must satisfy lo <= hi");
  }
  if (support_points == 0 || query_points == 0) {
    throw ConfigError("sinusoid tasks need at least one support and one query point");
  }
}

double sinusoid_value(const SinusoidParams& p, double x) {
  return p.amplitude * std::sin(p.frequency * x + p.phase);
}

template <class T>
Tensor<T> linspace_column(double lo, double hi, std::size_t n) {
  Tensor<T> x({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<T>(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) /
                                                static_cast<double>(n - 1));
  }
  return x;
}

template <class T>
Tensor<T> sinusoid_targets(const SinusoidSpec& spec, const SinusoidParams& p, const Tensor<T>& x,
                           RngStream& rng) {
  Tensor<T> y({x.size(), 1});
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = sinusoid_value(p, static_cast<double>(x[i]));
    if (spec.noise) v += spec.noise_scale * p.amplitude * rng.normal();
    y[i] = static_cast<T>(v);
  }
  return y;
}

template <class T>
TaskEpisode<T> sample_sinusoid_task(const SinusoidSpec& spec, RngStream& rng) {
  TaskEpisode<T> ep;
  ep.task_type = TaskType::regression;
  ep.params.amplitude = rng.uniform(spec.amplitude_lo, spec.amplitude_hi);
  ep.params.frequency = spec.frequency_lo == spec.frequency_hi
                            ? spec.frequency_lo
                            : rng.uniform(spec.frequency_lo, spec.frequency_hi);
  ep.params.phase = rng.uniform(spec.phase_lo, spec.phase_hi);

  ep.support_x = Tensor<T>({spec.support_points, 1});
  for (auto& v : ep.support_x.data()) v = static_cast<T>(rng.uniform(spec.x_lo, spec.x_hi));
  ep.support_y = sinusoid_targets(spec, ep.params, ep.support_x, rng);
  ep.query_x = linspace_column<T>(spec.x_lo, spec.x_hi, spec.query_points);
  ep.query_y = sinusoid_targets(spec, ep.params, ep.query_x, rng);

  ep.support_ids.resize(spec.support_points);
  std::iota(ep.support_ids.begin(), ep.support_ids.end(), 0);
  ep.query_ids.resize(spec.query_points);
  std::iota(ep.query_ids.begin(), ep.query_ids.end(), spec.support_points);
  return ep;
}

template <class T>
TaskEpisode<T> sample_synthetic_classification_task(std::size_t n_way, std::size_t k_shot,
                                                    std::size_t query_per_class, std::size_t dim,
                                                    RngStream& rng, double spread) {
  if (n_way < 2) throw ConfigError("classification episodes need n_way >= 2");
  if (k_shot == 0 || query_per_class == 0 || dim == 0) {
    throw ConfigError("k_shot, query_per_class and dim must be >= 1");
  }
  std::vector<double> protos(n_way * dim);
  for (auto& v : protos) v = rng.uniform(-1.0, 1.0);

  auto draw = [&](std::size_t per_class, Tensor<T>& x, Tensor<T>& y, std::vector<std::size_t>& ids,
                  std::size_t id_base) {
    x = Tensor<T>({n_way * per_class, dim});
    y = Tensor<T>({n_way * per_class});
    for (std::size_t c = 0; c < n_way; ++c) {
      for (std::size_t k = 0; k < per_class; ++k) {
        const std::size_t row = c * per_class + k;
        for (std::size_t d = 0; d < dim; ++d) {
          x(row, d) = static_cast<T>(protos[c * dim + d] + spread * rng.normal());
        }
        y[row] = static_cast<T>(c);
        ids.push_back(id_base + row);
      }
    }
  };

  TaskEpisode<T> ep;
  ep.task_type = TaskType::classification;
  ep.n_way = n_way;
  ep.k_shot = k_shot;
  draw(k_shot, ep.support_x, ep.support_y, ep.support_ids, 0);
  draw(query_per_class, ep.query_x, ep.query_y, ep.query_ids, n_way * k_shot);
  return ep;
}

ImageDataset::ImageDataset(std::filesystem::path root) : root_(std::move(root)) {
  const auto manifest = root_ / "manifest.tsv";
  std::ifstream in(manifest);
  if (!in) throw ConfigError("dataset manifest not found: " + manifest.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(manifest.string() + ":" + std::to_string(lineno) +
                      ": expected 'class<TAB>split'");
    }
    ClassEntry e;
    e.name = line.substr(0, tab);
    e.split = line.substr(tab + 1);
    const auto dir = root_ / e.name;
    if (!std::filesystem::is_directory(dir)) {
      throw DataError("class directory missing: " + dir.string());
    }
    for (const auto& f : std::filesystem::directory_iterator(dir)) {
      if (f.is_regular_file() && f.path().extension() == ".stlw") e.items.push_back(f.path());
    }
    std::sort(e.items.begin(), e.items.end());
    classes_.push_back(std::move(e));
  }
  for (const auto& c : classes_) {
    if (c.items.empty()) continue;
    std::ifstream f(c.items.front(), std::ios::binary);
    feature_dim_ = std::visit([](const auto& t) { return t.size(); }, read_stlw_any(f));
    break;
  }
}

std::vector<std::string> ImageDataset::classes(const std::string& split) const {
  std::vector<std::string> out;
  for (const auto& c : classes_) {
    if (c.split == split) out.push_back(c.name);
  }
  return out;
}

const std::vector<std::filesystem::path>& ImageDataset::items(const std::string& cls) const {
  for (const auto& c : classes_) {
    if (c.name == cls) return c.items;
  }
  throw DataError("unknown class " + cls);
}

template <class T>
TaskEpisode<T> image_episode_sampler(const ImageDataset& data, std::size_t n_way,
                                     std::size_t k_shot, std::size_t query_per_class,
                                     const std::string& split, RngStream& rng) {
  if (n_way < 2) throw ConfigError("classification episodes need n_way >= 2");
  auto pool = data.classes(split);
  if (pool.size() < n_way) {
    throw DataError("split '" + split + "' has " + std::to_string(pool.size()) +
                    " classes, episode needs " + std::to_string(n_way));
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(n_way);

  const std::size_t dim = data.feature_dim();
  TaskEpisode<T> ep;
  ep.task_type = TaskType::classification;
  ep.n_way = n_way;
  ep.k_shot = k_shot;
  ep.class_names = pool;
  ep.support_x = Tensor<T>({n_way * k_shot, dim});
  ep.support_y = Tensor<T>({n_way * k_shot});
  ep.query_x = Tensor<T>({n_way * query_per_class, dim});
  ep.query_y = Tensor<T>({n_way * query_per_class});

  auto load_row = [&](const std::filesystem::path& p, Tensor<T>& dst, std::size_t row) {
    const Tensor<T> img = load_stlw<T>(p);
    if (img.size() != dim) {
      throw DataError(p.string() + " has " + std::to_string(img.size()) +
                      " values, expected " + std::to_string(dim));
    }
    std::copy(img.data().begin(), img.data().end(), dst.ptr() + row * dim);
  };

  for (std::size_t c = 0; c < n_way; ++c) {
    const auto& items = data.items(pool[c]);
    if (items.size() < k_shot + query_per_class) {
      throw DataError("class '" + pool[c] + "' has " + std::to_string(items.size()) +
                      " examples, episode needs " + std::to_string(k_shot + query_per_class));
    }
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    // Identity = position of the class in the manifest split times a stride plus item index.
    const std::size_t stride = 1u << 20;
    const auto all = data.classes(split);
    const std::size_t class_id = static_cast<std::size_t>(
        std::find(all.begin(), all.end(), pool[c]) - all.begin());
    for (std::size_t k = 0; k < k_shot; ++k) {
      load_row(items[order[k]], ep.support_x, c * k_shot + k);
      ep.support_y[c * k_shot + k] = static_cast<T>(c);
      ep.support_ids.push_back(class_id * stride + order[k]);
    }
    for (std::size_t q = 0; q < query_per_class; ++q) {
      load_row(items[order[k_shot + q]], ep.query_x, c * query_per_class + q);
      ep.query_y[c * query_per_class + q] = static_cast<T>(c);
      ep.query_ids.push_back(class_id * stride + order[k_shot + q]);
    }
  }
  return ep;
}

template <class T>
SyntheticClassSource<T>::SyntheticClassSource(std::size_t n_way, std::size_t k_shot,
                                              std::size_t query_per_class, std::size_t dim,
                                              double spread)
    : n_way_(n_way), k_shot_(k_shot), query_(query_per_class), dim_(dim), spread_(spread) {
  if (n_way < 2) throw ConfigError("classification episodes need n_way >= 2");
  if (k_shot == 0 || query_per_class == 0 || dim == 0) {
    throw ConfigError("k_shot, query_per_class and feature_dim must be >= 1");
  }
}

#define LWTA_INSTANTIATE_TASKS(T)                                                             \
  template Tensor<T> linspace_column<T>(double, double, std::size_t);                         \
  template Tensor<T> sinusoid_targets(const SinusoidSpec&, const SinusoidParams&,             \
                                      const Tensor<T>&, RngStream&);                          \
  template TaskEpisode<T> sample_sinusoid_task<T>(const SinusoidSpec&, RngStream&);           \
  template TaskEpisode<T> sample_synthetic_classification_task<T>(                            \
      std::size_t, std::size_t, std::size_t, std::size_t, RngStream&, double);                \
  template TaskEpisode<T> image_episode_sampler<T>(const ImageDataset&, std::size_t,          \
                                                   std::size_t, std::size_t,                  \
                                                   const std::string&, RngStream&);           \
  template class SyntheticClassSource<T>;

LWTA_INSTANTIATE_TASKS(float)
LWTA_INSTANTIATE_TASKS(double)

}  // namespace lwta
