#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "lwta/objective.hpp"
#include "lwta/rng.hpp"
#include "lwta/tensor.hpp"

namespace lwta {

struct SinusoidParams {
  double amplitude = 1.0;
  double frequency = 1.0;
  double phase = 0.0;
};

// y = A sin(w x + b) + eps
struct SinusoidSpec {
  double amplitude_lo = 0.1;
  double amplitude_hi = 5.0;
  double phase_lo = 0.0;
  double phase_hi = 2.0 * std::numbers::pi;
  double frequency_lo = 1.0;
  double frequency_hi = 1.0;
  bool noise = false;
  double noise_scale = 0.01;  // eps ~ N(0, (noise_scale * A)^2)
  double x_lo = -5.0;
  double x_hi = 5.0;
  std::size_t support_points = 10;
  std::size_t query_points = 100;  // evenly spaced grid over [x_lo, x_hi]

  static SinusoidSpec default_setting();
  static SinusoidSpec challenging();
  void validate() const;
};

template <class T>
struct TaskEpisode {
  Tensor<T> support_x;
  Tensor<T> support_y;
  Tensor<T> query_x;
  Tensor<T> query_y;
  TaskType task_type = TaskType::regression;
  std::size_t n_way = 0;
  std::size_t k_shot = 0;
  SinusoidParams params;
  // Identity of every example, for disjointness checks.
  std::vector<std::size_t> support_ids;
  std::vector<std::size_t> query_ids;
  // Original class of each remapped label (image episodes).
  std::vector<std::string> class_names;
};

double sinusoid_value(const SinusoidParams& p, double x);

// Evenly spaced points over [lo, hi], both ends included.
template <class T>
Tensor<T> linspace_column(double lo, double hi, std::size_t n);

// Targets for given inputs under fixed params; noise drawn from rng when on.
template <class T>
Tensor<T> sinusoid_targets(const SinusoidSpec& spec, const SinusoidParams& p,
                           const Tensor<T>& x, RngStream& rng);

template <class T>
TaskEpisode<T> sample_sinusoid_task(const SinusoidSpec& spec, RngStream& rng);

// Each class is an isotropic Gaussian blob (std `spread`) around a prototype
// drawn uniformly from [-1, 1]^dim. Support and query are class-major.
template <class T>
TaskEpisode<T> sample_synthetic_classification_task(std::size_t n_way, std::size_t k_shot,
                                                    std::size_t query_per_class, std::size_t dim,
                                                    RngStream& rng, double spread = 0.25);

// <root>/manifest.tsv lists "class<TAB>split"; <root>/<class>/*.stlw holds the
// examples of a class. Files are read lazily per episode.
class ImageDataset {
 public:
  explicit ImageDataset(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  // Classes assigned to `split`, in manifest order.
  std::vector<std::string> classes(const std::string& split) const;
  // Sorted item paths of a class.
  const std::vector<std::filesystem::path>& items(const std::string& cls) const;
  std::size_t feature_dim() const noexcept { return feature_dim_; }

 private:
  struct ClassEntry {
    std::string name;
    std::string split;
    std::vector<std::filesystem::path> items;
  };
  std::filesystem::path root_;
  std::vector<ClassEntry> classes_;
  std::size_t feature_dim_ = 0;
};

template <class T>
TaskEpisode<T> image_episode_sampler(const ImageDataset& data, std::size_t n_way,
                                     std::size_t k_shot, std::size_t query_per_class,
                                     const std::string& split, RngStream& rng);

// Task distribution consumed by meta-training and evaluation.
template <class T>
class TaskSource {
 public:
  virtual ~TaskSource() = default;
  virtual TaskEpisode<T> sample(RngStream& rng) const = 0;
  virtual TaskType type() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
};

template <class T>
class SinusoidSource final : public TaskSource<T> {
 public:
  explicit SinusoidSource(SinusoidSpec spec) : spec_(spec) { spec_.validate(); }
  TaskEpisode<T> sample(RngStream& rng) const override {
    return sample_sinusoid_task<T>(spec_, rng);
  }
  TaskType type() const override { return TaskType::regression; }
  std::size_t input_dim() const override { return 1; }
  std::size_t output_dim() const override { return 1; }
  const SinusoidSpec& spec() const noexcept { return spec_; }

 private:
  SinusoidSpec spec_;
};

template <class T>
class SyntheticClassSource final : public TaskSource<T> {
 public:
  SyntheticClassSource(std::size_t n_way, std::size_t k_shot, std::size_t query_per_class,
                       std::size_t dim, double spread = 0.25);
  TaskEpisode<T> sample(RngStream& rng) const override {
    return sample_synthetic_classification_task<T>(n_way_, k_shot_, query_, dim_, rng, spread_);
  }
  TaskType type() const override { return TaskType::classification; }
  std::size_t input_dim() const override { return dim_; }
  std::size_t output_dim() const override { return n_way_; }

 private:
  std::size_t n_way_, k_shot_, query_, dim_;
  double spread_;
};

template <class T>
class ImageSource final : public TaskSource<T> {
 public:
  ImageSource(std::shared_ptr<const ImageDataset> data, std::size_t n_way, std::size_t k_shot,
              std::size_t query_per_class, std::string split)
      : data_(std::move(data)), n_way_(n_way), k_shot_(k_shot), query_(query_per_class),
        split_(std::move(split)) {}
  TaskEpisode<T> sample(RngStream& rng) const override {
    return image_episode_sampler<T>(*data_, n_way_, k_shot_, query_, split_, rng);
  }
  TaskType type() const override { return TaskType::classification; }
  std::size_t input_dim() const override { return data_->feature_dim(); }
  std::size_t output_dim() const override { return n_way_; }

 private:
  std::shared_ptr<const ImageDataset> data_;
  std::size_t n_way_, k_shot_, query_;
  std::string split_;
};

}  // namespace lwta
