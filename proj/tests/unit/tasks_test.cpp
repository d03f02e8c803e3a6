#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "lwta/error.hpp"
#include "lwta/tasks.hpp"
#include "lwta/tensor_io.hpp"

using namespace lwta;
namespace fs = std::filesystem;

TEST(Sinusoid, PeakValue) {
  EXPECT_DOUBLE_EQ(sinusoid_value({1.0, 1.0, 0.0}, std::numbers::pi / 2), 1.0);
}

TEST(Sinusoid, SpecRanges) {
  const auto d = SinusoidSpec::default_setting();
  EXPECT_EQ(d.amplitude_lo, 0.1);
  EXPECT_EQ(d.amplitude_hi, 5.0);
  EXPECT_EQ(d.frequency_lo, 1.0);
  EXPECT_EQ(d.frequency_hi, 1.0);
  EXPECT_FALSE(d.noise);
  const auto c = SinusoidSpec::challenging();
  EXPECT_EQ(c.frequency_lo, 0.5);
  EXPECT_EQ(c.frequency_hi, 2.0);
  EXPECT_TRUE(c.noise);
  EXPECT_EQ(c.support_points, 10u);
}

TEST(Sinusoid, TaskStaysInRangeAndTargetsReconstruct) {
  for (const auto& spec : {SinusoidSpec::default_setting(), SinusoidSpec::challenging()}) {
    RngStream rng(1, 2);
    for (int t = 0; t < 200; ++t) {
      const auto ep = sample_sinusoid_task<double>(spec, rng);
      EXPECT_GE(ep.params.amplitude, spec.amplitude_lo);
      EXPECT_LE(ep.params.amplitude, spec.amplitude_hi);
      EXPECT_GE(ep.params.frequency, spec.frequency_lo);
      EXPECT_LE(ep.params.frequency, spec.frequency_hi);
      EXPECT_GE(ep.params.phase, spec.phase_lo);
      EXPECT_LE(ep.params.phase, spec.phase_hi);
      ASSERT_EQ(ep.support_x.size(), spec.support_points);
      ASSERT_EQ(ep.query_x.size(), spec.query_points);
      for (double x : ep.support_x.data()) {
        EXPECT_GE(x, spec.x_lo);
        EXPECT_LE(x, spec.x_hi);
      }
      if (spec.noise) continue;
      for (std::size_t i = 0; i < ep.support_x.size(); ++i) {
        EXPECT_EQ(ep.support_y[i], sinusoid_value(ep.params, ep.support_x[i]));
      }
      for (std::size_t i = 0; i < ep.query_x.size(); ++i) {
        EXPECT_EQ(ep.query_y[i], sinusoid_value(ep.params, ep.query_x[i]));
      }
    }
  }
}

TEST(Sinusoid, ChallengingNoiseScale) {
  auto spec = SinusoidSpec::challenging();
  RngStream rng(3, 0);
  const SinusoidParams p{5.0, 1.3, 0.4};
  const auto x = linspace_column<double>(-5, 5, 10);
  double s = 0, s2 = 0;
  std::size_t n = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto y = sinusoid_targets(spec, p, x, rng);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = y[i] - sinusoid_value(p, x[i]);
      s += e;
      s2 += e * e;
      ++n;
    }
  }
  const double mean = s / static_cast<double>(n);
  const double sd = std::sqrt(s2 / static_cast<double>(n) - mean * mean);
  EXPECT_GE(sd, 0.045);
  EXPECT_LE(sd, 0.055);
}

TEST(Sinusoid, SupportAndQueryDisjoint) {
  RngStream rng(4, 0);
  const auto ep = sample_sinusoid_task<float>(SinusoidSpec::default_setting(), rng);
  std::set<std::size_t> s(ep.support_ids.begin(), ep.support_ids.end());
  for (auto id : ep.query_ids) EXPECT_EQ(s.count(id), 0u);
}

TEST(Sinusoid, InvalidSpecThrows) {
  auto s = SinusoidSpec::default_setting();
  s.support_points = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = SinusoidSpec::default_setting();
  s.amplitude_lo = 6;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Synthetic, CountsAndLabels) {
  RngStream rng(5, 0);
  const auto ep = sample_synthetic_classification_task<float>(5, 1, 15, 16, rng);
  EXPECT_EQ(ep.support_x.rows(), 5u);
  EXPECT_EQ(ep.query_x.rows(), 75u);
  std::set<int> support_labels;
  for (float v : ep.support_y.data()) support_labels.insert(static_cast<int>(v));
  EXPECT_EQ(support_labels, (std::set<int>{0, 1, 2, 3, 4}));
  for (float v : ep.query_y.data()) EXPECT_EQ(support_labels.count(static_cast<int>(v)), 1u);
  std::set<std::size_t> ids(ep.support_ids.begin(), ep.support_ids.end());
  for (auto id : ep.query_ids) EXPECT_EQ(ids.count(id), 0u);
  EXPECT_THROW(sample_synthetic_classification_task<float>(1, 1, 1, 4, rng), ConfigError);
}

TEST(Synthetic, NoSpreadIsPerfectlySeparable) {
  RngStream rng(6, 0);
  const auto ep = sample_synthetic_classification_task<double>(5, 1, 15, 8, rng, 0.0);
  const std::size_t dim = 8;
  std::size_t correct = 0;
  for (std::size_t q = 0; q < ep.query_x.rows(); ++q) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < ep.support_x.rows(); ++c) {
      double d = 0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = ep.query_x(q, k) - ep.support_x(c, k);
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    correct += ep.support_y[best] == ep.query_y[q];
  }
  EXPECT_EQ(correct, ep.query_x.rows());
}

TEST(Synthetic, FixedSeedSameEpisode) {
  RngStream a(7, 1), b(7, 1);
  const auto x = sample_synthetic_classification_task<float>(5, 2, 3, 4, a);
  const auto y = sample_synthetic_classification_task<float>(5, 2, 3, 4, b);
  EXPECT_EQ(x.support_x, y.support_x);
  EXPECT_EQ(x.query_x, y.query_x);
  EXPECT_EQ(x.query_y, y.query_y);
}

namespace {

class ImageDir : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("lwta_images_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  // classes c0..c{n-1}, `items` flattened 2x3 images each; value encodes (class, item)
  void make(std::size_t n, std::size_t items, const std::string& split = "train") {
    std::ofstream manifest(root_ / "manifest.tsv", std::ios::app);
    for (std::size_t c = 0; c < n; ++c) {
      const std::string name = split + "_c" + std::to_string(c);
      manifest << name << '\t' << split << '\n';
      fs::create_directories(root_ / name);
      for (std::size_t i = 0; i < items; ++i) {
        Tensor<float> img({2, 3}, static_cast<float>(100 * c + i));
        char file[32];
        std::snprintf(file, sizeof file, "%03zu.stlw", i);
        save_stlw(root_ / name / file, img);
      }
    }
  }

  fs::path root_;
};

}  // namespace

TEST_F(ImageDir, ValidEpisodeIsDisjoint) {
  make(5, 20);
  make(3, 20, "test");
  const ImageDataset data(root_);
  EXPECT_EQ(data.feature_dim(), 6u);
  EXPECT_EQ(data.classes("train").size(), 5u);
  EXPECT_EQ(data.classes("test").size(), 3u);
  RngStream rng(8, 0);
  const auto ep = image_episode_sampler<float>(data, 5, 1, 5, "train", rng);
  EXPECT_EQ(ep.support_x.shape(), (Shape{5, 6}));
  EXPECT_EQ(ep.query_x.shape(), (Shape{25, 6}));
  std::set<std::size_t> s(ep.support_ids.begin(), ep.support_ids.end());
  for (auto id : ep.query_ids) EXPECT_EQ(s.count(id), 0u);
  std::set<float> support_values;
  for (std::size_t r = 0; r < 5; ++r) support_values.insert(ep.support_x(r, 0));
  for (std::size_t r = 0; r < 25; ++r) EXPECT_EQ(support_values.count(ep.query_x(r, 0)), 0u);
  // remapped labels form a bijection onto 0..N-1 and follow the class of the file
  std::set<std::string> names(ep.class_names.begin(), ep.class_names.end());
  EXPECT_EQ(names.size(), 5u);
  for (std::size_t r = 0; r < 25; ++r) {
    const auto label = static_cast<std::size_t>(ep.query_y[r]);
    const std::string expected = "train_c" + std::to_string(static_cast<int>(ep.query_x(r, 0)) / 100);
    EXPECT_EQ(ep.class_names.at(label), expected);
  }
}

TEST_F(ImageDir, TooManyWaysIsDataError) {
  make(5, 20);
  const ImageDataset data(root_);
  RngStream rng(9, 0);
  EXPECT_THROW(image_episode_sampler<float>(data, 6, 1, 5, "train", rng), DataError);
}

TEST_F(ImageDir, MissingManifestIsConfigError) {
  EXPECT_THROW(ImageDataset{root_}, ConfigError);
}

TEST_F(ImageDir, SmallClassIsNamed) {
  make(5, 3);
  const ImageDataset data(root_);
  RngStream rng(10, 0);
  try {
    image_episode_sampler<float>(data, 5, 1, 5, "train", rng);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("train_c"), std::string::npos) << e.what();
  }
}

TEST_F(ImageDir, FixedSeedSameSelection) {
  make(8, 10);
  const ImageDataset data(root_);
  RngStream a(11, 0), b(11, 0);
  const auto x = image_episode_sampler<float>(data, 5, 2, 3, "train", a);
  const auto y = image_episode_sampler<float>(data, 5, 2, 3, "train", b);
  EXPECT_EQ(x.support_ids, y.support_ids);
  EXPECT_EQ(x.query_ids, y.query_ids);
  EXPECT_EQ(x.class_names, y.class_names);
}
