#include <gtest/gtest.h>

#include <cmath>

#include "../common/net_grad_check.hpp"
#include "lwta/error.hpp"
#include "lwta/layers.hpp"
#include "lwta/network.hpp"
#include "lwta/noise.hpp"
#include "lwta/ops.hpp"

using namespace lwta;

namespace {

LayerSpec spec(std::size_t in, std::size_t r, std::size_t j, Activation a = Activation::stochastic_lwta,
               WeightMode w = WeightMode::gaussian, bool bias = false) {
  return LayerSpec{in, r, j, a, w, bias};
}

std::size_t nonzeros_in_block(const Tensor<double>& y, std::size_t block, std::size_t j) {
  std::size_t n = 0;
  for (std::size_t k = 0; k < j; ++k) n += y[block * j + k] != 0.0;
  return n;
}

}  // namespace

TEST(SampleWeights, ZeroNoiseGivesMean) {
  RngStream rng(1, 1);
  auto layer = VariationalLwtaLayer<double>::init(spec(3, 2, 2), rng);
  auto w = sample_weights(layer, Tensor<double>(layer.mu.shape()));
  EXPECT_EQ(w, layer.mu);
}

TEST(SampleWeights, HandValue) {
  auto layer = VariationalLwtaLayer<double>::zeros(spec(1, 1, 1));
  layer.mu[0] = 1.0;
  layer.log_var[0] = 2.0 * std::log(0.5);
  auto w = sample_weights(layer, Tensor<double>({1, 1, 1}, 2.0));
  EXPECT_NEAR(w[0], 2.0, 1e-15);
}

TEST(SampleWeights, LogVarFloorKeepsSigmaFinite) {
  auto layer = VariationalLwtaLayer<double>::zeros(spec(1, 1, 1));
  layer.mu[0] = 0.25;
  layer.log_var[0] = -1e300;
  auto w = sample_weights(layer, Tensor<double>({1, 1, 1}, 1.0));
  EXPECT_NEAR(w[0], 0.25 + std::exp(0.5 * kLogVarFloor), 1e-15);
}

TEST(SampleWeights, PointModeIsContractError) {
  auto layer = VariationalLwtaLayer<double>::zeros(spec(2, 1, 2, Activation::stochastic_lwta,
                                                        WeightMode::point));
  RngStream rng(0, 0);
  EXPECT_THROW(sample_weights(layer, rng), ContractError);
  EXPECT_EQ(&point_weights(layer), &layer.mu);
}

TEST(BlockLogits, ZeroWeightsGiveUniformWinners) {
  Tensor<double> w({3, 2, 4});
  auto z = block_logits(Tensor<double>::vector({1, 2, 3}), w);
  auto p = block_softmax(z, 4);
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(BlockLogits, HandDotProducts) {
  // w[i, r, j] with I = 2, R = 1, J = 2
  Tensor<double> w({2, 1, 2}, std::vector<double>{0.5, 1.0, 0.5, 0.0});
  auto z = block_logits(Tensor<double>::vector({1, -1}), w);
  ASSERT_EQ(z.shape(), (Shape{1, 2}));
  EXPECT_DOUBLE_EQ(z[0], 0.0);
  EXPECT_DOUBLE_EQ(z[1], 1.0);
  auto z2 = block_logits(Tensor<double>::vector({2, -2}), w);
  EXPECT_DOUBLE_EQ(z2[1], 2.0 * z[1]);
  EXPECT_THROW(block_logits(Tensor<double>::vector({1, 2, 3}), w), DimensionError);
}

TEST(RelaxWinner, HandValue) {
  auto s = relax_winner(Tensor<double>::vector({1, 2}), 0.67, Tensor<double>::vector({0.5, 0.5}), 2);
  auto g = gumbel_from_uniform(Tensor<double>::vector({0.5}));
  EXPECT_NEAR(g[0], 0.36651, 1e-5);
  EXPECT_NEAR(s.xi_relaxed[0], 0.1835, 1e-3);
  EXPECT_NEAR(s.xi_relaxed[1], 0.8165, 1e-3);
  EXPECT_EQ(s.xi_hard, Tensor<double>::vector({0, 1}));
}

TEST(RelaxWinner, SymmetricInputsGiveUniform) {
  auto s = relax_winner(Tensor<double>::vector({0.3, 0.3, 0.3}), 0.67,
                        Tensor<double>::vector({0.2, 0.2, 0.2}), 3);
  for (double v : s.xi_relaxed.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(RelaxWinner, LowTemperatureIsNearlyOneHot) {
  auto fixed = relax_winner(Tensor<double>::vector({1, 2}), 0.01, Tensor<double>::vector({0.5, 0.5}), 2);
  EXPECT_GE(fixed.xi_relaxed[1], 0.999);
  // Holds once the perturbed gap exceeds tau * log(999 (J - 1)); near-ties stay soft at any tau.
  RngStream rng(5, 5);
  const double tau = 0.01, gap = tau * std::log(999.0);
  std::size_t checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Tensor<double> z({4, 2});
    fill_std_normal(rng, z);
    Tensor<double> u({4, 2});
    fill_uniform(rng, u);
    auto s = relax_winner(z, tau, u, 2);
    auto g = gumbel_from_uniform(u);
    for (std::size_t r = 0; r < 4; ++r) {
      if (std::abs(z(r, 0) + g(r, 0) - z(r, 1) - g(r, 1)) < gap) continue;
      ++checked;
      EXPECT_GE(std::max(s.xi_relaxed(r, 0), s.xi_relaxed(r, 1)), 0.999);
    }
  }
  EXPECT_GT(checked, 700u);
}

TEST(RelaxWinner, NonPositiveTemperatureThrows) {
  EXPECT_THROW(relax_winner(Tensor<double>::vector({0, 1}), 0.0, Tensor<double>::vector({.5, .5}), 2),
               ConfigError);
  EXPECT_THROW(relax_winner(Tensor<double>::vector({0, 1}), -1.0, Tensor<double>::vector({.5, .5}), 2),
               ConfigError);
}

TEST(RelaxWinner, RowsAreProbabilityVectors) {
  RngStream rng(6, 6);
  for (std::size_t j : {2u, 3u, 4u, 8u}) {
    Tensor<double> z({5, j});
    fill_std_normal(rng, z);
    for (auto& v : z.data()) v *= 5;
    auto s = sample_winner_relaxed(z, 0.67, rng, j);
    for (std::size_t r = 0; r < 5; ++r) {
      double sum = 0;
      for (std::size_t k = 0; k < j; ++k) {
        EXPECT_GT(s.xi_relaxed(r, k), 0.0);
        sum += s.xi_relaxed(r, k);
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(HardArgmax, TiesGoToLowestIndex) {
  EXPECT_EQ(hard_argmax(Tensor<double>::vector({1, 1, 0, 2, 2, 2}), 3),
            Tensor<double>::vector({1, 0, 0, 1, 0, 0}));
  EXPECT_THROW(hard_argmax(Tensor<double>::vector({1, 2, 3}), 2), DimensionError);
}

TEST(WinnerFrequencies, MatchPosterior) {
  // 10^5 blocks with logits [0, 1] drawn in one call
  const std::size_t n = 100000;
  Tensor<double> z({n, 2});
  for (std::size_t r = 0; r < n; ++r) z(r, 1) = 1.0;
  RngStream rng(7, 7);
  auto s = sample_winner_relaxed(z, 0.67, rng, 2);
  double second = 0;
  for (std::size_t r = 0; r < n; ++r) second += s.xi_hard(r, 1);
  EXPECT_NEAR(second / n, 0.7311, 0.01);
  EXPECT_NEAR(1.0 - second / n, 0.2689, 0.01);
}

TEST(WinnerFrequencies, ShiftWithinBlockChangesNothing) {
  RngStream a(8, 1), b(8, 1);
  auto s1 = sample_winner_relaxed(Tensor<double>::vector({0.2, -1.0, 0.7}), 0.67, a, 3);
  auto s2 = sample_winner_relaxed(Tensor<double>::vector({10.2, 9.0, 10.7}), 0.67, b, 3);
  EXPECT_EQ(s1.xi_hard, s2.xi_hard);
  auto p1 = block_softmax(s1.logits, 3), p2 = block_softmax(s2.logits, 3);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(p1[k], p2[k], 1e-12);
}

TEST(LwtaForward, DeterministicHandExample) {
  auto layer = VariationalLwtaLayer<double>::zeros(
      spec(2, 1, 2, Activation::deterministic_lwta, WeightMode::point));
  layer.mu = Tensor<double>({2, 1, 2}, std::vector<double>{0.5, 1.0, 0.5, 0.0});
  RngStream rng(0, 0);
  auto out = lwta_forward(Tensor<double>::vector({1, -1}), layer, rng, Phase::predict, 0.67);
  EXPECT_EQ(out.y, Tensor<double>::vector({0, 1}));
  EXPECT_EQ(out.winner.xi_hard, Tensor<double>::matrix(1, 2, {0, 1}));
}

TEST(LwtaForward, ReluExample) {
  auto layer = VariationalLwtaLayer<double>::zeros(spec(1, 2, 1, Activation::relu, WeightMode::point));
  layer.mu = Tensor<double>({1, 2, 1}, std::vector<double>{-1, 2});
  RngStream rng(0, 0);
  auto out = lwta_forward(Tensor<double>::vector({1}), layer, rng, Phase::train, 0.67);
  EXPECT_EQ(out.y, Tensor<double>::vector({0, 2}));
}

TEST(LwtaForward, SaturatedPosteriorPicksSecondUnit) {
  auto layer = VariationalLwtaLayer<double>::zeros(
      spec(1, 1, 2, Activation::stochastic_lwta, WeightMode::point));
  layer.mu = Tensor<double>({1, 1, 2}, std::vector<double>{0, 1000});
  RngStream base(9, 9);
  int hits = 0;
  for (std::uint64_t d = 0; d < 10000; ++d) {
    RngStream rng = base.derive(d);
    auto out = lwta_forward(Tensor<double>::vector({1}), layer, rng, Phase::predict, 0.67);
    hits += out.winner.xi_hard[1] == 1.0;
  }
  EXPECT_GE(hits, 9990);
}

TEST(LwtaForward, TrainOutputIsRelaxedTimesLogits) {
  RngStream init(10, 0);
  auto layer = VariationalLwtaLayer<double>::init(spec(3, 2, 2), init);
  RngStream rng(10, 1);
  auto out = lwta_forward(Tensor<double>::vector({0.5, -1, 2}), layer, rng, Phase::train, 0.67);
  RngStream again(10, 1);
  auto w = sample_weights(layer, again);
  auto z = block_logits(Tensor<double>::vector({0.5, -1, 2}), w);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out.y[i], out.winner.xi_relaxed[i] * z[i], 1e-14);
}

TEST(LwtaForward, HardModesAreSparse) {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t j = 2 + rng.index(4), r = 1 + rng.index(5), in = 1 + rng.index(6);
    for (auto act : {Activation::stochastic_lwta, Activation::deterministic_lwta}) {
      for (auto wm : {WeightMode::gaussian, WeightMode::point}) {
        auto layer = VariationalLwtaLayer<double>::init(spec(in, r, j, act, wm), rng);
        auto x = sample_std_normal<double>(rng, in);
        auto out = lwta_forward(x, layer, rng, Phase::predict, 0.67);
        for (std::size_t b = 0; b < r; ++b) EXPECT_EQ(nonzeros_in_block(out.y, b, j), 1u);
      }
    }
  }
}

TEST(LwtaForward, FlooredGaussianMatchesPointMode) {
  RngStream init(12, 0);
  auto g = VariationalLwtaLayer<double>::init(spec(4, 3, 2), init);
  for (auto& v : g.log_var.data()) v = -1e6;
  auto p = VariationalLwtaLayer<double>::zeros(
      spec(4, 3, 2, Activation::stochastic_lwta, WeightMode::point));
  p.mu = g.mu;
  const auto x = Tensor<double>::vector({0.3, -0.7, 1.1, 0.2});
  // residual noise is sigma_floor * sum_i |x_i| |eps_i|; bound at 6 sigma per weight
  double l1 = 0;
  for (double v : x.data()) l1 += std::abs(v);
  const double bound = 6.0 * std::exp(0.5 * kLogVarFloor) * l1;
  for (auto phase : {Phase::train, Phase::predict}) {
    RngStream a(12, 1), b(12, 1);
    auto yg = lwta_forward(x, g, a, phase, 0.67);
    auto yp = lwta_forward(x, p, b, phase, 0.67);
    for (std::size_t i = 0; i < yg.y.size(); ++i) EXPECT_NEAR(yg.y[i], yp.y[i], bound);
  }
}

TEST(LwtaForward, NetworkTrainPhaseGradientsMatchFiniteDifferences) {
  for (auto act : {Activation::stochastic_lwta, Activation::deterministic_lwta, Activation::relu}) {
    for (auto wm : {WeightMode::gaussian, WeightMode::point}) {
      Architecture arch;
      arch.input_dim = 3;
      arch.blocks = {3, 2};
      arch.block_size = 2;
      arch.activation = act;
      arch.weight_mode = wm;
      arch.bias = true;
      arch.output_dim = 2;
      RngStream init(13, 0);
      auto net = Network<double>::init(arch.layer_specs(), init, -2.0);
      RngStream xr(13, 1);
      Tensor<double> x({4, 3});
      fill_std_normal(xr, x);
      Tensor<double> mix({4, 2});
      fill_std_normal(xr, mix);
      auto loss = [&](ad::Tape<double>& t, const Network<double>& n, bool trainable) {
        RngStream rng(13, 2);
        auto tr = forward(t, n, x, rng, Phase::train, 0.67, trainable);
        return std::make_pair(ad::sum(ad::mul(tr.output, t.constant(mix))), tr.params);
      };
      EXPECT_LE(lwta::testing::network_grad_error(net, loss), 1e-4)
          << to_string(act) << " " << to_string(wm);
    }
  }
}

TEST(LayerInit, ShapesAndRanges) {
  RngStream rng(14, 0);
  auto layer = VariationalLwtaLayer<double>::init(spec(10, 4, 3, Activation::stochastic_lwta,
                                                       WeightMode::gaussian, true),
                                                  rng);
  EXPECT_EQ(layer.mu.shape(), (Shape{10, 4, 3}));
  EXPECT_EQ(layer.bias_mu.shape(), (Shape{12}));
  const double limit = std::sqrt(6.0 / 22.0);
  for (double v : layer.mu.data()) EXPECT_LE(std::abs(v), limit);
  double mean = 0;
  for (double v : layer.log_var.data()) mean += v;
  mean /= static_cast<double>(layer.log_var.size());
  EXPECT_NEAR(mean, 0.0005, 0.005);
  EXPECT_EQ(layer.parameters().size(), 4u);
}

TEST(ParameterCount, HandExamples) {
  EXPECT_EQ(count_parameters(spec(4, 2, 2)), 32u);
  EXPECT_EQ(count_parameters(spec(4, 2, 2, Activation::stochastic_lwta, WeightMode::point)), 16u);
}

TEST(ParameterCount, RegressionNetworkOracle) {
  Architecture arch;  // 1 -> 16x2 -> 8x2 -> 1
  const std::size_t weights = 1 * 32 + 32 * 16 + 16 * 1;
  EXPECT_EQ(count_parameters(arch.layer_specs()), 2 * weights);
  arch.bias = true;
  EXPECT_EQ(count_parameters(arch.layer_specs()), 2 * (weights + 32 + 16 + 1));
  arch.weight_mode = WeightMode::point;
  EXPECT_EQ(count_parameters(arch.layer_specs()), weights + 32 + 16 + 1);
}

TEST(ParameterCount, MatchesAllocatedTensors) {
  RngStream rng(15, 0);
  for (int trial = 0; trial < 20; ++trial) {
    Architecture arch;
    arch.input_dim = 1 + rng.index(10);
    arch.blocks = {1 + rng.index(8), 1 + rng.index(8)};
    arch.block_size = 1 + rng.index(4);
    arch.weight_mode = rng.index(2) ? WeightMode::gaussian : WeightMode::point;
    arch.bias = rng.index(2) == 1;
    arch.output_dim = 1 + rng.index(5);
    auto net = Network<double>::init(arch.layer_specs(), rng);
    EXPECT_EQ(net.parameter_count(), count_parameters(arch.layer_specs()));
  }
}

TEST(Modes, ParseAndPrint) {
  for (auto a : {Activation::stochastic_lwta, Activation::deterministic_lwta, Activation::relu,
                 Activation::linear}) {
    EXPECT_EQ(parse_activation(to_string(a)), a);
  }
  EXPECT_EQ(parse_weight_mode("point"), WeightMode::point);
  EXPECT_THROW(parse_activation("maxout"), ConfigError);
  EXPECT_THROW(parse_weight_mode("laplace"), ConfigError);
}
