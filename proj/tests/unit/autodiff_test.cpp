#include <gtest/gtest.h>

#include <cmath>

#include "lwta/autodiff.hpp"
#include "lwta/error.hpp"
#include "lwta/layers.hpp"
#include "lwta/ops.hpp"
#include "lwta/rng.hpp"

using namespace lwta;
using ad::Tape;
using ad::Var;

namespace {

Tensor<double> randn(Shape s, std::uint64_t seed, double scale = 1.0) {
  RngStream rng(seed, 0);
  Tensor<double> t(std::move(s));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

Tensor<double> positive(Shape s, std::uint64_t seed) {
  RngStream rng(seed, 0);
  Tensor<double> t(std::move(s));
  for (auto& v : t.data()) v = rng.uniform(0.5, 2.0);
  return t;
}

// Contracts a tensor-valued result to a scalar with fixed random weights so
// every output element contributes a distinct gradient.
Var<double> contract(Tape<double>& t, Var<double> v, std::uint64_t seed = 99) {
  return ad::sum(ad::mul(v, t.constant(randn(v.shape(), seed))));
}

}  // namespace

TEST(Tape, RecordAddsValues) {
  Tape<double> t;
  auto a = t.constant(Tensor<double>::scalar(1));
  auto b = t.constant(Tensor<double>::scalar(2));
  EXPECT_EQ(ad::add(a, b).value().item(), 3.0);
}

TEST(Tape, ConstantLeafHasZeroGradient) {
  Tape<double> t;
  auto c = t.constant(Tensor<double>::vector({1, 2}));
  auto w = t.leaf(Tensor<double>::vector({3, 4}), true);
  t.backward(ad::sum(ad::mul(c, w)));
  EXPECT_EQ(c.grad(), Tensor<double>({2}));
  EXPECT_EQ(w.grad(), Tensor<double>::vector({1, 2}));
  EXPECT_FALSE(t.requires_grad(c));
  EXPECT_TRUE(t.trainable(w));
}

TEST(Tape, SquareChain) {
  Tape<double> t;
  auto x = t.leaf(Tensor<double>::scalar(3), true);
  auto y = ad::mul(x, x);
  EXPECT_EQ(y.value().item(), 9.0);
  t.backward(y);
  EXPECT_EQ(x.grad().item(), 6.0);
}

TEST(Tape, SumGradIsOnes) {
  Tape<double> t;
  auto w = t.leaf(randn({3, 4}, 1), true);
  t.backward(ad::sum(w));
  for (double g : w.grad().data()) EXPECT_EQ(g, 1.0);
}

TEST(Tape, BackwardIsIdempotent) {
  Tape<double> t;
  auto x = t.leaf(Tensor<double>::vector({1, -2}), true);
  auto loss = ad::sum(ad::mul(x, x));
  t.backward(loss);
  const auto first = x.grad();
  t.backward(loss);
  EXPECT_EQ(x.grad(), first);
}

TEST(Tape, NonScalarLossThrows) {
  Tape<double> t;
  auto x = t.leaf(Tensor<double>::vector({1, 2}), true);
  EXPECT_THROW(t.backward(x), ContractError);
}

TEST(Tape, ForeignInputThrows) {
  Tape<double> t1, t2;
  auto a = t1.leaf(Tensor<double>::scalar(1), true);
  auto b = t2.leaf(Tensor<double>::scalar(2), true);
  EXPECT_THROW(ad::add(a, b), GraphError);
}

TEST(Tape, SaturatedCrossEntropyHasTinyGradient) {
  Tape<double> t;
  auto z = t.leaf(Tensor<double>::matrix(1, 3, {30, 0, 0}), true);
  auto loss = ad::nll(ad::block_softmax(z, 3), {0});
  t.backward(loss);
  for (double g : z.grad().data()) EXPECT_LE(std::abs(g), 1e-3);
}

TEST(GradCheck, Square) {
  const double err = ad::grad_check(
      [](Tape<double>&, const std::vector<Var<double>>& p) { return ad::sum(ad::mul(p[0], p[0])); },
      {Tensor<double>::scalar(3)});
  EXPECT_LE(err, 1e-8);
}

TEST(GradCheck, Constant) {
  const double err = ad::grad_check(
      [](Tape<double>& t, const std::vector<Var<double>>&) {
        return t.constant(Tensor<double>::scalar(5));
      },
      {Tensor<double>::vector({1, 2})});
  EXPECT_EQ(err, 0.0);
}

struct OpCase {
  const char* name;
  ad::LossBuilder build;
  std::vector<Tensor<double>> params;
};

class OpGradient : public ::testing::TestWithParam<int> {};

std::vector<OpCase> op_cases() {
  std::vector<OpCase> c;
  c.push_back({"add", [](Tape<double>& t, const auto& p) { return contract(t, ad::add(p[0], p[1])); },
               {randn({2, 3}, 1), randn({2, 3}, 2)}});
  c.push_back({"add_row",
               [](Tape<double>& t, const auto& p) { return contract(t, ad::add_row(p[0], p[1])); },
               {randn({4, 3}, 3), randn({3}, 4)}});
  c.push_back({"sub", [](Tape<double>& t, const auto& p) { return contract(t, ad::sub(p[0], p[1])); },
               {randn({5}, 5), randn({5}, 6)}});
  c.push_back({"mul", [](Tape<double>& t, const auto& p) { return contract(t, ad::mul(p[0], p[1])); },
               {randn({2, 2}, 7), randn({2, 2}, 8)}});
  c.push_back({"scale",
               [](Tape<double>& t, const auto& p) { return contract(t, ad::scale(p[0], -1.7)); },
               {randn({3}, 9)}});
  c.push_back({"add_scalar",
               [](Tape<double>& t, const auto& p) {
                 auto y = ad::add_scalar(p[0], 0.3);
                 return ad::sum(ad::mul(y, y));
               },
               {randn({3}, 10)}});
  c.push_back({"matmul",
               [](Tape<double>& t, const auto& p) { return contract(t, ad::matmul(p[0], p[1])); },
               {randn({3, 4}, 11), randn({4, 2, 3}, 12)}});
  c.push_back({"block_softmax",
               [](Tape<double>& t, const auto& p) { return contract(t, ad::block_softmax(p[0], 3)); },
               {randn({2, 6}, 13)}});
  c.push_back({"block_log_softmax",
               [](Tape<double>& t, const auto& p) {
                 return contract(t, ad::block_log_softmax(p[0], 2));
               },
               {randn({3, 4}, 14)}});
  c.push_back({"log", [](Tape<double>& t, const auto& p) { return contract(t, ad::log(p[0])); },
               {positive({4}, 15)}});
  c.push_back({"exp", [](Tape<double>& t, const auto& p) { return contract(t, ad::exp(p[0])); },
               {randn({4}, 16)}});
  c.push_back({"tanh", [](Tape<double>& t, const auto& p) { return contract(t, ad::tanh(p[0])); },
               {randn({4}, 17)}});
  c.push_back({"relu", [](Tape<double>& t, const auto& p) { return contract(t, ad::relu(p[0])); },
               {Tensor<double>::vector({-1.2, -0.3, 0.4, 2.0})}});
  c.push_back({"mean",
               [](Tape<double>& t, const auto& p) {
                 auto m = ad::mean(ad::mul(p[0], p[0]));
                 return ad::mul(m, t.constant(Tensor<double>::scalar(1.5)));
               },
               {randn({2, 3}, 18)}});
  c.push_back({"concat",
               [](Tape<double>& t, const auto& p) { return contract(t, ad::concat(p[0], p[1])); },
               {randn({2, 3}, 19), randn({1, 3}, 20)}});
  c.push_back({"gather_rows",
               [](Tape<double>& t, const auto& p) {
                 return contract(t, ad::gather_rows(p[0], {2, 0, 2}));
               },
               {randn({3, 2}, 21)}});
  c.push_back({"clamp_min",
               [](Tape<double>& t, const auto& p) { return contract(t, ad::clamp_min(p[0], -0.5)); },
               {Tensor<double>::vector({-2.0, -0.9, 0.1, 1.0})}});
  c.push_back({"gaussian_reparam",
               [](Tape<double>& t, const auto& p) {
                 return contract(t, ad::gaussian_reparam(p[0], p[1], randn({2, 3}, 22)));
               },
               {randn({2, 3}, 23), randn({2, 3}, 24, 0.5)}});
  c.push_back({"gaussian_log_ratio",
               [](Tape<double>&, const auto& p) { return ad::gaussian_log_ratio(p[0], p[1], p[2]); },
               {randn({5}, 25), randn({5}, 26), randn({5}, 27, 0.5)}});
  c.push_back({"gumbel_softmax",
               [](Tape<double>& t, const auto& p) {
                 RngStream rng(4, 4);
                 auto g = gumbel_from_uniform(sample_uniform<double>(rng, 8).reshaped({2, 4}));
                 return contract(t, ad::gumbel_softmax(p[0], g, 0.67, 2));
               },
               {randn({2, 4}, 28)}});
  c.push_back({"nll",
               [](Tape<double>&, const auto& p) {
                 return ad::nll(ad::block_softmax(p[0], 3), {2, 0, 1, 1});
               },
               {randn({4, 3}, 29)}});
  c.push_back({"squared_error",
               [](Tape<double>&, const auto& p) { return ad::squared_error(p[0], randn({3, 1}, 30)); },
               {randn({3, 1}, 31)}});
  return c;
}

TEST_P(OpGradient, MatchesCentralDifferences) {
  const auto cases = op_cases();
  const auto& c = cases.at(static_cast<std::size_t>(GetParam()));
  EXPECT_LE(ad::grad_check(c.build, c.params), 1e-4) << c.name;
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range(0, 22),
                         [](const ::testing::TestParamInfo<int>& info) {
                           return std::string(op_cases().at(info.param).name);
                         });

TEST(Ops, ShapeMismatchesThrow) {
  Tape<double> t;
  auto a = t.leaf(randn({2, 3}, 1), true);
  auto b = t.leaf(randn({3, 2}, 2), true);
  EXPECT_THROW(ad::add(a, b), DimensionError);
  EXPECT_THROW(ad::mul(a, b), DimensionError);
  EXPECT_THROW(ad::squared_error(a, Tensor<double>({5})), DimensionError);
  EXPECT_THROW(ad::nll(ad::block_softmax(a, 3), {0, 3}), IndexError);
  EXPECT_THROW(ad::gumbel_softmax(a, Tensor<double>({2, 3}), 0.0, 3), ConfigError);
}

TEST(Ops, NllFloorKeepsLossFinite) {
  Tape<double> t;
  auto p = t.constant(Tensor<double>::matrix(1, 2, {1.0, 0.0}));
  const double v = ad::nll(p, {1}).value().item();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, -std::log(1e-12), 1e-9);
}
