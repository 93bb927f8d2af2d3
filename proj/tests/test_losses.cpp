#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"

using namespace evidential;

TEST(LossSse, Examples) {
  Matrix y(3, 2);
  y.data = {1, 0, 0, 1, 1, 0};
  EXPECT_EQ(loss_sse(y, y, {}, 0.0).value, 0.0);

  const std::vector<double> alphas(5, 1.0);
  Matrix p(3, 2);
  p.data = {0.8, 0.2, 0.5, 0.5, 0.9, 0.1};
  const double data_term = 0.04 + 0.04 + 0.25 + 0.25 + 0.01 + 0.01;
  EXPECT_NEAR(loss_sse(p, y, alphas, 0.3).value, data_term + 0.3 * 5, 1e-12);
  EXPECT_THROW(loss_sse(p, Matrix(2, 2), {}, 0.0), Error);
}

TEST(LossSse, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix p(4, 3), y(4, 3);
  for (double& v : p.data) v = u(rng);
  for (std::size_t n = 0; n < 4; ++n) y(n, n % 3) = 1.0;
  std::vector<double> alphas{0.2, 0.7, 0.4};
  const auto l = loss_sse(p, y, alphas, 0.5);
  const auto numeric = oracle::numeric_gradient(
      [&](std::span<const double> v) {
        Matrix q = p;
        q.data.assign(v.begin(), v.end());
        return loss_sse(q, y, alphas, 0.5).value;
      },
      p.data);
  EXPECT_LT(oracle::max_relative_error(l.d_probs.data, numeric), 1e-6);
  const auto numeric_a = oracle::numeric_gradient(
      [&](std::span<const double> v) { return loss_sse(p, y, v, 0.5).value; }, alphas);
  EXPECT_LT(oracle::max_relative_error(l.d_alphas, numeric_a), 1e-6);
}

TEST(LossCe, Examples) {
  const std::vector<double> y{1.0, 0.0, 1.0};
  EXPECT_LT(loss_ce(y, y, {}, 0.0).value, 1e-10);
  const std::vector<double> half(8, 0.5);
  const std::vector<double> labels{1, 0, 1, 0, 1, 1, 0, 0};
  EXPECT_NEAR(loss_ce(half, labels, {}, 0.0).value, 8.0 * std::log(2.0), 1e-12);
  const std::vector<double> v{1.0, -2.0};
  EXPECT_NEAR(loss_ce(half, labels, v, 0.1).value, 8.0 * std::log(2.0) + 0.1 * 5.0, 1e-12);
  EXPECT_THROW(loss_ce(half, y, {}, 0.0), Error);
}

TEST(LossCe, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<double> p(10), y(10), w{0.3, -1.2, 2.0};
  for (std::size_t n = 0; n < 10; ++n) {
    p[n] = u(rng);
    y[n] = n % 3 == 0 ? 1.0 : 0.0;
  }
  const auto l = loss_ce(p, y, w, 0.2);
  const auto numeric =
      oracle::numeric_gradient([&](std::span<const double> v) { return loss_ce(v, y, w, 0.2).value; }, p);
  EXPECT_LT(oracle::max_relative_error(l.d_p1, numeric), 1e-6);
  const auto numeric_w =
      oracle::numeric_gradient([&](std::span<const double> v) { return loss_ce(p, y, v, 0.2).value; }, w);
  EXPECT_LT(oracle::max_relative_error(l.d_weights, numeric_w), 1e-6);
}

TEST(LossCe, ClampsProbabilities) {
  const std::vector<double> p{0.0, 1.0};
  const std::vector<double> y{1.0, 0.0};
  const auto l = loss_ce(p, y, {}, 0.0);
  EXPECT_TRUE(std::isfinite(l.value));
  // 1 - clamp is not exact in double, so the second term differs slightly.
  EXPECT_NEAR(l.value, -2.0 * std::log(kProbabilityClamp), 1e-4);
}

TEST(LossDice, Examples) {
  const std::vector<double> g{1, 0, 1, 1, 0, 0};
  EXPECT_NEAR(loss_dice(g, g, 0.0, 0.0).dice_term, 0.0, 1e-15);
  std::vector<double> inverse;
  for (double v : g) inverse.push_back(1.0 - v);
  EXPECT_NEAR(loss_dice(inverse, g, 0.0, 0.0).dice_term, 1.0, 1e-15);
  const auto l = loss_dice(g, g, 0.5, 3.0);
  EXPECT_NEAR(l.value, 1.5, 1e-15);
  const std::vector<double> zeros(4, 0.0);
  try {
    loss_dice(zeros, zeros, 0.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllZeroDenominator);
  }
}

TEST(LossDice, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(20), g(20);
  for (std::size_t n = 0; n < 20; ++n) {
    s[n] = u(rng);
    g[n] = u(rng) < 0.4 ? 1.0 : 0.0;
  }
  const auto l = loss_dice(s, g, 0.0, 0.0);
  const auto numeric =
      oracle::numeric_gradient([&](std::span<const double> v) { return loss_dice(v, g, 0.0, 0.0).value; }, s);
  EXPECT_LT(oracle::max_relative_error(l.d_scores, numeric), 1e-6);
}

TEST(Regularizer, MatchesLayerParameters) {
  Model enn{std::nullopt, enn_init_random(4, 2, 2, 1)};
  EXPECT_NEAR(layer_regularizer(enn), 4 * 0.5, 1e-15);
  Model rbf{std::nullopt, rbf_init_random(3, 2, 1)};
  const auto& v = std::get<RbfParams>(rbf.layer).weights;
  EXPECT_NEAR(layer_regularizer(rbf), v[0] * v[0] + v[1] * v[1] + v[2] * v[2], 1e-15);

  for (const Model* m : {&enn, &rbf}) {
    std::vector<double> grad(parameter_count(*m), 0.0);
    layer_regularizer(*m, &grad);
    const auto numeric = oracle::numeric_gradient(
        [&](std::span<const double> x) {
          Model q = *m;
          unflatten(q, x);
          return layer_regularizer(q);
        },
        flatten(*m));
    EXPECT_LT(oracle::max_relative_error(grad, numeric), 1e-6);
  }
}
