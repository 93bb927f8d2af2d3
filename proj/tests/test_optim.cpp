#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "evidential/optim.hpp"

using namespace evidential;

namespace {

// f(x) = 0.5 * sum_i c_i (x_i - t_i)^2
struct Quadratic {
  std::vector<double> curvature{1.0, 4.0, 0.5};
  std::vector<double> target{1.0, -2.0, 3.0};

  double value(const std::vector<double>& x) const {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) f += 0.5 * curvature[i] * (x[i] - target[i]) * (x[i] - target[i]);
    return f;
  }
  std::vector<double> grad(const std::vector<double>& x) const {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = curvature[i] * (x[i] - target[i]);
    return g;
  }
};

}  // namespace

TEST(Optimizer, SgdConvergesMonotonically) {
  const Quadratic q;
  std::vector<double> x{0.0, 0.0, 0.0};
  Optimizer opt(OptimizerKind::Sgd, 3);
  double previous = q.value(x);
  for (int step = 0; step < 500; ++step) {
    opt.step(x, q.grad(x), 0.2);
    const double f = q.value(x);
    EXPECT_LE(f, previous);
    previous = f;
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(x[i], q.target[i], 1e-6);
}

TEST(Optimizer, AdamConverges) {
  const Quadratic q;
  std::vector<double> x{0.0, 0.0, 0.0};
  Optimizer opt(OptimizerKind::Adam, 3);
  ReduceOnPlateau schedule(0.1, 10, 0.1, 1e-6);
  for (int step = 0; step < 3000; ++step) {
    opt.step(x, q.grad(x), schedule.learning_rate());
    schedule.observe(q.value(x));
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(x[i], q.target[i], 1e-6);
  EXPECT_LT(q.value(x), 1e-12);
}

TEST(Optimizer, AdamFirstStepHasLearningRateSize) {
  std::vector<double> x{0.0, 0.0};
  Optimizer opt(OptimizerKind::Adam, 2);
  opt.step(x, std::vector<double>{3.0, -0.001}, 0.01);
  EXPECT_NEAR(x[0], -0.01, 1e-8);
  EXPECT_NEAR(x[1], 0.01, 1e-7);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Optimizer, RejectsMismatchedSizes) {
  Optimizer opt(OptimizerKind::Sgd, 2);
  std::vector<double> x(3);
  EXPECT_THROW(opt.step(x, std::vector<double>(3), 0.1), Error);
}

TEST(ReduceOnPlateau, CutsAfterPatienceEpochsWithoutImprovement) {
  ReduceOnPlateau s(1e-3, 10, 0.1, 1e-6);
  s.observe(1.0);
  for (int i = 0; i < 9; ++i) s.observe(1.0);
  EXPECT_EQ(s.learning_rate(), 1e-3);
  s.observe(1.0);
  EXPECT_NEAR(s.learning_rate(), 1e-4, 1e-18);
  s.observe(0.5);
  EXPECT_NEAR(s.learning_rate(), 1e-4, 1e-18);
  for (int i = 0; i < 100; ++i) s.observe(0.6);
  EXPECT_EQ(s.learning_rate(), 1e-6);
}
