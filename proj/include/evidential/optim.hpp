#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "evidential/error.hpp"

namespace evidential {

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

enum class OptimizerKind { Sgd, Adam };

/// First-order optimizer over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, std::size_t size, AdamSettings adam = {})
      : kind_(kind), adam_(adam), first_(size, 0.0), second_(size, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, double learning_rate) {
    detail::require(params.size() == first_.size() && grad.size() == first_.size(), ErrorCode::ShapeMismatch,
                    "optimizer state does not match parameter count");
    ++steps_;
    if (kind_ == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * grad[i];
      return;
    }
    const double c1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_[i] = adam_.beta1 * first_[i] + (1.0 - adam_.beta1) * grad[i];
      second_[i] = adam_.beta2 * second_[i] + (1.0 - adam_.beta2) * grad[i] * grad[i];
      const double m_hat = first_[i] / c1;
      const double v_hat = second_[i] / c2;
      params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + adam_.epsilon);
    }
  }

  std::size_t steps() const { return steps_; }

 private:
  OptimizerKind kind_;
  AdamSettings adam_;
  std::vector<double> first_;
  std::vector<double> second_;
  std::size_t steps_ = 0;
};

/// Cuts the learning rate by `factor` when the monitored loss has not
/// improved for `patience` consecutive epochs.
class ReduceOnPlateau {
 public:
  ReduceOnPlateau(double initial_lr, std::size_t patience, double factor, double min_lr)
      : lr_(initial_lr), patience_(patience), factor_(factor), min_lr_(min_lr) {}

  double learning_rate() const { return lr_; }

  void observe(double loss) {
    if (loss < best_) {
      best_ = loss;
      stale_ = 0;
      return;
    }
    if (++stale_ >= patience_) {
      lr_ = std::max(min_lr_, lr_ * factor_);
      stale_ = 0;
    }
  }

 private:
  double lr_;
  std::size_t patience_;
  double factor_;
  double min_lr_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

}  // namespace evidential
