#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "evidential/error.hpp"
#include "evidential/linalg.hpp"

namespace evidential {

inline constexpr double kProbabilityClamp = 1e-12;

/// Regularized sum of squares between pignistic probabilities and one-hot targets.
struct SseLoss {
  double value = 0.0;
  Matrix d_probs;
  std::vector<double> d_alphas;
};

inline SseLoss loss_sse(const Matrix& probs, const Matrix& targets, std::span<const double> alphas, double lambda) {
  detail::require(probs.rows == targets.rows && probs.cols == targets.cols, ErrorCode::ShapeMismatch,
                  "pignistic outputs and targets differ in shape");
  SseLoss out{0.0, Matrix(probs.rows, probs.cols), std::vector<double>(alphas.size(), lambda)};
  for (std::size_t i = 0; i < probs.data.size(); ++i) {
    const double r = probs.data[i] - targets.data[i];
    out.value += r * r;
    out.d_probs.data[i] = 2.0 * r;
  }
  for (double a : alphas) out.value += lambda * a;
  return out;
}

/// Regularized binary cross-entropy on the normalized plausibility of w1.
/// The penalty is lambda * sum v_i^2 on the output connections.
struct CeLoss {
  double value = 0.0;
  std::vector<double> d_p1;
  std::vector<double> d_weights;
};

inline CeLoss loss_ce(std::span<const double> p1, std::span<const double> y, std::span<const double> weights,
                      double lambda) {
  detail::require(p1.size() == y.size(), ErrorCode::ShapeMismatch, "predictions and labels differ in length");
  CeLoss out{0.0, std::vector<double>(p1.size()), std::vector<double>(weights.size())};
  for (std::size_t n = 0; n < p1.size(); ++n) {
    const double p = std::clamp(p1[n], kProbabilityClamp, 1.0 - kProbabilityClamp);
    out.value -= y[n] * std::log(p) + (1.0 - y[n]) * std::log(1.0 - p);
    out.d_p1[n] = -y[n] / p + (1.0 - y[n]) / (1.0 - p);
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.value += lambda * weights[i] * weights[i];
    out.d_weights[i] = 2.0 * lambda * weights[i];
  }
  return out;
}

/// Soft Dice loss 1 - 2 sum(S G) / (sum S + sum G), plus lambda times a
/// precomputed regularizer value. The regularizer's own gradient is the
/// caller's responsibility.
struct DiceLoss {
  double value = 0.0;
  double dice_term = 0.0;
  std::vector<double> d_scores;
};

inline DiceLoss loss_dice(std::span<const double> scores, std::span<const double> truth, double lambda,
                          double regularizer) {
  detail::require(scores.size() == truth.size(), ErrorCode::ShapeMismatch, "scores and ground truth differ in length");
  double overlap = 0.0, sum_s = 0.0, sum_g = 0.0;
  for (std::size_t n = 0; n < scores.size(); ++n) {
    overlap += scores[n] * truth[n];
    sum_s += scores[n];
    sum_g += truth[n];
  }
  const double denom = sum_s + sum_g;
  detail::require(denom > 0.0, ErrorCode::AllZeroDenominator, "Dice loss undefined when both S and G are all zero");
  DiceLoss out;
  out.dice_term = 1.0 - 2.0 * overlap / denom;
  out.value = out.dice_term + lambda * regularizer;
  out.d_scores.resize(scores.size());
  for (std::size_t n = 0; n < scores.size(); ++n)
    out.d_scores[n] = -2.0 * (truth[n] * denom - overlap) / (denom * denom);
  return out;
}

}  // namespace evidential
