#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "evidential/error.hpp"

namespace evidential {

template <class P, class L>
double error_rate(std::span<const P> predictions, std::span<const L> labels) {
  detail::require(predictions.size() == labels.size(), ErrorCode::ShapeMismatch, "predictions and labels differ");
  detail::require(!predictions.empty(), ErrorCode::Empty, "error rate of an empty set");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (static_cast<long long>(predictions[i]) != static_cast<long long>(labels[i])) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

/// Average mass on the frame; each mass vector lists singletons then the frame.
inline double mean_ignorance(std::span<const std::vector<double>> masses) {
  detail::require(!masses.empty(), ErrorCode::Empty, "mean ignorance of an empty set");
  double total = 0.0;
  for (const auto& m : masses) total += m.back();
  return total / static_cast<double>(masses.size());
}

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
};

inline ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> truth) {
  detail::require(predicted.size() == truth.size(), ErrorCode::ShapeMismatch, "masks differ in size");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

struct SegScores {
  double dice = 0.0;
  double sensitivity = 0.0;
  double precision = 0.0;
  // Set when the corresponding denominator was zero and the value is a convention.
  bool dice_undefined = false;
  bool sensitivity_undefined = false;
  bool precision_undefined = false;
};

inline SegScores seg_scores(const ConfusionCounts& c) {
  SegScores s;
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto fn = static_cast<double>(c.fn);
  if (c.tp + c.fp + c.fn == 0) {
    s.dice = 1.0;
    s.dice_undefined = true;
  } else {
    s.dice = 2.0 * tp / (fp + 2.0 * tp + fn);
  }
  if (c.tp + c.fn == 0) {
    s.sensitivity = 1.0;
    s.sensitivity_undefined = true;
  } else {
    s.sensitivity = tp / (tp + fn);
  }
  if (c.tp + c.fp == 0) {
    s.precision = 1.0;
    s.precision_undefined = true;
  } else {
    s.precision = tp / (tp + fp);
  }
  return s;
}

inline SegScores seg_scores(std::span<const int> predicted, std::span<const int> truth) {
  return seg_scores(confusion(predicted, truth));
}

struct EceBin {
  std::size_t count = 0;
  double accuracy = 0.0;
  double confidence = 0.0;
};

struct EceReport {
  std::vector<EceBin> bins;
  double ece = 0.0;
};

/// Bin r covers (r/R, (r+1)/R]; bin 0 also holds confidence exactly 0.
inline std::size_t ece_bin_index(double confidence, std::size_t bins) {
  const double R = static_cast<double>(bins);
  long idx = static_cast<long>(std::ceil(confidence * R)) - 1;
  idx = std::clamp<long>(idx, 0, static_cast<long>(bins) - 1);
  // Correct for rounding in confidence * R at bin edges.
  while (idx > 0 && confidence <= static_cast<double>(idx) / R) --idx;
  while (idx + 1 < static_cast<long>(bins) && confidence > static_cast<double>(idx + 1) / R) ++idx;
  return static_cast<std::size_t>(idx);
}

template <class P, class T>
EceReport ece(std::span<const double> confidences, std::span<const P> predictions, std::span<const T> truths,
              std::size_t bins = 10) {
  const std::size_t N = confidences.size();
  detail::require(predictions.size() == N && truths.size() == N, ErrorCode::ShapeMismatch,
                  "confidences, predictions and truths differ in length");
  detail::require(N > 0, ErrorCode::Empty, "ECE of an empty set");
  detail::require(bins >= 1, ErrorCode::InvalidArgument, "need at least one bin");

  EceReport report;
  report.bins.resize(bins);
  std::vector<std::size_t> correct(bins, 0);
  std::vector<double> conf_sum(bins, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const double c = confidences[i];
    detail::require(c >= 0.0 && c <= 1.0, ErrorCode::OutOfRange, "confidence outside [0, 1]");
    const std::size_t b = ece_bin_index(c, bins);
    ++report.bins[b].count;
    conf_sum[b] += c;
    if (static_cast<long long>(predictions[i]) == static_cast<long long>(truths[i])) ++correct[b];
  }
  for (std::size_t b = 0; b < bins; ++b) {
    auto& bin = report.bins[b];
    if (bin.count == 0) continue;
    const auto n = static_cast<double>(bin.count);
    bin.accuracy = static_cast<double>(correct[b]) / n;
    bin.confidence = conf_sum[b] / n;
    report.ece += n / static_cast<double>(N) * std::abs(bin.accuracy - bin.confidence);
  }
  return report;
}

/// Smallest axis-aligned box holding every foreground pixel of a row-major mask.
struct BoundingBox {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
};

inline std::optional<BoundingBox> tumor_bounding_box(std::span<const int> mask, std::size_t width, std::size_t height) {
  detail::require(mask.size() == width * height, ErrorCode::ShapeMismatch, "mask size does not match grid");
  std::optional<BoundingBox> box;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (!mask[y * width + x]) continue;
      if (!box) {
        box = BoundingBox{x, y, x, y};
      } else {
        box->x0 = std::min(box->x0, x);
        box->y0 = std::min(box->y0, y);
        box->x1 = std::max(box->x1, x);
        box->y1 = std::max(box->y1, y);
      }
    }
  }
  return box;
}

struct ContourCell {
  double x = 0.0;
  double y = 0.0;
  std::array<double, 3> mass{};  // m({w1}), m({w2}), m(Omega)
};

/// Evaluates `mass_at(point)` on a resolution x resolution grid, rows of
/// constant y, y ascending. `mass_at` takes a 2-element span and returns a
/// 3-entry mass vector.
template <class F>
std::vector<ContourCell> contour_grid(F&& mass_at, std::array<double, 2> x_range, std::array<double, 2> y_range,
                                      std::size_t resolution) {
  detail::require(resolution >= 2, ErrorCode::InvalidArgument, "contour grid needs at least 2 points per axis");
  std::vector<ContourCell> grid;
  grid.reserve(resolution * resolution);
  const double steps = static_cast<double>(resolution - 1);
  for (std::size_t r = 0; r < resolution; ++r) {
    const double y = y_range[0] + (y_range[1] - y_range[0]) * static_cast<double>(r) / steps;
    for (std::size_t c = 0; c < resolution; ++c) {
      const double x = x_range[0] + (x_range[1] - x_range[0]) * static_cast<double>(c) / steps;
      const std::array<double, 2> point{x, y};
      const auto m = mass_at(std::span<const double>(point));
      detail::require(m.size() == 3, ErrorCode::DimensionMismatch, "contours need a binary-frame mass");
      grid.push_back({x, y, {m[0], m[1], m[2]}});
    }
  }
  return grid;
}

}  // namespace evidential
